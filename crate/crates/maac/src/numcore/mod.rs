//! Dense double-precision kernel: matrices, trainable tensors with Adam
//! state, layer forward/backward passes and a finite-difference checker.

pub mod gradcheck;
pub mod matrix;
pub mod ops;
pub mod param;

pub use gradcheck::{grad_check, GradCheckReport};
pub use matrix::DenseMatrix;
pub use ops::{
    affine_backward, affine_forward, entropy, leaky_relu, leaky_relu_backward,
    leaky_relu_forward, log_softmax, softmax, softmax_backward_row, LEAKY_SLOPE,
};
pub use param::ParamTensor;
