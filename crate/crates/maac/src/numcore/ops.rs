//! Forward and backward passes for the fixed layer set used by all networks:
//! affine maps, leaky ReLU and softmax.

use crate::error::{Error, Result};

use super::matrix::DenseMatrix;
use super::param::ParamTensor;

/// Slope of every leaky ReLU in the crate.
pub const LEAKY_SLOPE: f64 = 0.01;

/// y = x W + b for a batch of row vectors. `b` is 1 x out and broadcast
/// over rows; pass `None` for bias-free projections.
pub fn affine_forward(
    x: &DenseMatrix,
    w: &ParamTensor,
    b: Option<&ParamTensor>,
) -> Result<DenseMatrix> {
    if x.cols() != w.value.rows() {
        return Err(Error::Dimension(format!(
            "affine: input has {} columns, weight expects {}",
            x.cols(),
            w.value.rows()
        )));
    }
    let mut y = x.matmul(&w.value)?;
    if let Some(b) = b {
        if b.value.cols() != y.cols() {
            return Err(Error::Dimension(format!(
                "affine: bias has {} entries, output has {} columns",
                b.value.cols(),
                y.cols()
            )));
        }
        for r in 0..y.rows() {
            let row = y.row_mut(r);
            for (o, &bv) in row.iter_mut().zip(b.value.row(0)) {
                *o += bv;
            }
        }
    }
    Ok(y)
}

/// Backward pass for `affine_forward`. Accumulates dL/dW into `w.grad`
/// (and dL/db into `b.grad` when given), returns dL/dx.
pub fn affine_backward(
    x: &DenseMatrix,
    w: &mut ParamTensor,
    b: Option<&mut ParamTensor>,
    dy: &DenseMatrix,
) -> Result<DenseMatrix> {
    let dw = x.transpose_matmul(dy)?;
    w.grad.add_scaled(&dw, 1.0);
    if let Some(b) = b {
        let db = dy.column_sums();
        b.grad.add_scaled(&db, 1.0);
    }
    dy.matmul_transpose(&w.value)
}

/// Elementwise max(x, slope * x).
pub fn leaky_relu_forward(x: &DenseMatrix, slope: f64) -> DenseMatrix {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
    y
}

/// dL/dx given the pre-activation input and upstream gradient; the local
/// derivative is 1 where x > 0 and `slope` elsewhere.
pub fn leaky_relu_backward(x: &DenseMatrix, dy: &DenseMatrix, slope: f64) -> DenseMatrix {
    debug_assert_eq!(x.shape(), dy.shape());
    let mut dx = dy.clone();
    for (d, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
        if xv <= 0.0 {
            *d *= slope;
        }
    }
    dx
}

/// Scalar leaky ReLU (vector form goes through the matrix variants).
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x < 0.0 {
        slope * x
    } else {
        x
    }
}

/// Numerically stable softmax over a slice of logits.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Dimension("softmax of empty input".to_string()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

/// log softmax, sharing the max-subtraction of `softmax`.
pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Dimension("log_softmax of empty input".to_string()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    Ok(logits.iter().map(|&z| z - max - log_sum).collect())
}

/// Backward pass of y = softmax(s) for one row: ds = y * (dy - dot(dy, y)).
pub fn softmax_backward_row(y: &[f64], dy: &[f64], ds: &mut [f64]) {
    let dot: f64 = y.iter().zip(dy).map(|(&a, &b)| a * b).sum();
    for ((d, &yv), &dyv) in ds.iter_mut().zip(y).zip(dy) {
        *d = yv * (dyv - dot);
    }
}

/// Shannon entropy of a probability vector, in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}
