//! Central-difference gradient checking against analytically computed
//! gradients stored in `ParamTensor::grad`.

use crate::error::{Error, Result};

use super::param::ParamTensor;

/// Outcome of a gradient check over every element of every listed tensor.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// Largest relative error seen across all elements.
    pub max_rel_error: f64,
    /// (tensor index, flat element index) of the worst element.
    pub worst: (usize, usize),
    /// Analytic and numeric gradient at the worst element.
    pub worst_pair: (f64, f64),
    /// Total number of elements compared.
    pub checked: usize,
}

/// Compares the gradients already accumulated in each tensor's `grad`
/// against central finite differences of `loss`.
///
/// `params` must hand out the same tensors in the same order on every
/// call; it is re-invoked per perturbation so that `loss` can borrow
/// the model in between. `loss` must be deterministic and must not
/// depend on `grad` buffers.
///
/// Relative error per element is |a - n| / max(|a|, |n|, 1e-8).
pub fn grad_check<M, P, L>(
    model: &mut M,
    mut params: P,
    mut loss: L,
    eps: f64,
) -> Result<GradCheckReport>
where
    P: FnMut(&mut M) -> Vec<&mut ParamTensor>,
    L: FnMut(&mut M) -> Result<f64>,
{
    if eps <= 0.0 {
        return Err(Error::Config(format!("grad_check eps must be positive, got {eps}")));
    }
    let analytic: Vec<Vec<f64>> = params(model)
        .iter()
        .map(|p| p.grad.data().to_vec())
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        worst_pair: (0.0, 0.0),
        checked: 0,
    };

    for (pi, stored) in analytic.iter().enumerate() {
        for (k, &a) in stored.iter().enumerate() {
            let orig = params(model)[pi].value.data()[k];
            params(model)[pi].value.data_mut()[k] = orig + eps;
            let loss_plus = loss(model)?;
            params(model)[pi].value.data_mut()[k] = orig - eps;
            let loss_minus = loss(model)?;
            params(model)[pi].value.data_mut()[k] = orig;
            if !loss_plus.is_finite() || !loss_minus.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss during gradient check at tensor {pi} element {k}"
                )));
            }
            let n = (loss_plus - loss_minus) / (2.0 * eps);
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (pi, k);
                report.worst_pair = (a, n);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
