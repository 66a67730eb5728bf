//! Gradient verification against central finite differences.
//!
//! The numeric side only ever calls the forward pass, so it stays
//! independent of the backward implementation it checks.

use std::collections::BTreeMap;

use super::nn::Params;
use super::Tensor;

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Result of comparing analytic gradients with finite differences.
#[derive(Debug)]
pub struct GradCheckReport {
    /// Worst relative error over all parameter elements.
    pub max_rel_error: f64,
    /// Worst relative error per parameter.
    pub per_param: BTreeMap<String, f64>,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Relative error with a floor on the denominator: central differences with
/// eps=1e-5 resolve gradients down to ~1e-11, so anything this small on both
/// sides is agreement, not error.
fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Compare `analytic` against central finite differences of `loss_fn`.
///
/// `loss_fn` must be a pure function of the parameter values (fixed data,
/// fixed seed). Every element of every parameter is perturbed by ±eps.
pub fn check_gradients<F>(
    params: &Params,
    analytic: &BTreeMap<String, Tensor>,
    loss_fn: F,
    eps: f64,
) -> GradCheckReport
where
    F: Fn(&Params) -> f64,
{
    let mut per_param = BTreeMap::new();
    let mut max_rel = 0.0f64;
    let mut scratch = params.clone();
    for (name, tensor) in params.iter() {
        let grad = analytic
            .get(name)
            .unwrap_or_else(|| panic!("no analytic gradient for {name:?}"));
        let mut worst = 0.0f64;
        for idx in 0..tensor.len() {
            let original = tensor.data()[idx];
            scratch.get_mut(name).unwrap().data_mut()[idx] = original + eps;
            let plus = loss_fn(&scratch);
            scratch.get_mut(name).unwrap().data_mut()[idx] = original - eps;
            let minus = loss_fn(&scratch);
            scratch.get_mut(name).unwrap().data_mut()[idx] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = rel_error(grad.data()[idx], numeric);
            worst = worst.max(err);
        }
        max_rel = max_rel.max(worst);
        per_param.insert(name.clone(), worst);
    }
    GradCheckReport { max_rel_error: max_rel, per_param }
}
