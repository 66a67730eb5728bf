//! Parameter update rules: plain gradient descent and Adam.

use std::collections::BTreeMap;

use thiserror::Error;

use super::nn::Params;
use super::Tensor;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("non-finite gradient for parameter {name:?}")]
    NonFiniteGradient { name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(format!("unknown optimizer {other:?} (expected sgd or adam)")),
        }
    }
}

/// Stateful optimizer over a named parameter set.
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step_count: u64,
    moments: BTreeMap<String, (Tensor, Tensor)>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Optimizer {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// Apply one update. Every parameter must have a gradient entry of
    /// matching shape (use `Gradients::into_param_grads`, which fills in
    /// zeros for unreached parameters).
    pub fn step(
        &mut self,
        params: &mut Params,
        grads: &BTreeMap<String, Tensor>,
    ) -> Result<(), OptimError> {
        for (name, grad) in grads {
            if !grad.all_finite() {
                return Err(OptimError::NonFiniteGradient { name: name.clone() });
            }
        }
        self.step_count += 1;
        let t = self.step_count;
        for (name, tensor) in params.iter_mut() {
            let grad = grads
                .get(name)
                .unwrap_or_else(|| panic!("missing gradient for parameter {name:?}"));
            assert_eq!(
                grad.shape(),
                tensor.shape(),
                "gradient shape {:?} does not match parameter {name:?} of shape {:?}",
                grad.shape(),
                tensor.shape()
            );
            match self.kind {
                OptimizerKind::Sgd => {
                    for (p, g) in tensor.data_mut().iter_mut().zip(grad.data()) {
                        *p -= self.lr * g;
                    }
                }
                OptimizerKind::Adam => {
                    let (m, v) = self
                        .moments
                        .entry(name.clone())
                        .or_insert_with(|| (Tensor::zeros(grad.shape()), Tensor::zeros(grad.shape())));
                    let bc1 = 1.0 - self.beta1.powi(t as i32);
                    let bc2 = 1.0 - self.beta2.powi(t as i32);
                    for ((p, g), (mi, vi)) in tensor
                        .data_mut()
                        .iter_mut()
                        .zip(grad.data())
                        .zip(m.data_mut().iter_mut().zip(v.data_mut()))
                    {
                        *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                        *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
                        let m_hat = *mi / bc1;
                        let v_hat = *vi / bc2;
                        *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(v: f64) -> Params {
        let mut p = Params::new();
        p.insert("x", Tensor::scalar(v));
        p
    }

    fn grad_of(v: f64) -> BTreeMap<String, Tensor> {
        let mut g = BTreeMap::new();
        g.insert("x".to_string(), Tensor::scalar(v));
        g
    }

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let mut params = one_param(1.5);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.0);
        opt.step(&mut params, &grad_of(3.0)).unwrap();
        assert_eq!(params.get("x").unwrap().item(), 1.5);

        let mut params = one_param(1.5);
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.0);
        opt.step(&mut params, &grad_of(3.0)).unwrap();
        assert_eq!(params.get("x").unwrap().item(), 1.5);
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut params = one_param(1.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1);
        opt.step(&mut params, &grad_of(1.0)).unwrap();
        assert!((params.get("x").unwrap().item() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_magnitude_and_sign() {
        // At t=1 the bias-corrected update is lr·g/(|g| + eps), i.e. the
        // magnitude is ~lr and the direction is -sign(g).
        for &g in &[0.37, -2.4, 11.0] {
            let mut params = one_param(0.0);
            let mut opt = Optimizer::new(OptimizerKind::Adam, 0.05);
            opt.step(&mut params, &grad_of(g)).unwrap();
            let moved = params.get("x").unwrap().item();
            let expected = -0.05 * g / (g.abs() + 1e-8);
            assert!((moved - expected).abs() < 1e-12);
            assert!(moved.signum() == -g.signum());
            assert!((moved.abs() - 0.05).abs() < 1e-6);
        }
    }

    #[test]
    fn nan_gradient_is_reported_with_name() {
        let mut params = one_param(0.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.05);
        let err = opt.step(&mut params, &grad_of(f64::NAN)).unwrap_err();
        assert!(err.to_string().contains("\"x\""));
    }

    #[test]
    fn adam_is_deterministic_given_state() {
        let run = || {
            let mut params = one_param(0.3);
            let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01);
            for i in 0..10 {
                opt.step(&mut params, &grad_of(0.1 * i as f64 - 0.3)).unwrap();
            }
            params.get("x").unwrap().item()
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }
}
