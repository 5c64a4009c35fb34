use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::param::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
    Sgd {
        lr: f64,
        momentum: f64,
    },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn with_lr(self, lr: f64) -> Self {
        match self {
            OptimizerConfig::Adam {
                beta1, beta2, eps, ..
            } => OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            },
            OptimizerConfig::Sgd { momentum, .. } => OptimizerConfig::Sgd { lr, momentum },
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerConfig::Adam { lr, .. } | OptimizerConfig::Sgd { lr, .. } => lr,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
}

/// Optimizer state: one moment entry per parameter name, created on the
/// first step that sees the parameter.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    steps: u64,
    state: BTreeMap<String, Moments>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        if !(config.lr() > 0.0) {
            return Err(Error::invalid(
                "optimizer",
                "learning rate must be positive",
            ));
        }
        Ok(Self {
            config,
            steps: 0,
            state: BTreeMap::new(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Applies one update from the current gradients. Gradients are left in
    /// place; the caller resets them.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        if let Some(p) = params.iter().find(|p| p.tensor.grad().is_none()) {
            return Err(Error::MissingGrad(p.name.clone()));
        }
        self.steps += 1;
        let t = self.steps as i32;
        for p in params.iter_mut() {
            let n = p.tensor.len();
            let m = self.state.entry(p.name.clone()).or_insert_with(|| Moments {
                first: vec![0.0; n],
                second: vec![0.0; n],
            });
            let grad = p.tensor.grad().expect("checked above").to_vec();
            let data = p.tensor.data_mut();
            match self.config {
                OptimizerConfig::Adam {
                    lr,
                    beta1,
                    beta2,
                    eps,
                } => {
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    for i in 0..n {
                        let g = grad[i];
                        m.first[i] = beta1 * m.first[i] + (1.0 - beta1) * g;
                        m.second[i] = beta2 * m.second[i] + (1.0 - beta2) * g * g;
                        let mh = m.first[i] / c1;
                        let vh = m.second[i] / c2;
                        data[i] -= lr * mh / (vh.sqrt() + eps);
                    }
                }
                OptimizerConfig::Sgd { lr, momentum } => {
                    for i in 0..n {
                        m.first[i] = momentum * m.first[i] + grad[i];
                        data[i] -= lr * m.first[i];
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
    use crate::engine::{Tape, Tensor};

    fn quadratic_run(config: OptimizerConfig, steps: usize) -> f64 {
        let mut params = ParamSet::new();
        params.insert("w", Tensor::scalar(1.0)).unwrap();
        let mut opt = Optimizer::new(config).unwrap();
        for _ in 0..steps {
            let mut tape = Tape::new();
            let b = params.bind(&mut tape);
            let w = b.var("w");
            let sq = tape.mul(w, w).unwrap();
            let loss = tape.sum(sq);
            tape.backward(loss).unwrap();
            params.reset_grads();
            params.absorb_grads(&tape, &b);
            opt.step(&mut params).unwrap();
        }
        params.get("w").unwrap().tensor.item()
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let w = quadratic_run(OptimizerConfig::adam(1e-2), 2000);
        assert!(w.abs() < 1e-3, "w = {w}");
    }

    #[test]
    fn sgd_minimizes_a_quadratic() {
        let w = quadratic_run(
            OptimizerConfig::Sgd {
                lr: 0.05,
                momentum: 0.9,
            },
            500,
        );
        assert!(w.abs() < 1e-3, "w = {w}");
    }

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let mut params = ParamSet::new();
        params.insert("w", Tensor::full(&[3], 0.7)).unwrap();
        params
            .iter_mut()
            .next()
            .unwrap()
            .tensor
            .accumulate_grad(&[0.0; 3]);
        let mut opt = Optimizer::new(OptimizerConfig::default()).unwrap();
        opt.step(&mut params).unwrap();
        assert_eq!(params.get("w").unwrap().tensor.data(), &[0.7; 3]);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn missing_gradient_names_the_parameter() {
        let mut params = ParamSet::new();
        params
            .insert("encoder.conv.weight", Tensor::zeros(&[1]))
            .unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::default()).unwrap();
        let err = opt.step(&mut params).unwrap_err();
        assert!(err.to_string().contains("encoder.conv.weight"));
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let a = quadratic_run(OptimizerConfig::default(), 50);
        let b = quadratic_run(OptimizerConfig::default(), 50);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
