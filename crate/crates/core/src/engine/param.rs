use crate::error::{Error, Result};

use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// A named trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
}

/// Ordered collection of uniquely named parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(Error::invalid(
                "params",
                format!("duplicate parameter `{name}`"),
            ));
        }
        self.params.push(Parameter {
            name,
            tensor: tensor.with_grad(),
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    /// Records every parameter as a gradient-carrying leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        self.bind_with(tape, true)
    }

    /// Records every parameter as a constant, for inference-only passes.
    pub fn bind_frozen(&self, tape: &mut Tape) -> Bound {
        self.bind_with(tape, false)
    }

    fn bind_with(&self, tape: &mut Tape, trainable: bool) -> Bound {
        let vars = self
            .params
            .iter()
            .map(|p| {
                let t = Tensor::new(p.tensor.shape(), p.tensor.data().to_vec())
                    .expect("shape preserved");
                let t = if trainable { t.with_grad() } else { t };
                (p.name.clone(), tape.leaf(t))
            })
            .collect();
        Bound { vars, trainable }
    }

    /// Adds the gradients that `tape` accumulated for `bound` into each
    /// parameter's own gradient buffer.
    pub fn absorb_grads(&mut self, tape: &Tape, bound: &Bound) {
        for (p, (_, v)) in self.params.iter_mut().zip(&bound.vars) {
            if let Some(g) = tape.grad(*v) {
                p.tensor.accumulate_grad(g);
            }
        }
    }

    pub fn reset_grads(&mut self) {
        for p in &mut self.params {
            p.tensor.zero_grad();
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .filter_map(|p| p.tensor.grad())
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales all gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm {
            let s = max_norm / norm;
            for p in &mut self.params {
                if let Some(g) = p.tensor.grad_mut() {
                    g.iter_mut().for_each(|v| *v *= s);
                }
            }
        }
        norm
    }
}

/// Tape handles for one [`ParamSet`], looked up by parameter name.
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<(String, Var)>,
    trainable: bool,
}

impl Bound {
    pub fn var(&self, name: &str) -> Var {
        self.vars
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("no parameter named `{name}`"))
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }
}
