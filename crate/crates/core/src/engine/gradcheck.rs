//! Central finite-difference checks of tape gradients.

use crate::error::Result;

use super::{Bound, ParamSet, Tape, Tensor, Var};

pub const STEP: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, 1e-7)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(input or parameter, element, analytic, numeric)` at the worst element.
    pub worst: Option<(String, usize, f64, f64)>,
}

impl GradReport {
    fn record(&mut self, what: &str, j: usize, analytic: f64, numeric: f64) {
        let rel = relative_error(analytic, numeric);
        self.checked += 1;
        if self.worst.is_none() || rel > self.max_rel_error {
            self.max_rel_error = rel;
            self.worst = Some((what.to_string(), j, analytic, numeric));
        }
    }

    pub fn merge(&mut self, other: GradReport) {
        self.checked += other.checked;
        if other.max_rel_error > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = other.max_rel_error;
            self.worst = other.worst;
        }
    }
}

/// Checks the gradient of the scalar `f(inputs)` with respect to every
/// element of every input.
pub fn check_inputs(
    inputs: &[Tensor],
    f: impl Fn(&mut Tape, &[Var]) -> Result<Var>,
) -> Result<GradReport> {
    let run = |vals: &[Tensor], grad: bool| -> Result<(Tape, Vec<Var>, Var)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals
            .iter()
            .map(|v| {
                tape.leaf(if grad {
                    v.clone().with_grad()
                } else {
                    v.clone()
                })
            })
            .collect();
        let out = f(&mut tape, &vars)?;
        Ok((tape, vars, out))
    };
    let (mut tape, vars, out) = run(inputs, true)?;
    tape.backward(out)?;
    let mut report = GradReport::default();
    for (i, x) in inputs.iter().enumerate() {
        let analytic = tape
            .grad(vars[i])
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; x.len()]);
        for (j, &a) in analytic.iter().enumerate() {
            let mut shifted = inputs.to_vec();
            shifted[i].data_mut()[j] += STEP;
            let (tp, _, op) = run(&shifted, false)?;
            shifted[i].data_mut()[j] -= 2.0 * STEP;
            let (tm, _, om) = run(&shifted, false)?;
            let numeric = (tp.item(op) - tm.item(om)) / (2.0 * STEP);
            report.record(&format!("input {i}"), j, a, numeric);
        }
    }
    Ok(report)
}

/// Checks the gradient of `loss` with respect to every parameter in `params`.
/// The parameters are restored before returning.
pub fn check_params(
    params: &mut ParamSet,
    loss: impl Fn(&mut Tape, &Bound) -> Result<Var>,
) -> Result<GradReport> {
    let eval = |params: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new();
        let b = params.bind_frozen(&mut tape);
        let l = loss(&mut tape, &b)?;
        Ok(tape.item(l))
    };
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let l = loss(&mut tape, &bound)?;
    tape.backward(l)?;
    params.reset_grads();
    params.absorb_grads(&tape, &bound);
    let analytic: Vec<(String, Vec<f64>)> = params
        .iter()
        .map(|p| {
            let g = p
                .tensor
                .grad()
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; p.tensor.len()]);
            (p.name.clone(), g)
        })
        .collect();
    params.reset_grads();
    let mut report = GradReport::default();
    for (k, (name, grads)) in analytic.iter().enumerate() {
        for (j, &a) in grads.iter().enumerate() {
            let orig = params_value(params, k, j);
            set_value(params, k, j, orig + STEP);
            let lp = eval(params)?;
            set_value(params, k, j, orig - STEP);
            let lm = eval(params)?;
            set_value(params, k, j, orig);
            report.record(name, j, a, (lp - lm) / (2.0 * STEP));
        }
    }
    Ok(report)
}

fn params_value(params: &ParamSet, k: usize, j: usize) -> f64 {
    params.iter().nth(k).expect("index in range").tensor.data()[j]
}

fn set_value(params: &mut ParamSet, k: usize, j: usize, v: f64) {
    params
        .iter_mut()
        .nth(k)
        .expect("index in range")
        .tensor
        .data_mut()[j] = v;
}
