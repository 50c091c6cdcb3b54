//! Central-difference gradient verification.
//!
//! Relative error per coordinate is
//! `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`; checks report
//! the maximum over coordinates.

use rand::seq::index::sample;
use rand::Rng;

use crate::autograd::{Module, Tape, Var};
use crate::error::{invalid, Result};
use crate::tensor::Tensor;

const FLOOR: f64 = 1e-8;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn scalar_output(v: Var<'_, f64>) -> Result<f64> {
    v.value().item().ok_or_else(|| {
        invalid!(
            "grad_check needs a scalar function, got output shape {:?}",
            v.shape()
        )
    })
}

/// Maximum relative error between the taped gradient of `f` at `point` and
/// central differences with the given step.
pub fn grad_check<F>(f: F, point: &Tensor<f64>, step: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape<f64>, Var<'t, f64>) -> Result<Var<'t, f64>>,
{
    if step <= 0.0 {
        return Err(invalid!("grad_check step must be positive, got {step}"));
    }
    let tape = Tape::new();
    let x = tape.leaf(point.clone());
    let out = f(&tape, x)?;
    scalar_output(out)?;
    tape.backward(out)?;
    let analytic = tape
        .grad(x)
        .unwrap_or_else(|| Tensor::zeros(point.shape().to_vec()));

    let eval = |p: Tensor<f64>| -> Result<f64> {
        let tape = Tape::new();
        let x = tape.leaf(p);
        scalar_output(f(&tape, x)?)
    };
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let mut plus = point.clone();
        plus.data_mut()[i] += step;
        let mut minus = point.clone();
        minus.data_mut()[i] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}

/// Result of checking every trainable parameter of a module.
#[derive(Debug, Clone)]
pub struct ParamCheck {
    /// `(parameter name, max relative error over the checked coordinates)`
    pub per_param: Vec<(String, f64)>,
}

impl ParamCheck {
    pub fn max_error(&self) -> f64 {
        self.per_param.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&(String, f64)> {
        self.per_param.iter().max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Checks the gradient of `loss` with respect to every trainable parameter
/// of `model`. Large tensors are subsampled to at most `max_coords` random
/// coordinates each.
pub fn check_module<M, F>(
    model: &mut M,
    loss: F,
    step: f64,
    max_coords: usize,
    rng: &mut impl Rng,
) -> Result<ParamCheck>
where
    M: Module<f64>,
    F: for<'t> Fn(&M, &'t Tape<f64>) -> Result<Var<'t, f64>>,
{
    model.zero_grad();
    {
        let tape = Tape::new();
        let out = loss(model, &tape)?;
        scalar_output(out)?;
        tape.backward(out)?;
        model.collect_grads(&tape);
    }
    let mut grads = Vec::new();
    model.visit_params(&mut |p| {
        if p.trainable() {
            grads.push((p.name().to_string(), p.grad().clone()));
        }
    });

    let eval = |m: &M| -> Result<f64> {
        let tape = Tape::new();
        scalar_output(loss(m, &tape)?)
    };
    let mut per_param = Vec::new();
    for (index, (name, grad)) in grads.iter().enumerate() {
        let n = grad.len();
        let coords: Vec<usize> = if n <= max_coords {
            (0..n).collect()
        } else {
            sample(rng, n, max_coords).into_vec()
        };
        let mut worst = 0.0f64;
        for c in coords {
            let f_plus = {
                nudge(model, index, c, step);
                eval(model)
            };
            nudge(model, index, c, -2.0 * step);
            let f_minus = eval(model);
            nudge(model, index, c, step);
            let numeric = (f_plus? - f_minus?) / (2.0 * step);
            worst = worst.max(relative_error(grad.data()[c], numeric));
        }
        per_param.push((name.clone(), worst));
    }
    Ok(ParamCheck { per_param })
}

fn nudge<M: Module<f64>>(model: &mut M, index: usize, coord: usize, delta: f64) {
    let mut i = 0;
    model.visit_params_mut(&mut |p| {
        if p.trainable() {
            if i == index {
                p.value_mut().data_mut()[coord] += delta;
            }
            i += 1;
        }
    });
}
