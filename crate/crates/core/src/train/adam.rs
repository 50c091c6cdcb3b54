use serde::{Deserialize, Serialize};

use crate::autograd::Module;
use crate::error::{invalid, Error, Result};
use crate::tensor::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments follow the visit order of the
/// model's trainable parameters.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    /// Number of applied steps.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients. A non-finite
    /// gradient aborts the step before anything changes; the error names
    /// the parameter.
    pub fn step<M: Module<T> + ?Sized>(&mut self, model: &mut M) -> Result<()> {
        let mut sizes = Vec::new();
        let mut bad = None;
        model.visit_params(&mut |p| {
            if p.trainable() {
                sizes.push(p.value().len());
                if bad.is_none() {
                    if let Some(i) = p.grad().data().iter().position(|g| !g.is_finite()) {
                        bad = Some((p.name().to_string(), i, p.grad().data()[i].as_f64()));
                    }
                }
            }
        });
        if let Some((name, i, g)) = bad {
            return Err(Error::NonFinite {
                what: format!("gradient of {name}"),
                detail: format!("element {i} is {g}"),
            });
        }
        if self.first.is_empty() {
            self.first = sizes.iter().map(|&n| vec![T::zero(); n]).collect();
            self.second = self.first.clone();
        } else if self.first.iter().map(Vec::len).ne(sizes.iter().copied()) {
            return Err(invalid!(
                "optimizer state does not match the model's parameters"
            ));
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let lr = T::lit(c.lr);
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (one_b1, one_b2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
        let corr1 = T::lit(1.0 - c.beta1.powi(t));
        let corr2 = T::lit(1.0 - c.beta2.powi(t));
        let eps = T::lit(c.eps);
        let mut k = 0;
        let (first, second) = (&mut self.first, &mut self.second);
        model.visit_params_mut(&mut |p| {
            if !p.trainable() {
                return;
            }
            let (m, v) = (&mut first[k], &mut second[k]);
            k += 1;
            let grad = p.grad().data().to_vec();
            for (((w, g), m), v) in p
                .value_mut()
                .data_mut()
                .iter_mut()
                .zip(&grad)
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = b1 * *m + one_b1 * *g;
                *v = b2 * *v + one_b2 * *g * *g;
                let m_hat = *m / corr1;
                let v_hat = *v / corr2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
        });
        Ok(())
    }
}
