use crate::autograd::{BatchStats, Module, Param, Tape, Var};
use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

/// Batch normalisation over `[channels, n]` inputs.
///
/// In training the statistics come from the batch and the running
/// estimates are updated afterwards with [`BatchNorm1d::update_running`];
/// in evaluation only the running estimates are used.
#[derive(Clone, Debug)]
pub struct BatchNorm1d<T: Scalar> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Param<T>,
    pub running_var: Param<T>,
    pub eps: f64,
    pub momentum: f64,
}

impl<T: Scalar> BatchNorm1d<T> {
    pub const EPS: f64 = 1e-5;
    pub const MOMENTUM: f64 = 0.1;

    pub fn new(name: &str, channels: usize) -> Self {
        Self {
            gamma: Param::new(
                format!("{name}.gamma"),
                Tensor::full(vec![channels], T::one()),
            ),
            beta: Param::new(format!("{name}.beta"), Tensor::zeros(vec![channels])),
            running_mean: Param::buffer(
                format!("{name}.running_mean"),
                Tensor::zeros(vec![channels]),
            ),
            running_var: Param::buffer(
                format!("{name}.running_var"),
                Tensor::full(vec![channels], T::one()),
            ),
            eps: Self::EPS,
            momentum: Self::MOMENTUM,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value().len()
    }

    pub fn forward_train<'t>(
        &self,
        tape: &'t Tape<T>,
        x: Var<'t, T>,
    ) -> Result<(Var<'t, T>, BatchStats)> {
        x.batch_norm(tape.param(&self.gamma), tape.param(&self.beta), self.eps)
    }

    pub fn forward_eval<'t>(&self, tape: &'t Tape<T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        let inv_std = self
            .running_var
            .value()
            .map(|v| T::one() / (v + T::lit(self.eps)).sqrt());
        let scale = tape.param(&self.gamma).mul(tape.constant(inv_std))?;
        let shift = tape.param(&self.beta).sub(
            tape.constant(self.running_mean.value().clone())
                .mul(scale)?,
        )?;
        x.channel_affine(scale, shift)
    }

    /// `running = (1 - momentum)·running + momentum·batch`.
    pub fn update_running(&mut self, stats: &BatchStats) {
        let m = self.momentum;
        let blend = |running: &mut Param<T>, batch: &[f64]| {
            for (r, &b) in running.value_mut().data_mut().iter_mut().zip(batch) {
                *r = T::lit((1.0 - m) * r.as_f64() + m * b);
            }
        };
        blend(&mut self.running_mean, &stats.mean);
        blend(&mut self.running_var, &stats.var);
    }
}

impl<T: Scalar> Module<T> for BatchNorm1d<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        f(&self.gamma);
        f(&self.beta);
        f(&self.running_mean);
        f(&self.running_var);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.gamma);
        f(&mut self.beta);
        f(&mut self.running_mean);
        f(&mut self.running_var);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eval_with_unit_stats_is_identity() {
        let bn = BatchNorm1d::<f64>::new("bn", 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::<f64>::uniform(vec![3, 10], 5.0, &mut rng);
        let tape = Tape::new();
        let y = bn.forward_eval(&tape, tape.constant(x.clone())).unwrap();
        // identity up to the eps term: y = x / sqrt(1 + eps)
        let shrink = 1.0 / (1.0 + bn.eps).sqrt();
        for (a, b) in y.value().data().iter().zip(x.data()) {
            assert!((a - b * shrink).abs() <= 1e-6, "{a} vs {b}");
            assert!((a - b).abs() <= bn.eps * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn train_mode_normalises_and_updates_running_stats() {
        let mut bn = BatchNorm1d::<f64>::new("bn", 1);
        let tape = Tape::new();
        let x = tape
            .constant_f64(vec![1, 4], &[1.0, 2.0, 3.0, 4.0])
            .unwrap();
        let (y, stats) = bn.forward_train(&tape, x).unwrap();
        let mean: f64 = y.value().data().iter().sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert_eq!(stats.mean, vec![2.5]);
        assert!((stats.var[0] - 5.0 / 3.0).abs() < 1e-12);
        bn.update_running(&stats);
        assert!((bn.running_mean.value().data()[0] - 0.25).abs() < 1e-12);
        let expected_var = 0.9 + 0.1 * 5.0 / 3.0;
        assert!((bn.running_var.value().data()[0] - expected_var).abs() < 1e-12);
    }
}
