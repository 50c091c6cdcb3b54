//! Raw-waveform acoustic network.
//!
//! A sinc front end feeds a small convolutional stack and a dense layer
//! whose output is the utterance-level acoustic feature. Training sees
//! single random 250 ms chunks; inference slides a window over the whole
//! utterance and sums per-window class probabilities.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autograd::{conv1d, BatchStats, ConvDims, Module, Padding, Param, Tape, Var};
use crate::error::{invalid, Error, Result};
use crate::nn::{BatchNorm1d, Conv1dLayer, Dense, Mode, LEAKY_SLOPE};
use crate::sinc::{SincConfig, SincLayer};
use crate::tensor::{Scalar, Tensor};
use crate::Emotion;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlockConfig {
    pub channels: usize,
    pub width: usize,
    pub pool: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcousticConfig {
    pub sinc: SincConfig,
    /// Max-pool width applied to the rectified sinc output.
    pub sinc_pool: usize,
    pub blocks: Vec<ConvBlockConfig>,
    /// Width of the penultimate dense layer (the acoustic feature).
    pub feature_width: usize,
    /// Chunk length in samples.
    pub window: usize,
    /// Sliding-window hop in samples.
    pub hop: usize,
}

impl AcousticConfig {
    pub const PAPER_FEATURE_WIDTH: usize = 2048;

    /// 80 sinc filters of length 251, two 60-channel conv blocks and a
    /// 2048-wide feature layer; 250 ms windows with a 10 ms hop at 16 kHz.
    pub fn paper() -> Self {
        Self {
            sinc: SincConfig::default(),
            sinc_pool: 3,
            blocks: vec![
                ConvBlockConfig {
                    channels: 60,
                    width: 5,
                    pool: 3,
                };
                2
            ],
            feature_width: Self::PAPER_FEATURE_WIDTH,
            window: 4000,
            hop: 160,
        }
    }

    /// Desk-scale variant: 16 filters of length 101, one conv block and a
    /// narrow feature layer.
    pub fn toy() -> Self {
        Self {
            sinc: SincConfig {
                filters: 16,
                length: 101,
                ..SincConfig::default()
            },
            sinc_pool: 3,
            blocks: vec![ConvBlockConfig {
                channels: 8,
                width: 5,
                pool: 3,
            }],
            feature_width: 32,
            window: 4000,
            hop: 160,
        }
    }

    pub fn plan(&self) -> ChunkPlan {
        ChunkPlan {
            window: self.window,
            hop: self.hop,
        }
    }

    /// Per-stage `(channels, length)` after the sinc stage and each block,
    /// for one window.
    pub fn stage_shapes(&self) -> Result<Vec<(usize, usize)>> {
        self.sinc.validate()?;
        let shrink = |len: usize, by: usize, what: &str| {
            len.checked_sub(by).filter(|&l| l > 0).ok_or_else(|| {
                invalid!("window of {} samples is too short for {what}", self.window)
            })
        };
        let pooled = |len: usize, pool: usize, what: &str| {
            if pool == 0 {
                return Err(invalid!("pool width must be positive"));
            }
            let l = len / pool;
            if l == 0 {
                Err(invalid!(
                    "window of {} samples is too short for {what}",
                    self.window
                ))
            } else {
                Ok(l)
            }
        };
        let mut len = shrink(self.window + 1, self.sinc.length, "the sinc kernels")?;
        len = pooled(len, self.sinc_pool, "the sinc pooling")?;
        let mut shapes = vec![(self.sinc.filters, len)];
        for (i, b) in self.blocks.iter().enumerate() {
            if b.channels == 0 || b.width == 0 {
                return Err(invalid!("conv block {i} needs positive channels and width"));
            }
            len = shrink(len + 1, b.width, "the conv stack")?;
            len = pooled(len, b.pool, "the conv stack")?;
            shapes.push((b.channels, len));
        }
        Ok(shapes)
    }

    pub fn flat_width(&self) -> Result<usize> {
        let (c, l) = *self
            .stage_shapes()?
            .last()
            .expect("sinc stage always present");
        Ok(c * l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.window == 0 {
            return Err(invalid!("window and hop must be positive"));
        }
        if self.feature_width == 0 {
            return Err(invalid!("feature width must be positive"));
        }
        self.flat_width().map(|_| ())
    }
}

/// Sliding-window layout for utterance-level inference.
///
/// A wave of `T >= window` samples yields `floor((T - window) / hop) + 1`
/// windows; samples after the last full window are not scored. Shorter
/// waves are zero-padded to one window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkPlan {
    pub window: usize,
    pub hop: usize,
}

impl ChunkPlan {
    pub fn count(&self, len: usize) -> usize {
        if len <= self.window {
            1
        } else {
            (len - self.window) / self.hop + 1
        }
    }

    pub fn starts(&self, len: usize) -> impl Iterator<Item = usize> {
        let hop = self.hop;
        (0..self.count(len)).map(move |i| i * hop)
    }

    /// The wave itself, or a zero-padded copy when shorter than a window.
    pub fn padded<T: Scalar>(&self, wave: &[T]) -> Vec<T> {
        let mut v = wave.to_vec();
        if v.len() < self.window {
            v.resize(self.window, T::zero());
        }
        v
    }
}

/// Scales a wave so its peak magnitude is 1. All-zero input is returned
/// unchanged.
pub fn normalize_amplitude<T: Scalar>(wave: &[T]) -> Result<Vec<T>> {
    if wave.is_empty() {
        return Err(Error::EmptyTensor {
            op: "normalize_amplitude",
        });
    }
    let peak = wave.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if peak == T::zero() {
        return Ok(wave.to_vec());
    }
    Ok(wave.iter().map(|&v| v / peak).collect())
}

/// A uniformly placed `window`-sample chunk; short waves are zero-padded.
pub fn sample_training_chunk<T: Scalar>(wave: &[T], window: usize, rng: &mut impl Rng) -> Vec<T> {
    if wave.len() <= window {
        let mut v = wave.to_vec();
        v.resize(window, T::zero());
        return v;
    }
    let start = rng.gen_range(0..=wave.len() - window);
    wave[start..start + window].to_vec()
}

#[derive(Clone, Debug)]
pub struct ConvBlock<T: Scalar> {
    pub conv: Conv1dLayer<T>,
    pub bn: BatchNorm1d<T>,
    pub pool: usize,
}

/// Per-chunk outputs of a forward pass.
#[derive(Clone, Copy, Debug)]
pub struct ChunkOutput<'t, T: Scalar> {
    pub logits: Var<'t, T>,
    pub feature: Var<'t, T>,
}

#[derive(Clone, Debug)]
pub struct AcousticNet<T: Scalar> {
    pub sinc: SincLayer<T>,
    pub blocks: Vec<ConvBlock<T>>,
    pub dense: Dense<T>,
    pub classifier: Dense<T>,
    config: AcousticConfig,
}

impl<T: Scalar> AcousticNet<T> {
    pub fn new(config: AcousticConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let sinc = SincLayer::new("acoustic.sinc", config.sinc.clone())?;
        let mut in_ch = config.sinc.filters;
        let mut blocks = Vec::with_capacity(config.blocks.len());
        for (i, b) in config.blocks.iter().enumerate() {
            blocks.push(ConvBlock {
                conv: Conv1dLayer::new(
                    &format!("acoustic.block{i}.conv"),
                    in_ch,
                    b.channels,
                    b.width,
                    Padding::Valid,
                    rng,
                ),
                bn: BatchNorm1d::new(&format!("acoustic.block{i}.bn"), b.channels),
                pool: b.pool,
            });
            in_ch = b.channels;
        }
        let flat = config.flat_width()?;
        Ok(Self {
            sinc,
            blocks,
            dense: Dense::new("acoustic.dense", flat, config.feature_width, rng),
            classifier: Dense::new(
                "acoustic.classifier",
                config.feature_width,
                Emotion::COUNT,
                rng,
            ),
            config,
        })
    }

    pub fn config(&self) -> &AcousticConfig {
        &self.config
    }

    pub fn feature_width(&self) -> usize {
        self.config.feature_width
    }

    /// Training forward over a batch of chunks. Batch-norm statistics are
    /// taken across every chunk in the batch and returned so the caller
    /// can update the running estimates after the optimizer step.
    pub fn forward_train<'t>(
        &self,
        tape: &'t Tape<T>,
        chunks: &[Vec<T>],
    ) -> Result<(Vec<ChunkOutput<'t, T>>, Vec<BatchStats>)> {
        let kernels = self.kernel_var(tape)?;
        let fronts = chunks
            .iter()
            .map(|c| self.sinc_stage(tape, kernels, c))
            .collect::<Result<Vec<_>>>()?;
        self.trunk(tape, fronts, Mode::Train)
    }

    /// Eval-mode forward of a single chunk.
    pub fn forward_eval<'t>(&self, tape: &'t Tape<T>, chunk: &[T]) -> Result<ChunkOutput<'t, T>> {
        let kernels = self.kernel_var(tape)?;
        let front = self.sinc_stage(tape, kernels, chunk)?;
        Ok(self.trunk(tape, vec![front], Mode::Eval)?.0[0])
    }

    /// Folds batch statistics from [`AcousticNet::forward_train`] into the
    /// running estimates.
    pub fn update_running(&mut self, stats: &[BatchStats]) {
        for (block, s) in self.blocks.iter_mut().zip(stats) {
            block.bn.update_running(s);
        }
    }

    fn kernel_var<'t>(&self, tape: &'t Tape<T>) -> Result<Var<'t, T>> {
        self.sinc
            .build_filters(tape)
            .reshape(vec![self.sinc.filters(), 1, self.sinc.length()])
    }

    fn sinc_stage<'t>(
        &self,
        tape: &'t Tape<T>,
        kernels: Var<'t, T>,
        chunk: &[T],
    ) -> Result<Var<'t, T>> {
        if chunk.len() != self.config.window {
            return Err(invalid!(
                "acoustic chunk has {} samples, expected {}",
                chunk.len(),
                self.config.window
            ));
        }
        let x = tape.constant(Tensor::new(vec![1, chunk.len()], chunk.to_vec())?);
        x.conv1d(kernels, None, Padding::Valid)
    }

    /// Everything after the sinc convolution. `fronts` are `[F, W - L + 1]`.
    fn trunk<'t>(
        &self,
        tape: &'t Tape<T>,
        fronts: Vec<Var<'t, T>>,
        mode: Mode,
    ) -> Result<(Vec<ChunkOutput<'t, T>>, Vec<BatchStats>)> {
        let mut xs = fronts
            .into_iter()
            .map(|f| f.abs()?.max_pool(self.config.sinc_pool))
            .collect::<Result<Vec<_>>>()?;
        let mut stats = Vec::new();
        for block in &self.blocks {
            let ys = xs
                .iter()
                .map(|&x| block.conv.forward(tape, x))
                .collect::<Result<Vec<_>>>()?;
            let normed = match mode {
                Mode::Train => {
                    let len = ys[0].shape()[1];
                    let (joined, s) = block.bn.forward_train(tape, Var::concat(&ys, 1)?)?;
                    stats.push(s);
                    (0..ys.len())
                        .map(|i| joined.slice(1, i * len, len))
                        .collect::<Result<Vec<_>>>()?
                }
                Mode::Eval => ys
                    .into_iter()
                    .map(|y| block.bn.forward_eval(tape, y))
                    .collect::<Result<Vec<_>>>()?,
            };
            xs = normed
                .into_iter()
                .map(|y| y.leaky_relu(LEAKY_SLOPE)?.max_pool(block.pool))
                .collect::<Result<Vec<_>>>()?;
        }
        let outputs = xs
            .into_iter()
            .map(|x| {
                let n = x.value().len();
                let feature = self
                    .dense
                    .forward(tape, x.reshape(vec![n])?)?
                    .leaky_relu(LEAKY_SLOPE)?;
                let logits = self.classifier.forward(tape, feature)?;
                Ok(ChunkOutput { logits, feature })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((outputs, stats))
    }
}

impl<T: Scalar> Module<T> for AcousticNet<T> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<T>)) {
        self.sinc.visit_params(f);
        for b in &self.blocks {
            b.conv.visit_params(f);
            b.bn.visit_params(f);
        }
        self.dense.visit_params(f);
        self.classifier.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.sinc.visit_params_mut(f);
        for b in &mut self.blocks {
            b.conv.visit_params_mut(f);
            b.bn.visit_params_mut(f);
        }
        self.dense.visit_params_mut(f);
        self.classifier.visit_params_mut(f);
    }
}

/// Eval-mode outputs for one window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowOutput<T> {
    pub probs: Vec<T>,
    pub feature: Vec<T>,
}

/// An utterance prepared for sliding-window scoring.
///
/// The sinc convolution is linear and position-independent, so it runs
/// once over the whole wave and each window reads its columns; the result
/// is bit-identical to filtering every chunk separately.
pub struct Utterance<'n, T: Scalar> {
    net: &'n AcousticNet<T>,
    filtered: Tensor<T>,
    plan: ChunkPlan,
    count: usize,
}

impl<'n, T: Scalar> Utterance<'n, T> {
    pub fn new(net: &'n AcousticNet<T>, wave: &[T], plan: ChunkPlan) -> Result<Self> {
        if wave.is_empty() {
            return Err(Error::EmptyTensor { op: "utterance" });
        }
        if plan.window != net.config.window {
            return Err(invalid!(
                "chunk plan window {} does not match the network window {}",
                plan.window,
                net.config.window
            ));
        }
        if plan.hop == 0 {
            return Err(invalid!("chunk plan hop must be positive"));
        }
        let x = plan.padded(wave);
        let (f, l) = (net.sinc.filters(), net.sinc.length());
        let dims = ConvDims {
            in_ch: 1,
            out_ch: f,
            width: l,
            len: x.len(),
            pad_left: 0,
            out_len: x.len() + 1 - l,
        };
        let kernels = net.sinc.kernels();
        let filtered = Tensor::new(
            vec![f, dims.out_len],
            conv1d(&x, kernels.data(), None, dims),
        )?;
        Ok(Self {
            net,
            filtered,
            plan,
            count: plan.count(wave.len()),
        })
    }

    pub fn windows(&self) -> usize {
        self.count
    }

    /// Scores window `i` (starting at `i · hop`).
    pub fn window(&self, i: usize) -> Result<WindowOutput<T>> {
        if i >= self.count {
            return Err(invalid!("window {i} out of range ({} windows)", self.count));
        }
        let cols = self.plan.window + 1 - self.net.sinc.length();
        let tape = Tape::inference();
        let front = tape.constant(self.filtered.columns(i * self.plan.hop, cols)?);
        let out = self.net.trunk(&tape, vec![front], Mode::Eval)?.0[0];
        Ok(WindowOutput {
            probs: out.logits.softmax()?.value().data().to_vec(),
            feature: out.feature.value().data().to_vec(),
        })
    }

    /// Scores every window, in window order. With `parallel` the windows
    /// are spread over the rayon pool; the returned order and values do
    /// not depend on it.
    pub fn evaluate(&self, parallel: bool) -> Result<Vec<WindowOutput<T>>> {
        if parallel {
            (0..self.count)
                .into_par_iter()
                .map(|i| self.window(i))
                .collect()
        } else {
            (0..self.count).map(|i| self.window(i)).collect()
        }
    }
}

/// Sums one column of values in ascending order, so the result does not
/// depend on the order windows were listed in.
fn sorted_sum<T: Scalar>(mut values: Vec<T>) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}

/// Sum of per-window class probabilities. Exactly invariant to window
/// order.
pub fn aggregate_scores<T: Scalar>(windows: &[WindowOutput<T>]) -> Vec<T> {
    (0..Emotion::COUNT)
        .map(|k| sorted_sum(windows.iter().map(|w| w.probs[k]).collect()))
        .collect()
}

/// Mean of per-window features, also order-invariant.
pub fn mean_feature<T: Scalar>(windows: &[WindowOutput<T>]) -> Vec<T> {
    let Some(first) = windows.first() else {
        return Vec::new();
    };
    let n = T::lit(windows.len() as f64);
    (0..first.feature.len())
        .map(|j| sorted_sum(windows.iter().map(|w| w.feature[j]).collect()) / n)
        .collect()
}

/// Utterance-level scores and feature from one pass over the windows.
#[derive(Clone, Debug, PartialEq)]
pub struct UtteranceSummary<T> {
    pub scores: Vec<T>,
    pub feature: Vec<T>,
    pub windows: usize,
}

impl<T: Scalar> UtteranceSummary<T> {
    pub fn prediction(&self) -> usize {
        Tensor::from_vec(self.scores.clone()).argmax().unwrap_or(0)
    }
}

pub fn summarize_utterance<T: Scalar>(
    net: &AcousticNet<T>,
    wave: &[T],
    plan: ChunkPlan,
    parallel: bool,
) -> Result<UtteranceSummary<T>> {
    let utt = Utterance::new(net, wave, plan)?;
    let windows = utt.evaluate(parallel)?;
    Ok(UtteranceSummary {
        scores: aggregate_scores(&windows),
        feature: mean_feature(&windows),
        windows: windows.len(),
    })
}

/// Class scores: per-window softmax outputs summed over the utterance.
pub fn utterance_predict<T: Scalar>(
    net: &AcousticNet<T>,
    wave: &[T],
    plan: ChunkPlan,
) -> Result<Vec<T>> {
    Ok(summarize_utterance(net, wave, plan, false)?.scores)
}

/// Mean penultimate feature over all windows.
pub fn utterance_feature<T: Scalar>(
    net: &AcousticNet<T>,
    wave: &[T],
    plan: ChunkPlan,
) -> Result<Vec<T>> {
    Ok(summarize_utterance(net, wave, plan, false)?.feature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn tiny_config() -> AcousticConfig {
        AcousticConfig {
            sinc: SincConfig {
                filters: 3,
                length: 11,
                ..SincConfig::default()
            },
            sinc_pool: 2,
            blocks: vec![ConvBlockConfig {
                channels: 2,
                width: 3,
                pool: 2,
            }],
            feature_width: 5,
            window: 64,
            hop: 8,
        }
    }

    #[test]
    fn normalisation_examples() {
        assert_eq!(
            normalize_amplitude(&[0.5f64, -0.25]).unwrap(),
            vec![1.0, -0.5]
        );
        assert_eq!(normalize_amplitude(&[0.0f32; 4]).unwrap(), vec![0.0; 4]);
        let peak1 = [0.2f32, -1.0, 0.7];
        assert_eq!(normalize_amplitude(&peak1).unwrap(), peak1.to_vec());
        assert!(normalize_amplitude::<f32>(&[]).is_err());
    }

    #[test]
    fn window_count_examples() {
        let plan = AcousticConfig::paper().plan();
        assert_eq!(plan.count(16_000), 76);
        assert_eq!(plan.count(4000), 1);
        assert_eq!(plan.count(4159), 1);
        assert_eq!(plan.count(4160), 2);
        assert_eq!(plan.count(10), 1);
    }

    #[test]
    fn training_chunk_policy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let wave: Vec<f32> = (0..100).map(|i| i as f32).collect();
        assert_eq!(sample_training_chunk(&wave, 100, &mut rng), wave);
        let short = sample_training_chunk(&wave[..30], 100, &mut rng);
        assert_eq!(&short[..30], &wave[..30]);
        assert!(short[30..].iter().all(|&v| v == 0.0));
        let a = sample_training_chunk(&wave, 40, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_training_chunk(&wave, 40, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!(a[1] - a[0], 1.0);
    }

    #[test]
    fn preset_shapes() {
        let paper = AcousticConfig::paper();
        assert_eq!(
            paper.stage_shapes().unwrap(),
            vec![(80, 1250), (60, 415), (60, 137)]
        );
        assert_eq!(paper.feature_width, 2048);
        let toy = AcousticConfig::toy();
        assert_eq!(toy.stage_shapes().unwrap(), vec![(16, 1300), (8, 432)]);
        let mut bad = toy;
        bad.window = 50;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn shared_filtering_matches_per_chunk_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = AcousticNet::<f32>::new(tiny_config(), &mut rng).unwrap();
        let wave: Vec<f32> = (0..150).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let plan = net.config().plan();
        let utt = Utterance::new(&net, &wave, plan).unwrap();
        assert_eq!(utt.windows(), (150 - 64) / 8 + 1);
        for (i, start) in plan.starts(wave.len()).enumerate() {
            let shared = utt.window(i).unwrap();
            let tape = Tape::inference();
            let direct = net.forward_eval(&tape, &wave[start..start + 64]).unwrap();
            assert_eq!(shared.feature, direct.feature.value().data());
            assert_eq!(
                shared.probs,
                direct.logits.softmax().unwrap().value().data()
            );
        }
    }

    #[test]
    fn parallel_and_serial_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = AcousticNet::<f32>::new(tiny_config(), &mut rng).unwrap();
        let wave: Vec<f32> = (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let plan = net.config().plan();
        let a = summarize_utterance(&net, &wave, plan, true).unwrap();
        let b = summarize_utterance(&net, &wave, plan, false).unwrap();
        assert_eq!(a, b);
        assert!((a.scores.iter().sum::<f32>() - a.windows as f32).abs() < 1e-4);
    }

    #[test]
    fn single_window_prediction_is_chunk_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = AcousticNet::<f64>::new(tiny_config(), &mut rng).unwrap();
        let wave: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scores = utterance_predict(&net, &wave, net.config().plan()).unwrap();
        let tape = Tape::inference();
        let out = net.forward_eval(&tape, &wave).unwrap();
        assert_eq!(
            Tensor::from_vec(scores).argmax(),
            out.logits.value().argmax()
        );
    }

    #[test]
    fn constant_wave_feature_equals_single_chunk() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = AcousticNet::<f64>::new(tiny_config(), &mut rng).unwrap();
        let wave = vec![0.3; 200];
        let feature = utterance_feature(&net, &wave, net.config().plan()).unwrap();
        let tape = Tape::inference();
        let single = net
            .forward_eval(&tape, &wave[..64])
            .unwrap()
            .feature
            .value();
        for (a, b) in feature.iter().zip(single.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn train_mode_batch_norm_spans_the_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut net = AcousticNet::<f64>::new(tiny_config(), &mut rng).unwrap();
        let chunks: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let tape = Tape::new();
        let (outs, stats) = net.forward_train(&tape, &chunks).unwrap();
        assert_eq!(outs.len(), 3);
        assert_eq!(stats.len(), 1);
        assert_eq!(stats[0].mean.len(), 2);
        let before = net.blocks[0].bn.running_mean.value().clone();
        net.update_running(&stats);
        assert_ne!(&before, net.blocks[0].bn.running_mean.value());
    }

    #[test]
    fn wrong_chunk_length_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = AcousticNet::<f32>::new(tiny_config(), &mut rng).unwrap();
        let tape = Tape::inference();
        assert!(net.forward_eval(&tape, &[0.0; 63]).is_err());
        let mut plan = net.config().plan();
        plan.window = 100;
        assert!(Utterance::new(&net, &[0.0; 10], plan).is_err());
    }
}
