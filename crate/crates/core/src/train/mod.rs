//! Optimisation, the staged training protocol and evaluation.
//!
//! Stage 1 trains the acoustic network on random chunks, stage 2 the text
//! network, and stage 3 the fusion network on features from the two
//! frozen encoders. Every stage uses Adam, mini-batches and mean
//! cross-entropy, with early stopping on validation WA.

mod adam;
mod metrics;

pub use adam::{Adam, AdamConfig};
pub use metrics::{evaluate_pairs, ConfusionMatrix, EvalReport};

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acoustic::{
    sample_training_chunk, summarize_utterance, AcousticConfig, AcousticNet, UtteranceSummary,
};
use crate::autograd::{Module, Param, Tape, Var};
use crate::data::Prepared;
use crate::error::{invalid, Error, Result};
use crate::fusion::{FusionConfig, FusionNet};
use crate::nn::{cross_entropy, EmbeddingTable};
use crate::tensor::Tensor;
use crate::text::{classify_logits, TextConfig, TextNet};
use crate::Emotion;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Disables the rayon pool for evaluation and feature extraction.
    pub single_thread: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            single_thread: false,
        }
    }
}

impl TrainOptions {
    /// Defaults with the toy epoch cap.
    pub fn toy() -> Self {
        Self {
            max_epochs: 30,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(invalid!("batch size and epoch cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training loss over the applied steps.
    pub loss: f64,
    pub val_wa: f64,
    /// Steps aborted because of a non-finite loss or gradient.
    pub skipped_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_wa: f64,
}

impl FitReport {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }
}

/// Shared epoch loop. `step` runs forward, backward and the optimizer on
/// one batch and returns the batch loss; `validate` returns validation WA.
/// The model that scored best on validation is restored at the end.
fn fit<M, S, V>(
    model: &mut M,
    n_train: usize,
    opts: &TrainOptions,
    mut step: S,
    validate: V,
) -> Result<FitReport>
where
    M: Module<f32> + Clone,
    S: FnMut(&mut M, &mut Adam<f32>, &[usize], &mut ChaCha8Rng) -> Result<f64>,
    V: Fn(&M) -> Result<f64>,
{
    opts.validate()?;
    if n_train == 0 {
        return Err(invalid!("no training records"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut adam = Adam::new(opts.adam);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut report = FitReport {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_wa: f64::NEG_INFINITY,
    };
    let mut best = model.clone();
    let mut waiting = 0;
    for epoch in 1..=opts.max_epochs {
        order.shuffle(&mut rng);
        let (mut total, mut applied, mut skipped) = (0.0, 0usize, 0usize);
        for batch in order.chunks(opts.batch_size) {
            match step(model, &mut adam, batch, &mut rng) {
                Ok(loss) => {
                    total += loss * batch.len() as f64;
                    applied += batch.len();
                }
                Err(e @ Error::NonFinite { .. }) => {
                    log::warn!("epoch {epoch}: step skipped: {e}");
                    skipped += 1;
                }
                Err(e) => return Err(e),
            }
        }
        let val_wa = validate(model)?;
        let loss = if applied > 0 {
            total / applied as f64
        } else {
            f64::NAN
        };
        log::info!("epoch {epoch}: loss {loss:.5} val WA {val_wa:.4}");
        report.epochs.push(EpochLog {
            epoch,
            loss,
            val_wa,
            skipped_steps: skipped,
        });
        if val_wa > report.best_val_wa {
            report.best_val_wa = val_wa;
            report.best_epoch = epoch;
            best = model.clone();
            waiting = 0;
        } else {
            waiting += 1;
            if waiting >= opts.patience {
                break;
            }
        }
    }
    *model = best;
    Ok(report)
}

/// Mean cross-entropy over a batch of logit vectors.
fn mean_loss<'t>(
    logits: &[Var<'t, f32>],
    labels: impl Iterator<Item = usize>,
) -> Result<Var<'t, f32>> {
    let mut total: Option<Var<'t, f32>> = None;
    for (z, y) in logits.iter().zip(labels) {
        let l = cross_entropy(*z, y)?;
        total = Some(match total {
            Some(t) => t.add(l)?,
            None => l,
        });
    }
    let total = total.ok_or(Error::EmptyTensor { op: "mean_loss" })?;
    Ok(total.scale(1.0 / logits.len() as f64))
}

/// Checks the loss and moves its gradients into the model. The caller
/// drops the tape before the optimizer step so parameter storage is no
/// longer shared when Adam writes it.
fn backprop<M: Module<f32> + ?Sized>(
    model: &mut M,
    tape: &Tape<f32>,
    loss: Var<'_, f32>,
) -> Result<f64> {
    let value = loss.value().item().unwrap_or(f32::NAN) as f64;
    if !value.is_finite() {
        return Err(Error::NonFinite {
            what: "training loss".into(),
            detail: format!("{value}"),
        });
    }
    model.zero_grad();
    tape.backward(loss)?;
    model.collect_grads(tape);
    Ok(value)
}

fn par_map<I: Sync, O: Send>(
    items: &[I],
    parallel: bool,
    f: impl Fn(&I) -> Result<O> + Sync + Send,
) -> Result<Vec<O>> {
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

// --- acoustic --------------------------------------------------------------

pub fn acoustic_summaries(
    net: &AcousticNet<f32>,
    records: &[Prepared],
    parallel: bool,
) -> Result<Vec<UtteranceSummary<f32>>> {
    let plan = net.config().plan();
    par_map(records, parallel, |r| {
        summarize_utterance(net, &r.wave, plan, false)
    })
}

pub fn evaluate_acoustic(
    net: &AcousticNet<f32>,
    records: &[Prepared],
    parallel: bool,
) -> Result<EvalReport> {
    let s = acoustic_summaries(net, records, parallel)?;
    evaluate_pairs(
        Emotion::COUNT,
        records
            .iter()
            .zip(&s)
            .map(|(r, s)| (r.label.index(), s.prediction())),
    )
}

/// Stage 1. Each step draws one random window per record.
pub fn train_acoustic(
    config: AcousticConfig,
    train: &[Prepared],
    val: &[Prepared],
    opts: &TrainOptions,
) -> Result<(AcousticNet<f32>, FitReport)> {
    let mut init = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xA11D);
    let mut net = AcousticNet::new(config, &mut init)?;
    let window = net.config().window;
    let parallel = !opts.single_thread;
    let report = fit(
        &mut net,
        train.len(),
        opts,
        |net, adam, batch, rng| {
            let chunks: Vec<Vec<f32>> = batch
                .iter()
                .map(|&i| sample_training_chunk(&train[i].wave, window, rng))
                .collect();
            let (value, stats) = {
                let tape = Tape::new();
                let (outs, stats) = net.forward_train(&tape, &chunks)?;
                let logits: Vec<_> = outs.iter().map(|o| o.logits).collect();
                let loss = mean_loss(&logits, batch.iter().map(|&i| train[i].label.index()))?;
                (backprop(net, &tape, loss)?, stats)
            };
            adam.step(net)?;
            net.update_running(&stats);
            Ok(value)
        },
        |net| Ok(evaluate_acoustic(net, val, parallel)?.wa),
    )?;
    Ok((net, report))
}

// --- text ------------------------------------------------------------------

pub fn evaluate_text(
    net: &TextNet<f32>,
    records: &[Prepared],
    parallel: bool,
) -> Result<EvalReport> {
    let logits = par_map(records, parallel, |r| net.logits_of(&r.tokens))?;
    evaluate_pairs(
        Emotion::COUNT,
        records
            .iter()
            .zip(&logits)
            .map(|(r, z)| (r.label.index(), classify_logits(z))),
    )
}

/// Stage 2.
pub fn train_text(
    config: TextConfig,
    embeddings: Arc<EmbeddingTable<f32>>,
    train: &[Prepared],
    val: &[Prepared],
    opts: &TrainOptions,
) -> Result<(TextNet<f32>, FitReport)> {
    let mut init = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x7E87);
    let mut net = TextNet::new(config, embeddings, &mut init)?;
    let parallel = !opts.single_thread;
    let report = fit(
        &mut net,
        train.len(),
        opts,
        |net, adam, batch, rng| {
            let value = {
                let tape = Tape::new();
                let mut logits = Vec::with_capacity(batch.len());
                for &i in batch {
                    logits.push(
                        net.forward(&tape, &train[i].tokens, Some(&mut *rng as &mut dyn RngCore))?
                            .logits,
                    );
                }
                let loss = mean_loss(&logits, batch.iter().map(|&i| train[i].label.index()))?;
                backprop(net, &tape, loss)?
            };
            adam.step(net)?;
            Ok(value)
        },
        |net| Ok(evaluate_text(net, val, parallel)?.wa),
    )?;
    Ok((net, report))
}

// --- fusion ----------------------------------------------------------------

/// Frozen-encoder features of one utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    pub acoustic: Vec<f32>,
    pub text: Vec<f32>,
}

pub fn extract_features(
    acoustic: &AcousticNet<f32>,
    text: &TextNet<f32>,
    records: &[Prepared],
    parallel: bool,
) -> Result<Vec<Features>> {
    let plan = acoustic.config().plan();
    par_map(records, parallel, |r| {
        Ok(Features {
            acoustic: summarize_utterance(acoustic, &r.wave, plan, false)?.feature,
            text: text.feature_of(&r.tokens)?,
        })
    })
}

pub fn evaluate_fusion(
    net: &FusionNet<f32>,
    features: &[Features],
    labels: &[Emotion],
) -> Result<EvalReport> {
    let preds = features
        .iter()
        .map(|f| Ok(classify_logits(&net.logits_of(&f.acoustic, &f.text)?)))
        .collect::<Result<Vec<_>>>()?;
    evaluate_pairs(Emotion::COUNT, labels.iter().map(|l| l.index()).zip(preds))
}

/// Stage 3 on precomputed features; the encoders are not touched.
pub fn train_fusion(
    config: FusionConfig,
    train: &[Features],
    train_labels: &[Emotion],
    val: &[Features],
    val_labels: &[Emotion],
    opts: &TrainOptions,
) -> Result<(FusionNet<f32>, FitReport)> {
    if train.len() != train_labels.len() || val.len() != val_labels.len() {
        return Err(invalid!("feature and label counts differ"));
    }
    let mut init = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xF05E);
    let mut net = FusionNet::new(config, &mut init)?;
    let report = fit(
        &mut net,
        train.len(),
        opts,
        |net, adam, batch, _| {
            let value = {
                let tape = Tape::new();
                let mut logits = Vec::with_capacity(batch.len());
                for &i in batch {
                    let a = tape.constant(Tensor::from_vec(train[i].acoustic.clone()));
                    let t = tape.constant(Tensor::from_vec(train[i].text.clone()));
                    logits.push(net.forward(&tape, a, t)?.logits);
                }
                let loss = mean_loss(&logits, batch.iter().map(|&i| train_labels[i].index()))?;
                backprop(net, &tape, loss)?
            };
            adam.step(net)?;
            Ok(value)
        },
        |net| Ok(evaluate_fusion(net, val, val_labels)?.wa),
    )?;
    Ok((net, report))
}

/// All three networks updated together.
#[derive(Clone, Debug)]
pub struct JointModel {
    pub acoustic: AcousticNet<f32>,
    pub text: TextNet<f32>,
    pub fusion: FusionNet<f32>,
}

impl Module<f32> for JointModel {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param<f32>)) {
        self.acoustic.visit_params(f);
        self.text.visit_params(f);
        self.fusion.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<f32>)) {
        self.acoustic.visit_params_mut(f);
        self.text.visit_params_mut(f);
        self.fusion.visit_params_mut(f);
    }
}

/// Stage 3 with fine-tuning: fusion and both encoders train together.
/// The acoustic feature of a training record comes from one random window
/// (as in stage 1); validation uses full utterance features.
pub fn train_fusion_joint(
    config: FusionConfig,
    acoustic: AcousticNet<f32>,
    text: TextNet<f32>,
    train: &[Prepared],
    val: &[Prepared],
    opts: &TrainOptions,
) -> Result<(JointModel, FitReport)> {
    let mut init = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xF05E);
    let mut model = JointModel {
        fusion: FusionNet::new(config, &mut init)?,
        acoustic,
        text,
    };
    let window = model.acoustic.config().window;
    let parallel = !opts.single_thread;
    let val_labels: Vec<Emotion> = val.iter().map(|r| r.label).collect();
    let report = fit(
        &mut model,
        train.len(),
        opts,
        |m, adam, batch, rng| {
            let chunks: Vec<Vec<f32>> = batch
                .iter()
                .map(|&i| sample_training_chunk(&train[i].wave, window, rng))
                .collect();
            let (value, stats) = {
                let tape = Tape::new();
                let (outs, stats) = m.acoustic.forward_train(&tape, &chunks)?;
                let mut logits = Vec::with_capacity(batch.len());
                for (&i, a) in batch.iter().zip(&outs) {
                    let t = m.text.forward(
                        &tape,
                        &train[i].tokens,
                        Some(&mut *rng as &mut dyn RngCore),
                    )?;
                    logits.push(m.fusion.forward(&tape, a.feature, t.feature)?.logits);
                }
                let loss = mean_loss(&logits, batch.iter().map(|&i| train[i].label.index()))?;
                (backprop(m, &tape, loss)?, stats)
            };
            adam.step(m)?;
            m.acoustic.update_running(&stats);
            Ok(value)
        },
        |m| {
            let feats = extract_features(&m.acoustic, &m.text, val, parallel)?;
            Ok(evaluate_fusion(&m.fusion, &feats, &val_labels)?.wa)
        },
    )?;
    Ok((model, report))
}

/// Order-sensitive checksum of every parameter value.
pub fn param_checksum<M: Module<f32> + ?Sized>(model: &M) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    model.visit_params(&mut |p| {
        for v in p.value().data() {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100_0000_01b3);
            }
        }
    });
    h
}
