//! Central-difference checks for every layer type, in double precision.

use std::sync::Arc;

use sincfuse::acoustic::{AcousticConfig, AcousticNet, ConvBlockConfig};
use sincfuse::autograd::{Module, Padding, Tape};
use sincfuse::fusion::{FusionConfig, FusionMode, FusionNet, GatedAttention};
use sincfuse::gradcheck::{check_module, grad_check};
use sincfuse::nn::{cross_entropy, BatchNorm1d, BiLstm, Conv1dLayer, Dense, EmbeddingTable};
use sincfuse::sinc::{SincConfig, SincLayer};
use sincfuse::text::{cross_attention, TextConfig, TextNet};
use sincfuse::Result;

use super::{projection, random_tensor, rng};

pub const TOLERANCE: f64 = 1e-4;
// Near the cube root of f64 epsilon, where truncation and round-off balance.
const STEP: f64 = 1e-5;
const COORDS: usize = 24;

/// Worst of a parameter check and an input check.
fn both(params: f64, input: f64) -> f64 {
    params.max(input)
}

pub fn dense() -> Result<f64> {
    let mut r = rng(1);
    let mut layer = Dense::<f64>::new("dense", 5, 4, &mut r);
    let x = random_tensor(&[5], &mut r);
    let p = check_module(
        &mut layer,
        |m, tape| projection(tape, m.forward(tape, tape.constant(x.clone()))?, 11),
        STEP,
        COORDS,
        &mut r,
    )?;
    let i = grad_check(
        |tape, x| projection(tape, layer.forward(tape, x)?, 11),
        &x,
        STEP,
    )?;
    Ok(both(p.max_error(), i))
}

pub fn conv1d(padding: Padding, width: usize) -> Result<f64> {
    let mut r = rng(2 + width as u64);
    let mut layer = Conv1dLayer::<f64>::new("conv", 3, 2, width, padding, &mut r);
    let x = random_tensor(&[3, 9], &mut r);
    let p = check_module(
        &mut layer,
        |m, tape| projection(tape, m.forward(tape, tape.constant(x.clone()))?, 12),
        STEP,
        COORDS,
        &mut r,
    )?;
    let i = grad_check(
        |tape, x| projection(tape, layer.forward(tape, x)?, 12),
        &x,
        STEP,
    )?;
    Ok(both(p.max_error(), i))
}

pub fn batchnorm() -> Result<f64> {
    let mut r = rng(3);
    let mut layer = BatchNorm1d::<f64>::new("bn", 3);
    layer.visit_params_mut(&mut |p| {
        if p.trainable() {
            *p.value_mut() = random_tensor(p.value().shape(), &mut rng(33));
        }
    });
    let x = random_tensor(&[3, 6], &mut r);
    let p = check_module(
        &mut layer,
        |m, tape| projection(tape, m.forward_train(tape, tape.constant(x.clone()))?.0, 13),
        STEP,
        COORDS,
        &mut r,
    )?;
    let i = grad_check(
        |tape, x| projection(tape, layer.forward_train(tape, x)?.0, 13),
        &x,
        STEP,
    )?;
    Ok(both(p.max_error(), i))
}

pub fn lstm() -> Result<f64> {
    let mut r = rng(4);
    let mut layer = BiLstm::<f64>::new("lstm", 3, 3, &mut r);
    let x = random_tensor(&[4, 3], &mut r);
    let p = check_module(
        &mut layer,
        |m, tape| projection(tape, m.forward(tape, tape.constant(x.clone()))?, 14),
        STEP,
        COORDS,
        &mut r,
    )?;
    let i = grad_check(
        |tape, x| projection(tape, layer.forward(tape, x)?, 14),
        &x,
        STEP,
    )?;
    Ok(both(p.max_error(), i))
}

/// Row gather from an embedding matrix, including zero rows for padding.
pub fn embedding() -> Result<f64> {
    let table = random_tensor(&[6, 4], &mut rng(5));
    let rows = [Some(2), None, Some(5), Some(2), Some(0)];
    grad_check(
        |tape, t| projection(tape, t.gather_rows(&rows)?, 15),
        &table,
        STEP,
    )
}

pub fn sinc() -> Result<f64> {
    let config = SincConfig {
        filters: 4,
        length: 31,
        ..SincConfig::default()
    };
    let mut layer = SincLayer::<f64>::from_params(
        "sinc",
        config,
        &[100.0, 400.0, 900.0, 2000.0],
        &[150.0, 300.0, 500.0, 800.0],
    )?;
    let mut r = rng(6);
    let chunk = random_tensor(&[64], &mut r);
    // Cutoffs are in Hz, so a wider step keeps round-off small.
    let p = check_module(
        &mut layer,
        |m, tape| projection(tape, m.forward(tape, tape.constant(chunk.clone()))?, 16),
        1e-4,
        COORDS,
        &mut r,
    )?;
    let i = grad_check(
        |tape, x| projection(tape, layer.forward(tape, x)?, 16),
        &chunk,
        STEP,
    )?;
    Ok(both(p.max_error(), i))
}

pub fn attention() -> Result<f64> {
    let both_inputs = random_tensor(&[10, 4], &mut rng(7));
    grad_check(
        |tape, x| {
            let s = cross_attention(x.slice(0, 0, 5)?, x.slice(0, 5, 5)?)?;
            projection(tape, s.context, 17)?.add(projection(tape, s.alpha, 18)?)
        },
        &both_inputs,
        STEP,
    )
}

pub fn gated_attention() -> Result<f64> {
    let mut r = rng(8);
    let mut gate = GatedAttention::<f64>::new("gate", 6, &mut r);
    let c = random_tensor(&[6], &mut r);
    let p = check_module(
        &mut gate,
        |m, tape| {
            let (beta, q) = m.forward(tape, tape.constant(c.clone()))?;
            projection(tape, q, 19)?.add(projection(tape, beta, 20)?)
        },
        STEP,
        COORDS,
        &mut r,
    )?;
    let i = grad_check(
        |tape, x| projection(tape, gate.forward(tape, x)?.1, 19),
        &c,
        STEP,
    )?;
    Ok(both(p.max_error(), i))
}

pub fn cross_entropy_loss() -> Result<f64> {
    let logits = random_tensor(&[4], &mut rng(9)).map(|v| 3.0 * v);
    grad_check(|_, z| cross_entropy(z, 2), &logits, STEP)
}

pub fn tiny_acoustic_config() -> AcousticConfig {
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

/// The whole acoustic network in training mode on a batch of two chunks.
pub fn acoustic_net() -> Result<f64> {
    let mut r = rng(10);
    let config = tiny_acoustic_config();
    let mut net = AcousticNet::<f64>::new(config.clone(), &mut r)?;
    // Mel initialisation puts the first band on the f_min floor, where
    // |theta_low| has a kink; central differences are meaningless there.
    net.sinc = SincLayer::from_params(
        "acoustic.sinc",
        config.sinc,
        &[120.0, 900.0, 3000.0],
        &[700.0, 1900.0, 4000.0],
    )?;
    let chunks: Vec<Vec<f64>> = (0..2)
        .map(|_| random_tensor(&[64], &mut r).into_data())
        .collect();
    let loss = |m: &AcousticNet<f64>, tape: &Tape<f64>| -> Result<f64> {
        let (outs, _) = m.forward_train(tape, &chunks)?;
        let l = cross_entropy(outs[0].logits, 1)?.add(cross_entropy(outs[1].logits, 3)?)?;
        tape.backward(l)?;
        Ok(l.value().data()[0])
    };
    // Batch norm cancels the conv bias exactly, so its gradient must vanish;
    // a relative error against round-off noise says nothing, so it is held
    // to an absolute bound instead.
    net.zero_grad();
    {
        let tape = Tape::new();
        loss(&net, &tape)?;
        net.collect_grads(&tape);
    }
    let mut bias_grad = 0.0f64;
    net.visit_params(&mut |p| {
        if is_bn_fed_bias(p.name()) {
            bias_grad = p
                .grad()
                .data()
                .iter()
                .fold(bias_grad, |m, g| m.max(g.abs()));
        }
    });
    if bias_grad > 1e-10 {
        return Ok(f64::INFINITY);
    }
    let p = check_module(
        &mut net,
        |m, tape| {
            let (outs, _) = m.forward_train(tape, &chunks)?;
            cross_entropy(outs[0].logits, 1)?.add(cross_entropy(outs[1].logits, 3)?)
        },
        // Cutoffs are in Hz, so a wider step keeps round-off small.
        1e-4,
        8,
        &mut r,
    )?;
    Ok(p.per_param
        .iter()
        .filter(|(name, _)| !is_bn_fed_bias(name))
        .map(|(_, e)| *e)
        .fold(0.0, f64::max))
}

fn is_bn_fed_bias(name: &str) -> bool {
    name.starts_with("acoustic.block") && name.ends_with(".conv.bias")
}

pub fn tiny_text_config() -> TextConfig {
    TextConfig {
        max_len: 6,
        hidden: 2,
        widths: vec![1, 3],
        filters: 2,
        dense_width: 5,
        feature_width: 4,
        dropout: 0.0,
        include_right_pooled: true,
    }
}

pub fn tiny_table(dim: usize, words: usize, seed: u64) -> EmbeddingTable<f64> {
    let mut r = rng(seed);
    EmbeddingTable::from_entries(
        dim,
        (0..words).map(|i| (format!("w{i}"), random_tensor(&[dim], &mut r).into_data())),
    )
    .unwrap()
}

/// The whole text network, embedding lookup through classifier.
pub fn text_net() -> Result<f64> {
    let mut r = rng(11);
    let table = Arc::new(tiny_table(5, 6, 111));
    let mut net = TextNet::<f64>::new(tiny_text_config(), table, &mut r)?;
    let tokens = [2, 5, 7, 0, 3, 0];
    let p = check_module(
        &mut net,
        |m, tape| cross_entropy(m.forward(tape, &tokens, None)?.logits, 2),
        // Some right-branch weights have gradients near 1e-9, where the
        // base step is dominated by round-off.
        1e-4,
        8,
        &mut r,
    )?;
    Ok(p.max_error())
}

pub fn fusion_net(mode: FusionMode) -> Result<f64> {
    let mut r = rng(12);
    let config = FusionConfig {
        mode,
        acoustic_width: 4,
        text_width: 3,
        hidden: 5,
    };
    let mut net = FusionNet::<f64>::new(config, &mut r)?;
    let a = random_tensor(&[4], &mut r);
    let t = random_tensor(&[3], &mut r);
    let p = check_module(
        &mut net,
        |m, tape| {
            let out = m.forward(tape, tape.constant(a.clone()), tape.constant(t.clone()))?;
            cross_entropy(out.logits, 0)
        },
        STEP,
        COORDS,
        &mut r,
    )?;
    Ok(p.max_error())
}

/// Every check with its name.
pub fn suite() -> Vec<(String, Result<f64>)> {
    let mut out: Vec<(String, Result<f64>)> = vec![
        ("dense".into(), dense()),
        ("conv1d valid w3".into(), conv1d(Padding::Valid, 3)),
        ("conv1d same w4".into(), conv1d(Padding::Same, 4)),
        ("conv1d same w5".into(), conv1d(Padding::Same, 5)),
        ("batchnorm".into(), batchnorm()),
        ("lstm".into(), lstm()),
        ("embedding".into(), embedding()),
        ("sinc".into(), sinc()),
        ("cross-attention".into(), attention()),
        ("gated attention".into(), gated_attention()),
        ("cross-entropy".into(), cross_entropy_loss()),
        ("acoustic net".into(), acoustic_net()),
        ("text net".into(), text_net()),
    ];
    for mode in FusionMode::ALL {
        out.push((format!("fusion {mode}"), fusion_net(mode)));
    }
    out
}
