//! Acceptance run: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use sincfuse::acoustic::{aggregate_scores, AcousticNet, ChunkPlan, Utterance};
use sincfuse::autograd::Tape;
use sincfuse::checkpoint::{
    acoustic_checkpoint, fusion_checkpoint, load_acoustic, load_fusion, load_text, save_acoustic,
    save_fusion, save_text, text_checkpoint,
};
use sincfuse::data::{merge_labels, parse_manifest};
use sincfuse::fusion::{FusionConfig, FusionMode, FusionNet, GatedAttention};
use sincfuse::nn::softmax_vec;
use sincfuse::sinc::{dft_magnitude, SincConfig, SincLayer};
use sincfuse::text::cross_attention;
use sincfuse::train::{evaluate_pairs, ConfusionMatrix};
use sincfuse::{Emotion, Tensor};

use common::{ensure, fail, grads, guarded, oracles, pipeline, rng, Check};

fn gradient_suite() -> Check {
    let start = Instant::now();
    let mut worst = (String::new(), 0.0f64);
    for (name, result) in grads::suite() {
        let err = result.map_err(|e| format!("{name}: {e}"))?;
        ensure(err < grads::TOLERANCE, || {
            format!("{name}: relative error {err:.3e}")
        })?;
        if err > worst.1 {
            worst = (name, err);
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || {
        format!("suite took {elapsed:?}")
    })?;
    Ok(format!(
        "all layers < 1e-4 (worst {} {:.2e}) in {:.1}s",
        worst.0,
        worst.1,
        elapsed.as_secs_f64()
    ))
}

fn oracle_equivalence() -> Check {
    let conv = oracles::conv_equivalence(60, 21);
    ensure(conv <= 1e-6, || {
        format!("conv1d differs from the oracle by {conv:.3e}")
    })?;
    let lstm = oracles::lstm_equivalence(22);
    ensure(lstm <= 1e-6, || {
        format!("BiLSTM differs from the oracle by {lstm:.3e}")
    })?;
    Ok(format!(
        "conv1d 60 instances max {conv:.1e}; BiLSTM T<=4 H<=3 max {lstm:.1e}"
    ))
}

fn sinc_properties() -> Check {
    let layer = SincLayer::<f64>::new("sinc", SincConfig::default()).map_err(fail)?;
    let kernels = layer.kernels();
    let l = layer.length();
    let mut checked = 0;
    for (i, (row, (f1, f2))) in kernels.data().chunks(l).zip(layer.cutoffs()).enumerate() {
        ensure(
            (0..l).all(|n| row[n].to_bits() == row[l - 1 - n].to_bits()),
            || format!("kernel {i} is not palindromic"),
        )?;
        ensure(0.0 < f1 && f1 < f2 && f2 <= 8000.0, || {
            format!("filter {i}: band ({f1}, {f2})")
        })?;
        if f2 - f1 >= 100.0 {
            let mid = dft_magnitude(row, (f1 + f2) / 2.0, 16000.0);
            let dc = dft_magnitude(row, 0.0, 16000.0);
            let nyq = dft_magnitude(row, 8000.0, 16000.0);
            ensure(mid >= 5.0 * dc && mid >= 5.0 * nyq, || {
                format!("filter {i}: midpoint {mid:.3e}, DC {dc:.3e}, Nyquist {nyq:.3e}")
            })?;
            checked += 1;
        }
    }
    ensure(layer.filters() == 80, || "expected 80 filters".into())?;
    Ok(format!(
        "80 palindromic kernels, bands in (0, 8000], {checked} wide bands pass 5x"
    ))
}

fn protocol_arithmetic() -> Check {
    let plan = ChunkPlan {
        window: 4000,
        hop: 160,
    };
    ensure(plan.count(16000) == 76, || {
        format!("T=16000 gives {}", plan.count(16000))
    })?;
    let mut r = rng(41);
    for _ in 0..500 {
        let t = r.gen_range(4000..200_000usize);
        ensure(plan.count(t) == (t - 4000) / 160 + 1, || {
            format!("T={t} gives {}", plan.count(t))
        })?;
    }

    let net32 =
        AcousticNet::<f32>::new(grads::tiny_acoustic_config(), &mut rng(42)).map_err(fail)?;
    let net64 =
        AcousticNet::<f64>::new(grads::tiny_acoustic_config(), &mut rng(42)).map_err(fail)?;
    for trial in 0..20 {
        let len = r.gen_range(64..400);
        let wave: Vec<f64> = (0..len).map(|_| r.gen_range(-1.0..1.0)).collect();
        let wave32: Vec<f32> = wave.iter().map(|&v| v as f32).collect();
        let mut w64 = Utterance::new(&net64, &wave, net64.config().plan())
            .and_then(|u| u.evaluate(false))
            .map_err(fail)?;
        let mut w32 = Utterance::new(&net32, &wave32, net32.config().plan())
            .and_then(|u| u.evaluate(false))
            .map_err(fail)?;
        let (a64, a32) = (aggregate_scores(&w64), aggregate_scores(&w32));
        w64.shuffle(&mut r);
        w32.shuffle(&mut r);
        let (b64, b32) = (aggregate_scores(&w64), aggregate_scores(&w32));
        ensure(a64 == b64, || {
            format!("trial {trial}: double scores changed under permutation")
        })?;
        ensure(
            a32.iter().zip(&b32).all(|(x, y)| (x - y).abs() <= 1e-6),
            || format!("trial {trial}: single scores changed under permutation"),
        )?;
    }

    for mode in FusionMode::ALL {
        let config = FusionConfig::paper(mode);
        ensure(config.merged_width() == 6848, || {
            format!("{mode}: width {}", config.merged_width())
        })?;
        let net = FusionNet::<f32>::new(config, &mut rng(43)).map_err(fail)?;
        let tape = Tape::inference();
        let merged = net
            .merge(
                &tape,
                tape.constant(Tensor::full(vec![2048], 0.5)),
                tape.constant(Tensor::full(vec![4800], -0.5)),
            )
            .map_err(fail)?;
        ensure(merged.shape() == [6848], || {
            format!("{mode}: merged shape {:?}", merged.shape())
        })?;
    }
    Ok(
        "76 windows at T=16000, 500 random T, permutation-invariant scores, 6848 in F1/F2/F3"
            .into(),
    )
}

fn attention_normalisation() -> Check {
    let mut r = rng(51);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let steps = r.gen_range(1..=20);
        let width = r.gen_range(1..=12);
        let scale = r.gen_range(0.1..10.0);
        let mut draw =
            |n: usize| -> Vec<f32> { (0..n).map(|_| r.gen_range(-scale..scale)).collect() };
        let tape = Tape::<f32>::inference();
        let a = tape.constant(Tensor::new(vec![steps, width], draw(steps * width)).unwrap());
        let b = tape.constant(Tensor::new(vec![steps, width], draw(steps * width)).unwrap());
        let alpha = cross_attention(a, b).map_err(fail)?.alpha.value();
        worst = worst.max((alpha.data().iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs());
        let logits = draw(steps);
        let s = softmax_vec(&logits);
        worst = worst.max((s.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs());
        let tape_sm = Tape::<f32>::inference();
        let taped = tape_sm
            .constant(Tensor::from_vec(logits))
            .softmax()
            .map_err(fail)?
            .value();
        worst = worst.max((taped.data().iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs());
    }
    ensure(worst <= 1e-6, || {
        format!("sum deviates from 1 by {worst:.3e}")
    })?;

    for width in [1, 7, 64] {
        let gate = GatedAttention::<f32>::new("gate", width, &mut r);
        let tape = Tape::inference();
        let (_, q) = gate
            .forward(&tape, tape.constant(Tensor::zeros(vec![width])))
            .map_err(fail)?;
        ensure(q.value().data().iter().all(|&v| v == 0.0), || {
            format!("width {width}: nonzero output")
        })?;
    }
    Ok(format!(
        "1000 instances, max |sum - 1| = {worst:.1e}; gate(0) = 0 exactly"
    ))
}

fn toy_end_to_end() -> Check {
    let split = pipeline::toy_split(70, 10, 2024).map_err(fail)?;
    ensure(
        (split.train.len(), split.validation.len(), split.test.len()) == (200, 40, 40),
        || "split sizes".into(),
    )?;
    let run = pipeline::run_protocol(&split, 7, None, &FusionMode::ALL).map_err(fail)?;
    let mut parts = vec![
        ("audio".to_string(), run.acoustic_test_wa),
        ("text".to_string(), run.text_test_wa),
    ];
    parts.extend(run.fusion.iter().map(|f| (f.mode.to_string(), f.test_wa)));
    let summary = parts
        .iter()
        .map(|(n, wa)| format!("{n} {:.3}", wa))
        .collect::<Vec<_>>()
        .join(", ");
    for (name, wa) in &parts {
        ensure(*wa >= 0.95, || {
            format!("{name} test accuracy {wa:.3} < 0.95 ({summary})")
        })?;
    }
    ensure(run.elapsed <= Duration::from_secs(600), || {
        format!("took {:?}", run.elapsed)
    })?;
    Ok(format!("{summary} in {:.0}s", run.elapsed.as_secs_f64()))
}

fn metrics_correctness() -> Check {
    let mut r = rng(71);
    for trial in 0..200 {
        let classes = r.gen_range(2..=6);
        let mut pairs = Vec::new();
        for t in 0..classes {
            // Some classes get no records at all.
            let n = if r.gen_bool(0.15) {
                0
            } else {
                r.gen_range(1..40)
            };
            for _ in 0..n {
                pairs.push((t, r.gen_range(0..classes)));
            }
        }
        if pairs.is_empty() {
            pairs.push((0, 0));
        }
        pairs.shuffle(&mut r);
        let report = evaluate_pairs(classes, pairs.iter().copied()).map_err(fail)?;

        let correct = pairs.iter().filter(|(t, p)| t == p).count();
        let wa = correct as f64 / pairs.len() as f64;
        let mut recalls = Vec::new();
        for c in 0..classes {
            let support = pairs.iter().filter(|(t, _)| *t == c).count();
            if support > 0 {
                let hit = pairs.iter().filter(|&&(t, p)| t == c && p == c).count();
                recalls.push(hit as f64 / support as f64);
            }
        }
        let ua = recalls.iter().sum::<f64>() / recalls.len() as f64;
        ensure(report.wa == wa && report.ua == ua, || {
            format!(
                "trial {trial}: got WA {} UA {}, oracle {wa} {ua}",
                report.wa, report.ua
            )
        })?;
    }
    let m = ConfusionMatrix::from_counts(vec![vec![9, 1], vec![2, 2]]).map_err(fail)?;
    let (wa, ua) = (
        m.weighted_accuracy().unwrap(),
        m.unweighted_accuracy().unwrap(),
    );
    ensure(
        (wa - 11.0 / 14.0).abs() < 1e-12 && (ua - 0.7).abs() < 1e-12,
        || format!("[[9,1],[2,2]] gives WA {wa} UA {ua}"),
    )?;
    Ok(format!(
        "200 random matrices match the oracle; [[9,1],[2,2]] WA {wa:.4} UA {ua:.1}"
    ))
}

fn reproducibility() -> Check {
    let split = pipeline::toy_split(20, 5, 99).map_err(fail)?;
    let caps = Some([3, 4, 4]);
    let first = pipeline::run_protocol(&split, 5, caps, &FusionMode::ALL).map_err(fail)?;
    let second = pipeline::run_protocol(&split, 5, caps, &FusionMode::ALL).map_err(fail)?;
    let bits = |l: Vec<Vec<f64>>| -> Vec<Vec<u64>> {
        l.into_iter()
            .map(|v| v.into_iter().map(f64::to_bits).collect())
            .collect()
    };
    ensure(bits(first.losses()) == bits(second.losses()), || {
        "per-epoch losses differ".into()
    })?;
    ensure(
        first.checkpoint_bytes() == second.checkpoint_bytes(),
        || "checkpoints differ".into(),
    )?;

    let dir = tempfile::tempdir().map_err(fail)?;
    let p = |n: &str| dir.path().join(n);
    save_acoustic(&first.acoustic, p("a.ckpt")).map_err(fail)?;
    save_text(&first.text, p("t.ckpt")).map_err(fail)?;
    let a = load_acoustic(p("a.ckpt"), Some(first.acoustic.config())).map_err(fail)?;
    let t = load_text(
        p("t.ckpt"),
        Arc::clone(&split.table),
        Some(first.text.config()),
    )
    .map_err(fail)?;
    ensure(
        acoustic_checkpoint(&a).unwrap().to_bytes().unwrap()
            == acoustic_checkpoint(&first.acoustic)
                .unwrap()
                .to_bytes()
                .unwrap(),
        || "acoustic round trip differs".into(),
    )?;
    ensure(
        text_checkpoint(&t).unwrap().to_bytes().unwrap()
            == text_checkpoint(&first.text).unwrap().to_bytes().unwrap(),
        || "text round trip differs".into(),
    )?;
    for f in &first.fusion {
        save_fusion(&f.net, p("f.ckpt")).map_err(fail)?;
        let back = load_fusion(p("f.ckpt"), Some(f.net.config())).map_err(fail)?;
        ensure(
            fusion_checkpoint(&back).unwrap().to_bytes().unwrap()
                == fusion_checkpoint(&f.net).unwrap().to_bytes().unwrap(),
            || format!("fusion {} round trip differs", f.mode),
        )?;
    }
    let epochs: usize = first.losses().iter().map(Vec::len).sum();
    Ok(format!(
        "{epochs} epoch losses and 5 checkpoints bit-identical; save/load bit-exact"
    ))
}

fn label_fidelity() -> Check {
    ensure(
        merge_labels("excitement").map_err(fail)? == Emotion::Happiness,
        || "excitement does not map to happiness".into(),
    )?;
    // 1636 happiness records: 595 annotated happiness, 1041 excitement.
    let counts = [
        ("anger", 1103),
        ("happiness", 595),
        ("excitement", 1041),
        ("neutral", 1708),
        ("sadness", 1084),
    ];
    let mut text = String::new();
    let mut n = 0;
    for (label, count) in counts {
        for _ in 0..count {
            text.push_str(&format!(
                "{{\"id\":\"utt{n:05}\",\"audio\":\"wav/utt{n:05}.wav\",\"transcript\":\"x\",\"label\":\"{label}\"}}\n"
            ));
            n += 1;
        }
    }
    let records =
        parse_manifest(text.as_bytes(), std::path::Path::new("synthetic.jsonl")).map_err(fail)?;
    let per_class: Vec<usize> = Emotion::ALL
        .iter()
        .map(|&e| records.iter().filter(|r| r.label == e).count())
        .collect();
    ensure(records.len() == 5531, || {
        format!("loaded {} records", records.len())
    })?;
    ensure(per_class == [1103, 1636, 1708, 1084], || {
        format!("class counts {per_class:?}")
    })?;
    Ok("excitement -> happiness; 5531 records with counts [1103, 1636, 1708, 1084]".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("gradient suite", gradient_suite),
        ("oracle equivalence", oracle_equivalence),
        ("sinc properties", sinc_properties),
        ("protocol arithmetic", protocol_arithmetic),
        ("attention normalisation", attention_normalisation),
        ("toy end-to-end", toy_end_to_end),
        ("metrics correctness", metrics_correctness),
        ("reproducibility", reproducibility),
        ("label fidelity", label_fidelity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match guarded(*check) {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {reason}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
