//! Toy corpus setup and the three-stage protocol.

use std::sync::Arc;
use std::time::{Duration, Instant};

use sincfuse::acoustic::{AcousticConfig, AcousticNet};
use sincfuse::checkpoint::{acoustic_checkpoint, fusion_checkpoint, text_checkpoint};
use sincfuse::data::{
    generate_toy_corpus, load_embeddings, prepare, stratified_holdout, Prepared, ToyCorpusSpec,
};
use sincfuse::fusion::{FusionConfig, FusionMode, FusionNet};
use sincfuse::nn::EmbeddingTable;
use sincfuse::text::{TextConfig, TextNet};
use sincfuse::train::{
    evaluate_acoustic, evaluate_fusion, evaluate_text, extract_features, train_acoustic,
    train_fusion, train_text, FitReport, TrainOptions,
};
use sincfuse::{Emotion, Result};

pub struct ToySplit {
    pub table: Arc<EmbeddingTable<f32>>,
    pub train: Vec<Prepared>,
    pub validation: Vec<Prepared>,
    pub test: Vec<Prepared>,
    _dir: tempfile::TempDir,
}

/// Generates `per_class` utterances per class and splits them with
/// `held` validation and `held` test records per class.
pub fn toy_split(per_class: usize, held: usize, seed: u64) -> Result<ToySplit> {
    let dir = tempfile::tempdir().expect("tempdir");
    let spec = ToyCorpusSpec {
        per_class,
        seed,
        ..ToyCorpusSpec::default()
    };
    let corpus = generate_toy_corpus(&spec, dir.path())?;
    let table = load_embeddings(&corpus.embeddings)?;
    let records = prepare(&corpus.records, &table, TextConfig::toy().max_len, false)?;
    let labels: Vec<Emotion> = records.iter().map(|r| r.label).collect();
    let h = stratified_holdout(&labels, held, held, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    Ok(ToySplit {
        table: Arc::new(table),
        train: pick(&h.train),
        validation: pick(&h.validation),
        test: pick(&h.test),
        _dir: dir,
    })
}

pub fn labels(records: &[Prepared]) -> Vec<Emotion> {
    records.iter().map(|r| r.label).collect()
}

pub fn toy_fusion(mode: FusionMode) -> FusionConfig {
    FusionConfig {
        mode,
        acoustic_width: AcousticConfig::toy().feature_width,
        text_width: TextConfig::toy().feature_width,
        hidden: 32,
    }
}

pub struct FusionRun {
    pub mode: FusionMode,
    pub net: FusionNet<f32>,
    pub fit: FitReport,
    pub test_wa: f64,
}

pub struct ProtocolRun {
    pub acoustic: AcousticNet<f32>,
    pub acoustic_fit: FitReport,
    pub acoustic_test_wa: f64,
    pub text: TextNet<f32>,
    pub text_fit: FitReport,
    pub text_test_wa: f64,
    pub fusion: Vec<FusionRun>,
    pub elapsed: Duration,
}

impl ProtocolRun {
    /// Serialized checkpoints of every trained network, in a fixed order.
    pub fn checkpoint_bytes(&self) -> Vec<Vec<u8>> {
        let mut out = vec![
            acoustic_checkpoint(&self.acoustic)
                .unwrap()
                .to_bytes()
                .unwrap(),
            text_checkpoint(&self.text).unwrap().to_bytes().unwrap(),
        ];
        for f in &self.fusion {
            out.push(fusion_checkpoint(&f.net).unwrap().to_bytes().unwrap());
        }
        out
    }

    pub fn losses(&self) -> Vec<Vec<f64>> {
        let mut out = vec![self.acoustic_fit.losses(), self.text_fit.losses()];
        out.extend(self.fusion.iter().map(|f| f.fit.losses()));
        out
    }
}

/// Stages 1 to 3 with toy presets; `caps` optionally overrides the epoch
/// cap of each stage.
pub fn run_protocol(
    split: &ToySplit,
    seed: u64,
    caps: Option<[usize; 3]>,
    modes: &[FusionMode],
) -> Result<ProtocolRun> {
    let start = Instant::now();
    let opts = |stage: usize| {
        let mut o = TrainOptions::toy();
        o.seed = seed;
        o.single_thread = true;
        if let Some(c) = caps {
            o.max_epochs = c[stage];
        }
        o
    };
    let (acoustic, acoustic_fit) = train_acoustic(
        AcousticConfig::toy(),
        &split.train,
        &split.validation,
        &opts(0),
    )?;
    let acoustic_test_wa = evaluate_acoustic(&acoustic, &split.test, false)?.wa;
    let (text, text_fit) = train_text(
        TextConfig::toy(),
        split.table.clone(),
        &split.train,
        &split.validation,
        &opts(1),
    )?;
    let text_test_wa = evaluate_text(&text, &split.test, false)?.wa;

    let train_f = extract_features(&acoustic, &text, &split.train, false)?;
    let val_f = extract_features(&acoustic, &text, &split.validation, false)?;
    let test_f = extract_features(&acoustic, &text, &split.test, false)?;
    let mut fusion = Vec::new();
    for &mode in modes {
        let (net, fit) = train_fusion(
            toy_fusion(mode),
            &train_f,
            &labels(&split.train),
            &val_f,
            &labels(&split.validation),
            &opts(2),
        )?;
        let test_wa = evaluate_fusion(&net, &test_f, &labels(&split.test))?.wa;
        fusion.push(FusionRun {
            mode,
            net,
            fit,
            test_wa,
        });
    }
    Ok(ProtocolRun {
        acoustic,
        acoustic_fit,
        acoustic_test_wa,
        text,
        text_fit,
        text_test_wa,
        fusion,
        elapsed: start.elapsed(),
    })
}
