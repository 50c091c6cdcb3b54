//! The `sincfuse` command line.
//!
//! Every subcommand takes `--config FILE` (a flat JSON [`RunConfig`]) and
//! flags that override individual keys. Usage errors exit with status 2,
//! data and configuration errors with status 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::acoustic::{summarize_utterance, AcousticNet};
use crate::artifacts::{filters_csv, write_atomic, write_evaluation, write_json};
use crate::checkpoint::{
    load_acoustic, load_fusion, load_text, save_acoustic, save_fusion, save_text,
};
use crate::config::{Preset, RunConfig, Split, Stage};
use crate::data::{
    generate_toy_corpus, load_embeddings, load_manifest, prepare, split_folds, stratified_holdout,
    Prepared, ToyCorpusSpec,
};
use crate::error::{Error, Result};
use crate::fusion::{FusionMode, FusionNet};
use crate::nn::{softmax_vec, EmbeddingTable, EMBEDDING_DIM};
use crate::text::{classify_logits, TextNet};
use crate::train::{
    evaluate_acoustic, evaluate_fusion, evaluate_text, extract_features, train_acoustic,
    train_fusion, train_fusion_joint, train_text, ConfusionMatrix, EvalReport, FitReport,
};
use crate::Emotion;

#[derive(Debug, Parser)]
#[command(
    name = "sincfuse",
    version,
    about = "Emotion classification from raw speech and transcripts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic four-class corpus (WAVs, manifest, embeddings).
    GenToy {
        #[command(flatten)]
        common: Common,
        /// Utterances per class.
        #[arg(long, default_value_t = 50)]
        per_class: usize,
    },
    /// Stage 1: train the acoustic network.
    TrainAudio(Common),
    /// Stage 2: train the text network.
    TrainText(Common),
    /// Stage 3: train the fusion network on the stage 1 and 2 encoders.
    TrainFusion(Common),
    /// Score a trained model on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Model::Fusion)]
        model: Model,
    },
    /// Print one JSON line per manifest record: {id, label, scores}.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Model::Fusion)]
        model: Model,
    },
    /// Write the sinc filters' cutoffs and magnitude responses as CSV.
    InspectFilters {
        #[command(flatten)]
        common: Common,
        /// Acoustic checkpoint; defaults to `<out>/acoustic.ckpt`. Without
        /// one, the untrained mel-initialised bank of the preset is used.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Audio,
    Text,
    Fusion,
}

/// Flags shared by every subcommand. Each overrides the config key of the
/// same name.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub single_thread: bool,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub audio_epochs: Option<usize>,
    #[arg(long)]
    pub text_epochs: Option<usize>,
    #[arg(long)]
    pub fusion_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// F1, F2 or F3.
    #[arg(long)]
    pub fusion_mode: Option<FusionMode>,
    #[arg(long)]
    pub fine_tune: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub split: Option<Split>,
    #[arg(long)]
    pub fold: Option<usize>,
    #[arg(long)]
    pub all_folds: bool,
}

impl Common {
    /// The config file (or defaults) with flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        set!(
            seed,
            preset,
            lr,
            batch_size,
            patience,
            fusion_mode,
            out,
            split,
            fold
        );
        if self.manifest.is_some() {
            c.manifest = self.manifest.clone();
        }
        if self.embeddings.is_some() {
            c.embeddings = self.embeddings.clone();
        }
        if self.audio_epochs.is_some() {
            c.audio_epochs = self.audio_epochs;
        }
        if self.text_epochs.is_some() {
            c.text_epochs = self.text_epochs;
        }
        if self.fusion_epochs.is_some() {
            c.fusion_epochs = self.fusion_epochs;
        }
        c.single_thread |= self.single_thread;
        c.fine_tune |= self.fine_tune;
        c.all_folds |= self.all_folds;
        c.validate()?;
        Ok(c)
    }
}

/// Parses `std::env::args`, runs the command and maps errors to exit
/// codes.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::GenToy { common, .. }
        | Command::Evaluate { common, .. }
        | Command::Predict { common, .. }
        | Command::InspectFilters { common, .. } => common,
        Command::TrainAudio(c) | Command::TrainText(c) | Command::TrainFusion(c) => c,
    };
    let cfg = common.resolve()?;
    if cfg.single_thread {
        // Ignore the error if a pool already exists (repeated calls in one
        // process); every parallel path also checks the flag itself.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global();
    }
    match cli.command {
        Command::GenToy { per_class, .. } => gen_toy(&cfg, per_class),
        Command::TrainAudio(_) => each_fold(&cfg, Model::Audio, train_audio_fold),
        Command::TrainText(_) => each_fold(&cfg, Model::Text, train_text_fold),
        Command::TrainFusion(_) => each_fold(&cfg, Model::Fusion, train_fusion_fold),
        Command::Evaluate { model, .. } => evaluate(&cfg, model),
        Command::Predict { model, .. } => predict(&cfg, model),
        Command::InspectFilters { checkpoint, .. } => inspect_filters(&cfg, checkpoint),
    }
}

fn gen_toy(cfg: &RunConfig, per_class: usize) -> Result<()> {
    let spec = ToyCorpusSpec {
        per_class,
        seed: cfg.seed,
        ..ToyCorpusSpec::default()
    };
    let corpus = generate_toy_corpus(&spec, &cfg.out)?;
    log::info!(
        "wrote {} utterances, {} and {}",
        corpus.records.len(),
        corpus.manifest.display(),
        corpus.embeddings.display()
    );
    Ok(())
}

// --- data ------------------------------------------------------------------

struct Corpus {
    records: Vec<Prepared>,
    table: Arc<EmbeddingTable<f32>>,
}

fn load_corpus(cfg: &RunConfig, need_text: bool) -> Result<Corpus> {
    let manifest = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| Error::Config("no manifest given (--manifest or \"manifest\")".into()))?;
    let table = match (&cfg.embeddings, need_text) {
        (Some(path), _) => load_embeddings(path)?,
        (None, false) => EmbeddingTable::from_entries(EMBEDDING_DIM, std::iter::empty())?,
        (None, true) => {
            return Err(Error::Config(
                "no embeddings given (--embeddings or \"embeddings\")".into(),
            ));
        }
    };
    let records = load_manifest(manifest)?;
    let prepared = prepare(&records, &table, cfg.text().max_len, !cfg.single_thread)?;
    log::info!(
        "loaded {} records from {}",
        prepared.len(),
        manifest.display()
    );
    Ok(Corpus {
        records: prepared,
        table: Arc::new(table),
    })
}

struct Sets {
    train: Vec<Prepared>,
    validation: Vec<Prepared>,
    test: Vec<Prepared>,
}

fn split_for(cfg: &RunConfig, records: &[Prepared], fold: usize) -> Result<Sets> {
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    let (train, validation, test) = match cfg.split {
        Split::Folds => {
            let ids: Vec<usize> = (0..records.len()).collect();
            let s = split_folds(&ids, cfg.seed)?.swap_remove(fold);
            (pick(&s.train), pick(&s.validation), pick(&s.test))
        }
        Split::Holdout => {
            let labels: Vec<Emotion> = records.iter().map(|r| r.label).collect();
            let h = stratified_holdout(&labels, cfg.holdout_val, cfg.holdout_test, cfg.seed)?;
            (pick(&h.train), pick(&h.validation), pick(&h.test))
        }
    };
    Ok(Sets {
        train,
        validation,
        test,
    })
}

fn each_fold(
    cfg: &RunConfig,
    model: Model,
    f: fn(&RunConfig, &Corpus, usize) -> Result<()>,
) -> Result<()> {
    let corpus = load_corpus(cfg, model != Model::Audio)?;
    for fold in cfg.folds() {
        std::fs::create_dir_all(cfg.run_dir(fold)).map_err(|e| Error::io(cfg.run_dir(fold), e))?;
        f(cfg, &corpus, fold)?;
    }
    Ok(())
}

// --- checkpoint paths ------------------------------------------------------

fn acoustic_path(cfg: &RunConfig, fold: usize) -> PathBuf {
    cfg.run_dir(fold).join("acoustic.ckpt")
}

fn text_path(cfg: &RunConfig, fold: usize) -> PathBuf {
    cfg.run_dir(fold).join("text.ckpt")
}

/// Fusion checkpoints are per mode. Fine-tuned runs also store their own
/// copies of the encoders next to the fusion checkpoint.
fn fusion_paths(cfg: &RunConfig, fold: usize) -> (PathBuf, PathBuf, PathBuf) {
    let dir = cfg.run_dir(fold);
    let mode = cfg.fusion_mode;
    if cfg.fine_tune {
        (
            dir.join(format!("fusion_{mode}_ft.ckpt")),
            dir.join(format!("acoustic_{mode}_ft.ckpt")),
            dir.join(format!("text_{mode}_ft.ckpt")),
        )
    } else {
        (
            dir.join(format!("fusion_{mode}.ckpt")),
            acoustic_path(cfg, fold),
            text_path(cfg, fold),
        )
    }
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "missing {what} checkpoint {}; run the earlier training stage first",
            path.display()
        )))
    }
}

fn load_encoders(
    cfg: &RunConfig,
    corpus: &Corpus,
    acoustic: &Path,
    text: &Path,
) -> Result<(AcousticNet<f32>, TextNet<f32>)> {
    require(acoustic, "acoustic")?;
    require(text, "text")?;
    Ok((
        load_acoustic(acoustic, Some(&cfg.acoustic()))?,
        load_text(text, corpus.table.clone(), Some(&cfg.text()))?,
    ))
}

fn log_fit(name: &str, fit: &FitReport) {
    log::info!(
        "{name}: {} epochs, best validation WA {:.4} at epoch {}",
        fit.epochs.len(),
        fit.best_val_wa,
        fit.best_epoch
    );
}

// --- training --------------------------------------------------------------

fn train_audio_fold(cfg: &RunConfig, corpus: &Corpus, fold: usize) -> Result<()> {
    let sets = split_for(cfg, &corpus.records, fold)?;
    let (net, fit) = train_acoustic(
        cfg.acoustic(),
        &sets.train,
        &sets.validation,
        &cfg.train_options(Stage::Audio),
    )?;
    log_fit("acoustic", &fit);
    save_acoustic(&net, acoustic_path(cfg, fold))?;
    write_json(&cfg.run_dir(fold).join("acoustic_fit.json"), &fit)
}

fn train_text_fold(cfg: &RunConfig, corpus: &Corpus, fold: usize) -> Result<()> {
    let sets = split_for(cfg, &corpus.records, fold)?;
    let (net, fit) = train_text(
        cfg.text(),
        corpus.table.clone(),
        &sets.train,
        &sets.validation,
        &cfg.train_options(Stage::Text),
    )?;
    log_fit("text", &fit);
    save_text(&net, text_path(cfg, fold))?;
    write_json(&cfg.run_dir(fold).join("text_fit.json"), &fit)
}

fn train_fusion_fold(cfg: &RunConfig, corpus: &Corpus, fold: usize) -> Result<()> {
    let sets = split_for(cfg, &corpus.records, fold)?;
    let (acoustic, text) = load_encoders(
        cfg,
        corpus,
        &acoustic_path(cfg, fold),
        &text_path(cfg, fold),
    )?;
    let opts = cfg.train_options(Stage::Fusion);
    let (fusion_out, acoustic_out, text_out) = fusion_paths(cfg, fold);
    let fit = if cfg.fine_tune {
        let (joint, fit) = train_fusion_joint(
            cfg.fusion(),
            acoustic,
            text,
            &sets.train,
            &sets.validation,
            &opts,
        )?;
        save_acoustic(&joint.acoustic, &acoustic_out)?;
        save_text(&joint.text, &text_out)?;
        save_fusion(&joint.fusion, &fusion_out)?;
        fit
    } else {
        let parallel = !cfg.single_thread;
        let train_feats = extract_features(&acoustic, &text, &sets.train, parallel)?;
        let val_feats = extract_features(&acoustic, &text, &sets.validation, parallel)?;
        let labels = |s: &[Prepared]| s.iter().map(|r| r.label).collect::<Vec<_>>();
        let (net, fit) = train_fusion(
            cfg.fusion(),
            &train_feats,
            &labels(&sets.train),
            &val_feats,
            &labels(&sets.validation),
            &opts,
        )?;
        save_fusion(&net, &fusion_out)?;
        fit
    };
    log_fit(&format!("fusion {}", cfg.fusion_mode), &fit);
    let name = fusion_out
        .file_stem()
        .unwrap_or_default()
        .to_string_lossy()
        .into_owned();
    write_json(&cfg.run_dir(fold).join(format!("{name}_fit.json")), &fit)
}

// --- evaluation and prediction ---------------------------------------------

/// A loaded model of any of the three kinds.
enum Loaded {
    Audio(AcousticNet<f32>),
    Text(TextNet<f32>),
    Fusion(AcousticNet<f32>, TextNet<f32>, FusionNet<f32>),
}

impl Loaded {
    fn load(cfg: &RunConfig, corpus: &Corpus, model: Model, fold: usize) -> Result<Self> {
        Ok(match model {
            Model::Audio => {
                let path = acoustic_path(cfg, fold);
                require(&path, "acoustic")?;
                Loaded::Audio(load_acoustic(&path, Some(&cfg.acoustic()))?)
            }
            Model::Text => {
                let path = text_path(cfg, fold);
                require(&path, "text")?;
                Loaded::Text(load_text(&path, corpus.table.clone(), Some(&cfg.text()))?)
            }
            Model::Fusion => {
                let (fusion, acoustic, text) = fusion_paths(cfg, fold);
                let (a, t) = load_encoders(cfg, corpus, &acoustic, &text)?;
                require(&fusion, "fusion")?;
                Loaded::Fusion(a, t, load_fusion(&fusion, Some(&cfg.fusion()))?)
            }
        })
    }

    fn evaluate(&self, records: &[Prepared], parallel: bool) -> Result<EvalReport> {
        match self {
            Loaded::Audio(net) => evaluate_acoustic(net, records, parallel),
            Loaded::Text(net) => evaluate_text(net, records, parallel),
            Loaded::Fusion(a, t, f) => {
                let feats = extract_features(a, t, records, parallel)?;
                let labels: Vec<Emotion> = records.iter().map(|r| r.label).collect();
                evaluate_fusion(f, &feats, &labels)
            }
        }
    }

    /// Class scores of one record: mean window probability for audio,
    /// softmax probabilities otherwise.
    fn scores(&self, record: &Prepared) -> Result<Vec<f32>> {
        match self {
            Loaded::Audio(net) => {
                let s = summarize_utterance(net, &record.wave, net.config().plan(), false)?;
                let n = s.windows as f32;
                Ok(s.scores.iter().map(|v| v / n).collect())
            }
            Loaded::Text(net) => Ok(softmax_vec(&net.logits_of(&record.tokens)?)),
            Loaded::Fusion(a, t, f) => {
                let acoustic =
                    summarize_utterance(a, &record.wave, a.config().plan(), false)?.feature;
                let text = t.feature_of(&record.tokens)?;
                Ok(softmax_vec(&f.logits_of(&acoustic, &text)?))
            }
        }
    }
}

fn model_name(cfg: &RunConfig, model: Model) -> String {
    match model {
        Model::Audio => "acoustic".into(),
        Model::Text => "text".into(),
        Model::Fusion if cfg.fine_tune => format!("fusion_{}_ft", cfg.fusion_mode),
        Model::Fusion => format!("fusion_{}", cfg.fusion_mode),
    }
}

fn evaluate(cfg: &RunConfig, model: Model) -> Result<()> {
    let corpus = load_corpus(cfg, model != Model::Audio)?;
    let name = model_name(cfg, model);
    let mut total = ConfusionMatrix::new(Emotion::COUNT);
    for fold in cfg.folds() {
        let sets = split_for(cfg, &corpus.records, fold)?;
        let loaded = Loaded::load(cfg, &corpus, model, fold)?;
        let report = loaded.evaluate(&sets.test, !cfg.single_thread)?;
        log::info!(
            "fold {fold} {name}: WA {:.4} UA {:.4} (n = {})",
            report.wa,
            report.ua,
            report.n
        );
        write_evaluation(&cfg.run_dir(fold).join("eval").join(&name), &report)?;
        for (t, row) in report.confusion.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    total.record(t, p)?;
                }
            }
        }
    }
    if cfg.all_folds {
        let report = EvalReport::from_confusion(&total)?;
        log::info!(
            "all folds {name}: WA {:.4} UA {:.4} (n = {})",
            report.wa,
            report.ua,
            report.n
        );
        write_evaluation(&cfg.out.join("eval").join(&name), &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Prediction<'a> {
    id: &'a str,
    label: &'static str,
    scores: Vec<f32>,
}

fn predict(cfg: &RunConfig, model: Model) -> Result<()> {
    use std::io::Write;
    let corpus = load_corpus(cfg, model != Model::Audio)?;
    let loaded = Loaded::load(cfg, &corpus, model, cfg.fold)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for record in &corpus.records {
        let scores = loaded.scores(record)?;
        let label = Emotion::ALL[classify_logits(&scores)].as_str();
        let line = serde_json::to_string(&Prediction {
            id: &record.id,
            label,
            scores,
        })?;
        writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

fn inspect_filters(cfg: &RunConfig, checkpoint: Option<PathBuf>) -> Result<()> {
    let path = checkpoint.unwrap_or_else(|| acoustic_path(cfg, cfg.fold));
    let net = if path.exists() {
        load_acoustic(&path, None)?
    } else {
        log::info!(
            "{} not found; using the untrained {} bank",
            path.display(),
            format!("{:?}", cfg.preset).to_lowercase()
        );
        AcousticNet::new(cfg.acoustic(), &mut ChaCha8Rng::seed_from_u64(cfg.seed))?
    };
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let target = cfg.out.join("filters.csv");
    write_atomic(&target, filters_csv(&net.sinc).as_bytes())?;
    log::info!(
        "wrote {} ({} filters)",
        target.display(),
        net.sinc.filters()
    );
    Ok(())
}
