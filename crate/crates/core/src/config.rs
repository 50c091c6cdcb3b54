//! Run configuration: a flat JSON object whose keys mirror the CLI flags.
//! Missing keys take their defaults; unknown keys are an error.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acoustic::AcousticConfig;
use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, FusionMode};
use crate::text::TextConfig;
use crate::train::{AdamConfig, TrainOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Paper,
    Toy,
}

/// How records are divided into train, validation and test sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    /// Ten folds: fold `k` tests, fold `k + 1` validates.
    Folds,
    /// Class-balanced holdout of `holdout_val` / `holdout_test` records per
    /// class.
    Holdout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub preset: Preset,
    pub seed: u64,
    pub lr: f64,
    pub batch_size: usize,
    /// Epoch caps per stage; `None` uses the preset's cap.
    pub audio_epochs: Option<usize>,
    pub text_epochs: Option<usize>,
    pub fusion_epochs: Option<usize>,
    pub patience: usize,
    pub fusion_mode: FusionMode,
    /// Train the encoders together with the fusion network in stage 3.
    pub fine_tune: bool,
    pub manifest: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out: PathBuf,
    pub single_thread: bool,
    pub split: Split,
    pub fold: usize,
    pub all_folds: bool,
    pub holdout_val: usize,
    pub holdout_test: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let opts = TrainOptions::default();
        Self {
            preset: Preset::Paper,
            seed: 0,
            lr: opts.adam.lr,
            batch_size: opts.batch_size,
            audio_epochs: None,
            text_epochs: None,
            fusion_epochs: None,
            patience: opts.patience,
            fusion_mode: FusionMode::F3,
            fine_tune: false,
            manifest: None,
            embeddings: None,
            out: PathBuf::from("runs"),
            single_thread: false,
            split: Split::Folds,
            fold: 0,
            all_folds: false,
            holdout_val: 10,
            holdout_test: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Audio,
    Text,
    Fusion,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.fold >= crate::data::FOLDS {
            return Err(Error::Config(format!(
                "fold {} out of range 0..{}",
                self.fold,
                crate::data::FOLDS
            )));
        }
        if self.all_folds && self.split == Split::Holdout {
            return Err(Error::Config("all_folds needs split = \"folds\"".into()));
        }
        for (key, epochs) in [
            ("audio_epochs", self.audio_epochs),
            ("text_epochs", self.text_epochs),
            ("fusion_epochs", self.fusion_epochs),
        ] {
            if epochs == Some(0) {
                return Err(Error::Config(format!("{key} must be positive")));
            }
        }
        Ok(())
    }

    pub fn acoustic(&self) -> AcousticConfig {
        match self.preset {
            Preset::Paper => AcousticConfig::paper(),
            Preset::Toy => AcousticConfig::toy(),
        }
    }

    pub fn text(&self) -> TextConfig {
        match self.preset {
            Preset::Paper => TextConfig::paper(),
            Preset::Toy => TextConfig::toy(),
        }
    }

    pub fn fusion(&self) -> FusionConfig {
        match self.preset {
            Preset::Paper => FusionConfig::paper(self.fusion_mode),
            Preset::Toy => FusionConfig {
                mode: self.fusion_mode,
                acoustic_width: self.acoustic().feature_width,
                text_width: self.text().feature_width,
                hidden: 32,
            },
        }
    }

    pub fn train_options(&self, stage: Stage) -> TrainOptions {
        let base = match self.preset {
            Preset::Paper => TrainOptions::default(),
            Preset::Toy => TrainOptions::toy(),
        };
        let cap = match stage {
            Stage::Audio => self.audio_epochs,
            Stage::Text => self.text_epochs,
            Stage::Fusion => self.fusion_epochs,
        };
        TrainOptions {
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            batch_size: self.batch_size,
            max_epochs: cap.unwrap_or(base.max_epochs),
            patience: self.patience,
            seed: self.seed,
            single_thread: self.single_thread,
        }
    }

    /// Folds this run covers.
    pub fn folds(&self) -> Vec<usize> {
        if self.all_folds {
            (0..crate::data::FOLDS).collect()
        } else {
            vec![self.fold]
        }
    }

    /// Output directory of one fold: `out` itself for single-fold runs,
    /// `out/fold{k}` with `all_folds`.
    pub fn run_dir(&self, fold: usize) -> PathBuf {
        if self.all_folds {
            self.out.join(format!("fold{fold}"))
        } else {
            self.out.clone()
        }
    }
}
