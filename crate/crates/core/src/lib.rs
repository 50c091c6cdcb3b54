//! Multimodal emotion classification from raw speech and transcripts.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`] and [`autograd`]: dense tensors and a reverse-mode tape,
//!   with [`gradcheck`] as a finite-difference oracle.
//! - [`nn`]: dense, 1-D convolution, batch norm, BiLSTM, embedding lookup
//!   and cross-entropy.
//! - [`sinc`]: the learnable band-pass sinc filterbank.
//! - [`acoustic`], [`text`], [`fusion`]: the three networks.
//! - [`data`]: WAV, manifest, tokenizer, embeddings, folds and the
//!   synthetic toy corpus.
//! - [`train`]: Adam, the staged training protocol and WA/UA metrics.
//! - [`checkpoint`], [`config`], [`artifacts`], [`cli`]: files and the
//!   command surface.
//!
//! See the crate's `examples/` directory for one runnable program per
//! capability.

pub mod acoustic;
pub mod artifacts;
pub mod autograd;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod fusion;
pub mod gradcheck;
pub mod nn;
pub mod sinc;
pub mod tensor;
pub mod text;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};

/// The four emotion classes, in class-index order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Emotion {
    Anger,
    Happiness,
    Neutral,
    Sadness,
}

impl Emotion {
    pub const ALL: [Emotion; 4] = [
        Emotion::Anger,
        Emotion::Happiness,
        Emotion::Neutral,
        Emotion::Sadness,
    ];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Emotion> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Happiness => "happiness",
            Emotion::Neutral => "neutral",
            Emotion::Sadness => "sadness",
        }
    }
}

impl std::fmt::Display for Emotion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
