//! Corpus handling: WAV files, transcripts, word vectors, labels, folds,
//! the JSON-lines manifest and a synthetic stand-in corpus.

mod embeddings;
mod folds;
mod labels;
mod manifest;
mod tokenize;
mod toy;
mod wav;

pub use embeddings::{load_embeddings, parse_embeddings, write_embeddings};
pub use folds::{split_folds, stratified_holdout, FoldSplit, Holdout, FOLDS};
pub use labels::merge_labels;
pub use manifest::{load_manifest, parse_manifest, write_manifest, ManifestLine, UtteranceRecord};
pub use tokenize::{normalize_words, tokenize_and_pad, MAX_TOKENS};
pub use toy::{generate_toy_corpus, ToyCorpus, ToyCorpusSpec};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav, SAMPLE_RATE};

use rayon::prelude::*;

use crate::acoustic::normalize_amplitude;
use crate::error::Result;
use crate::nn::EmbeddingTable;
use crate::Emotion;

/// A record with its audio decoded and its transcript tokenized.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub id: String,
    pub label: Emotion,
    /// Peak-normalized samples.
    pub wave: Vec<f32>,
    pub tokens: Vec<usize>,
}

/// Loads audio and tokenizes transcripts. Records are independent, so
/// with `parallel` they are read on the rayon pool; output order always
/// follows `records`.
pub fn prepare(
    records: &[UtteranceRecord],
    table: &EmbeddingTable<f32>,
    max_len: usize,
    parallel: bool,
) -> Result<Vec<Prepared>> {
    let one = |r: &UtteranceRecord| -> Result<Prepared> {
        let (_, samples) = read_wav(&r.audio)?;
        Ok(Prepared {
            id: r.id.clone(),
            label: r.label,
            wave: normalize_amplitude(&samples)?,
            tokens: tokenize_and_pad(&r.transcript, table, max_len),
        })
    };
    if parallel {
        records.par_iter().map(one).collect()
    } else {
        records.iter().map(one).collect()
    }
}
