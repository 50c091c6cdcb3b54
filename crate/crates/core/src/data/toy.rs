use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embeddings::write_embeddings;
use super::manifest::{write_manifest, ManifestLine, UtteranceRecord};
use super::wav::{write_wav, SAMPLE_RATE};
use crate::acoustic::normalize_amplitude;
use crate::error::{invalid, Error, Result};
use crate::nn::EMBEDDING_DIM;
use crate::Emotion;

const FILLER: [&str; 24] = [
    "the", "a", "we", "they", "said", "went", "to", "store", "today", "and", "then", "it", "was",
    "about", "time", "that", "you", "know", "here", "there", "again", "just", "really", "maybe",
];

/// Parameters of the synthetic corpus. Class `k` is a tone at `tones[k]`
/// Hz with uniform noise, and a transcript containing `keywords[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyCorpusSpec {
    pub tones: [f64; 4],
    pub keywords: [String; 4],
    pub duration_s: f64,
    pub noise: f64,
    pub per_class: usize,
    pub seed: u64,
}

impl Default for ToyCorpusSpec {
    fn default() -> Self {
        Self {
            tones: [440.0, 880.0, 1320.0, 1760.0],
            keywords: ["furious", "delighted", "okay", "gloomy"].map(String::from),
            duration_s: 1.0,
            noise: 0.3,
            per_class: 50,
            seed: 0,
        }
    }
}

/// Paths and records of a generated corpus.
#[derive(Clone, Debug)]
pub struct ToyCorpus {
    pub manifest: PathBuf,
    pub embeddings: PathBuf,
    pub records: Vec<UtteranceRecord>,
}

/// Writes `wav/*.wav`, `manifest.jsonl` and `embeddings.txt` under `out`.
///
/// The embeddings file holds random 300-d vectors for every word the
/// transcripts use. Records are interleaved by class. Output is a pure
/// function of the spec.
pub fn generate_toy_corpus(spec: &ToyCorpusSpec, out: impl AsRef<Path>) -> Result<ToyCorpus> {
    if spec.duration_s <= 0.0 || spec.per_class == 0 || spec.noise < 0.0 {
        return Err(invalid!(
            "toy corpus needs positive duration and count and non-negative noise"
        ));
    }
    let out = out.as_ref();
    let wav_dir = out.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let samples = (spec.duration_s * SAMPLE_RATE as f64).round() as usize;
    let mut lines = Vec::with_capacity(4 * spec.per_class);
    for i in 0..spec.per_class {
        for class in Emotion::ALL {
            let k = class.index();
            let id = format!("toy_{}_{i:04}", class.as_str());
            let phase = rng.gen_range(0.0..2.0 * PI);
            let w = 2.0 * PI * spec.tones[k] / SAMPLE_RATE as f64;
            let wave: Vec<f32> = (0..samples)
                .map(|n| {
                    let noise = if spec.noise > 0.0 {
                        rng.gen_range(-spec.noise..=spec.noise)
                    } else {
                        0.0
                    };
                    ((w * n as f64 + phase).sin() + noise) as f32
                })
                .collect();
            let audio = format!("wav/{id}.wav");
            write_wav(out.join(&audio), &normalize_amplitude(&wave)?, SAMPLE_RATE)?;
            let mut words: Vec<&str> = (0..rng.gen_range(3..8))
                .map(|_| *FILLER.choose(&mut rng).expect("non-empty"))
                .collect();
            let at = rng.gen_range(0..=words.len());
            words.insert(at, &spec.keywords[k]);
            lines.push(ManifestLine {
                id,
                audio,
                transcript: words.join(" "),
                label: class.as_str().to_string(),
            });
        }
    }
    let manifest = out.join("manifest.jsonl");
    write_manifest(&manifest, &lines)?;

    let mut vocab: Vec<&str> = FILLER.to_vec();
    vocab.extend(spec.keywords.iter().map(String::as_str));
    let vectors: Vec<Vec<f32>> = vocab
        .iter()
        .map(|_| {
            (0..EMBEDDING_DIM)
                .map(|_| rng.gen_range(-1.0f32..1.0))
                .collect()
        })
        .collect();
    let embeddings = out.join("embeddings.txt");
    write_embeddings(
        &embeddings,
        vocab.iter().copied().zip(vectors.iter().map(Vec::as_slice)),
    )?;

    let records = super::load_manifest(&manifest)?;
    Ok(ToyCorpus {
        manifest,
        embeddings,
        records,
    })
}
