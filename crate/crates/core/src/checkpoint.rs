//! Binary checkpoint format.
//!
//! ```text
//! "SFEC" | version: u32 LE | header_len: u64 LE | header JSON | payload
//! ```
//!
//! The header names the network kind, its architecture config and every
//! tensor with its shape and byte offset into the payload. The payload is
//! the tensors' values as little-endian `f32`, in header order. Batch-norm
//! running statistics are stored like any other tensor.
//!
//! Text checkpoints do not contain the embedding table; the header records
//! its shape so that loading against a different table fails early.

use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::acoustic::{AcousticConfig, AcousticNet};
use crate::artifacts::write_atomic;
use crate::autograd::Module;
use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, FusionNet};
use crate::nn::EmbeddingTable;
use crate::tensor::Tensor;
use crate::text::{TextConfig, TextNet};

pub const MAGIC: &[u8; 4] = b"SFEC";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Acoustic,
    Text,
    Fusion,
}

impl Kind {
    fn as_str(self) -> &'static str {
        match self {
            Kind::Acoustic => "acoustic",
            Kind::Text => "text",
            Kind::Fusion => "fusion",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

impl TensorEntry {
    fn bytes(&self) -> u64 {
        4 * self.shape.iter().product::<usize>() as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingShape {
    pub rows: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub kind: Kind,
    /// `paper`, `toy` or `custom`.
    pub preset: String,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<EmbeddingShape>,
    pub tensors: Vec<TensorEntry>,
}

/// A decoded checkpoint: header plus one tensor per manifest entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub tensors: Vec<Tensor<f32>>,
}

impl Checkpoint {
    fn capture<M: Module<f32>>(
        kind: Kind,
        preset: &str,
        config: serde_json::Value,
        embeddings: Option<EmbeddingShape>,
        model: &M,
    ) -> Self {
        let mut entries = Vec::new();
        let mut tensors = Vec::new();
        let mut offset = 0u64;
        model.visit_params(&mut |p| {
            let entry = TensorEntry {
                name: p.name().to_string(),
                shape: p.value().shape().to_vec(),
                offset,
            };
            offset += entry.bytes();
            entries.push(entry);
            tensors.push(p.value().clone());
        });
        Self {
            header: Header {
                kind,
                preset: preset.to_string(),
                config,
                embeddings,
                tensors: entries,
            },
            tensors,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let payload: usize = self.tensors.iter().map(|t| 4 * t.len()).sum();
        let mut out = Vec::with_capacity(16 + header.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parses and validates a checkpoint. `path` is only used in errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |reason: String| Error::Checkpoint {
            path: path.to_path_buf(),
            reason,
        };
        if bytes.len() < 16 {
            return Err(fail(format!(
                "file is {} bytes, shorter than the 16-byte preamble",
                bytes.len()
            )));
        }
        if &bytes[0..4] != MAGIC {
            return Err(fail(format!(
                "bad magic {:?}, expected \"SFEC\"",
                &bytes[0..4]
            )));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(fail(format!(
                "unsupported version {version}, expected {VERSION}"
            )));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let rest = (bytes.len() - 16) as u64;
        if header_len > rest {
            return Err(fail(format!(
                "header length {header_len} exceeds the {rest} bytes after the preamble"
            )));
        }
        let (header_bytes, payload) = bytes[16..].split_at(header_len as usize);
        let header: Header =
            serde_json::from_slice(header_bytes).map_err(|e| fail(format!("header: {e}")))?;

        let mut expected = 0u64;
        for entry in &header.tensors {
            if entry.offset != expected {
                return Err(fail(format!(
                    "tensor {} at offset {}, expected {expected} (offsets must be contiguous and increasing)",
                    entry.name, entry.offset
                )));
            }
            expected += entry.bytes();
        }
        if payload.len() as u64 != expected {
            return Err(fail(format!(
                "payload is {} bytes, expected {expected} bytes from the tensor manifest",
                payload.len()
            )));
        }

        let tensors = header
            .tensors
            .iter()
            .map(|entry| {
                let start = entry.offset as usize;
                let data = payload[start..start + entry.bytes() as usize]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Tensor::new(entry.shape.clone(), data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { header, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes()?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    fn config<C: DeserializeOwned>(&self, path: &Path) -> Result<C> {
        serde_json::from_value(self.header.config.clone()).map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            reason: format!("{} config: {e}", self.header.kind.as_str()),
        })
    }

    fn expect_kind(&self, kind: Kind, path: &Path) -> Result<()> {
        if self.header.kind != kind {
            return Err(Error::Checkpoint {
                path: path.to_path_buf(),
                reason: format!(
                    "holds a {} network, expected {}",
                    self.header.kind.as_str(),
                    kind.as_str()
                ),
            });
        }
        Ok(())
    }

    /// Copies every stored tensor into the parameter of the same name.
    /// Names and shapes must match one to one.
    fn restore<M: Module<f32>>(&self, model: &mut M, path: &Path) -> Result<()> {
        let fail = |reason: String| Error::Checkpoint {
            path: path.to_path_buf(),
            reason,
        };
        let mut index = 0;
        let mut problem = None;
        model.visit_params_mut(&mut |p| {
            if problem.is_some() {
                return;
            }
            let Some(entry) = self.header.tensors.get(index) else {
                problem = Some(format!("missing tensor {}", p.name()));
                return;
            };
            if entry.name != p.name() || entry.shape != p.value().shape() {
                problem = Some(format!(
                    "tensor {} {:?} does not match parameter {} {:?}",
                    entry.name,
                    entry.shape,
                    p.name(),
                    p.value().shape()
                ));
                return;
            }
            *p.value_mut() = self.tensors[index].clone();
            index += 1;
        });
        if let Some(reason) = problem {
            return Err(fail(reason));
        }
        if index != self.header.tensors.len() {
            return Err(fail(format!(
                "{} tensors stored, the network has {index}",
                self.header.tensors.len()
            )));
        }
        Ok(())
    }
}

fn preset_name<C: PartialEq>(config: &C, paper: &C, toy: &C) -> &'static str {
    if config == paper {
        "paper"
    } else if config == toy {
        "toy"
    } else {
        "custom"
    }
}

fn check_expected<C: PartialEq + Serialize>(
    found: &C,
    expected: Option<&C>,
    path: &Path,
) -> Result<()> {
    match expected {
        Some(e) if e != found => Err(Error::Checkpoint {
            path: path.to_path_buf(),
            reason: format!(
                "architecture mismatch: checkpoint has {}, requested {}",
                serde_json::to_string(found)?,
                serde_json::to_string(e)?
            ),
        }),
        _ => Ok(()),
    }
}

fn init_rng() -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(0)
}

pub fn acoustic_checkpoint(net: &AcousticNet<f32>) -> Result<Checkpoint> {
    let c = net.config();
    Ok(Checkpoint::capture(
        Kind::Acoustic,
        preset_name(c, &AcousticConfig::paper(), &AcousticConfig::toy()),
        serde_json::to_value(c)?,
        None,
        net,
    ))
}

pub fn save_acoustic(net: &AcousticNet<f32>, path: impl AsRef<Path>) -> Result<()> {
    acoustic_checkpoint(net)?.save(path)
}

/// Loads an acoustic network. With `expected`, a checkpoint holding any
/// other architecture is rejected.
pub fn load_acoustic(
    path: impl AsRef<Path>,
    expected: Option<&AcousticConfig>,
) -> Result<AcousticNet<f32>> {
    let path = path.as_ref();
    let ckpt = Checkpoint::read(path)?;
    ckpt.expect_kind(Kind::Acoustic, path)?;
    let config: AcousticConfig = ckpt.config(path)?;
    check_expected(&config, expected, path)?;
    let mut net = AcousticNet::new(config, &mut init_rng())?;
    ckpt.restore(&mut net, path)?;
    Ok(net)
}

pub fn text_checkpoint(net: &TextNet<f32>) -> Result<Checkpoint> {
    let c = net.config();
    let table = &net.embeddings;
    Ok(Checkpoint::capture(
        Kind::Text,
        preset_name(c, &TextConfig::paper(), &TextConfig::toy()),
        serde_json::to_value(c)?,
        Some(EmbeddingShape {
            rows: table.rows(),
            dim: table.dim(),
        }),
        net,
    ))
}

pub fn save_text(net: &TextNet<f32>, path: impl AsRef<Path>) -> Result<()> {
    text_checkpoint(net)?.save(path)
}

/// Loads a text network on top of `embeddings`, which must have the shape
/// recorded at save time.
pub fn load_text(
    path: impl AsRef<Path>,
    embeddings: Arc<EmbeddingTable<f32>>,
    expected: Option<&TextConfig>,
) -> Result<TextNet<f32>> {
    let path = path.as_ref();
    let ckpt = Checkpoint::read(path)?;
    ckpt.expect_kind(Kind::Text, path)?;
    let config: TextConfig = ckpt.config(path)?;
    check_expected(&config, expected, path)?;
    let found = EmbeddingShape {
        rows: embeddings.rows(),
        dim: embeddings.dim(),
    };
    if ckpt.header.embeddings != Some(found) {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            reason: format!(
                "embedding table mismatch: checkpoint expects {:?}, got {found:?}",
                ckpt.header.embeddings
            ),
        });
    }
    let mut net = TextNet::new(config, embeddings, &mut init_rng())?;
    ckpt.restore(&mut net, path)?;
    Ok(net)
}

pub fn fusion_checkpoint(net: &FusionNet<f32>) -> Result<Checkpoint> {
    let c = net.config();
    let preset = if *c == FusionConfig::paper(c.mode) {
        "paper"
    } else {
        "custom"
    };
    Ok(Checkpoint::capture(
        Kind::Fusion,
        preset,
        serde_json::to_value(c)?,
        None,
        net,
    ))
}

pub fn save_fusion(net: &FusionNet<f32>, path: impl AsRef<Path>) -> Result<()> {
    fusion_checkpoint(net)?.save(path)
}

pub fn load_fusion(
    path: impl AsRef<Path>,
    expected: Option<&FusionConfig>,
) -> Result<FusionNet<f32>> {
    let path = path.as_ref();
    let ckpt = Checkpoint::read(path)?;
    ckpt.expect_kind(Kind::Fusion, path)?;
    let config: FusionConfig = ckpt.config(path)?;
    check_expected(&config, expected, path)?;
    let mut net = FusionNet::new(config, &mut init_rng())?;
    ckpt.restore(&mut net, path)?;
    Ok(net)
}
