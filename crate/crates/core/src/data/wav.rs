use std::path::Path;

use crate::artifacts::write_atomic;
use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

const PCM: u16 = 1;

/// Reads a RIFF/WAVE file. Only mono PCM16 at 16 kHz is accepted; anything
/// else is rejected naming the offending property. Samples are
/// `int16 / 32768`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(u32, Vec<f32>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes).map_err(|reason| Error::Wav {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn decode_wav(bytes: &[u8]) -> std::result::Result<(u32, Vec<f32>), String> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err("not a RIFF/WAVE file".into());
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let u32_at =
        |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    let mut pos = 12;
    let mut format = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                format!(
                    "chunk {:?} runs past the end of the file",
                    String::from_utf8_lossy(id)
                )
            })?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(format!("fmt chunk is {size} bytes, expected at least 16"));
                }
                let (tag, channels, rate, bits) = (
                    u16_at(body),
                    u16_at(body + 2),
                    u32_at(body + 4),
                    u16_at(body + 14),
                );
                if tag != PCM {
                    return Err(format!("format tag {tag} is not PCM (1)"));
                }
                if bits != 16 {
                    return Err(format!("bits per sample {bits}, expected 16"));
                }
                if channels != 1 {
                    return Err(format!("channels={channels}, expected mono"));
                }
                if rate != SAMPLE_RATE {
                    return Err(format!("fs={rate}, expected {SAMPLE_RATE}"));
                }
                format = Some(rate);
            }
            b"data" => {
                let rate = format.ok_or("data chunk before fmt chunk")?;
                if !size.is_multiple_of(2) {
                    return Err(format!(
                        "data chunk of {size} bytes is not whole 16-bit samples"
                    ));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0)
                    .collect();
                return Ok((rate, samples));
            }
            _ => {}
        }
        pos = end + (size & 1);
    }
    Err("no data chunk".into())
}

/// Mono PCM16 encoding; samples are clamped to the representable range.
pub fn encode_wav(samples: &[f32], sample_rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let q = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, samples: &[f32], sample_rate: u32) -> Result<()> {
    write_atomic(path.as_ref(), &encode_wav(samples, sample_rate))
}
