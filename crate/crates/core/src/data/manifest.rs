use std::collections::HashSet;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::labels::merge_labels;
use crate::artifacts::write_atomic;
use crate::error::{Error, Result};
use crate::Emotion;

/// One manifest line as stored on disk. `audio` is relative to the
/// manifest's directory unless absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestLine {
    pub id: String,
    pub audio: String,
    pub transcript: String,
    pub label: String,
}

/// A corpus entry. Audio stays on disk until it is read.
#[derive(Clone, Debug, PartialEq)]
pub struct UtteranceRecord {
    pub id: String,
    pub audio: PathBuf,
    pub transcript: String,
    pub label: Emotion,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(std::io::BufReader::new(file), path)
}

/// Parses JSON lines, merging labels and rejecting duplicate ids. Blank
/// lines are skipped.
pub fn parse_manifest(reader: impl BufRead, path: &Path) -> Result<Vec<UtteranceRecord>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let err = |line: usize, reason: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestLine = serde_json::from_str(&line).map_err(|e| err(n, e.to_string()))?;
        let label = merge_labels(&entry.label).map_err(|e| err(n, e.to_string()))?;
        if !seen.insert(entry.id.clone()) {
            return Err(err(n, format!("duplicate id {:?}", entry.id)));
        }
        records.push(UtteranceRecord {
            audio: base.join(&entry.audio),
            id: entry.id,
            transcript: entry.transcript,
            label,
        });
    }
    Ok(records)
}

pub fn write_manifest(path: impl AsRef<Path>, lines: &[ManifestLine]) -> Result<()> {
    let mut out = Vec::new();
    for l in lines {
        serde_json::to_writer(&mut out, l)?;
        out.push(b'\n');
    }
    write_atomic(path.as_ref(), &out)
}
