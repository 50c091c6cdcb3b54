use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::artifacts::write_atomic;
use crate::error::{Error, Result};
use crate::nn::{EmbeddingTable, EMBEDDING_DIM};

/// Loads a whitespace-separated word-vector file (`word v1 ... v300` per
/// line). Blank lines are skipped. Duplicate words keep their first
/// vector and are reported through the log.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable<f32>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(BufReader::new(file), path, EMBEDDING_DIM)
}

pub fn parse_embeddings(
    reader: impl BufRead,
    path: &Path,
    dim: usize,
) -> Result<EmbeddingTable<f32>> {
    let err = |line: usize, reason: String| Error::Embedding {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values = fields
            .map(|f| {
                f.parse::<f32>()
                    .map_err(|_| err(n, format!("{f:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != dim {
            return Err(err(
                n,
                format!("{} values for {word:?}, expected {dim}", values.len()),
            ));
        }
        entries.push((word.to_string(), values));
    }
    let table = EmbeddingTable::from_entries(dim, entries)?;
    if table.duplicates() > 0 {
        log::warn!(
            "{}: {} duplicate words ignored (first occurrence kept)",
            path.display(),
            table.duplicates()
        );
    }
    Ok(table)
}

/// Writes entries in the format read by [`load_embeddings`].
pub fn write_embeddings<'a>(
    path: impl AsRef<Path>,
    entries: impl IntoIterator<Item = (&'a str, &'a [f32])>,
) -> Result<()> {
    let mut out = Vec::new();
    for (word, vector) in entries {
        write!(out, "{word}").expect("writing to memory");
        for v in vector {
            write!(out, " {v:.6}").expect("writing to memory");
        }
        out.push(b'\n');
    }
    write_atomic(path.as_ref(), &out)
}
