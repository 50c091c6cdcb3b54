use std::collections::HashMap;

use crate::autograd::{Tape, Var};
use crate::error::{invalid, Result};
use crate::tensor::{Scalar, Tensor};

pub const EMBEDDING_DIM: usize = 300;
/// Token index used for padding; its row is always zero.
pub const PAD_INDEX: usize = 0;
/// Token index for out-of-vocabulary words; also a zero row.
pub const OOV_INDEX: usize = 1;

/// Frozen word-vector table. Rows 0 and 1 are the pad and OOV rows.
#[derive(Clone, Debug)]
pub struct EmbeddingTable<T: Scalar> {
    vocab: HashMap<String, usize>,
    matrix: Tensor<T>,
    duplicates: usize,
}

impl<T: Scalar> EmbeddingTable<T> {
    /// Builds a table from `(word, vector)` entries. The first occurrence
    /// of a duplicated word wins; later ones are counted in
    /// [`EmbeddingTable::duplicates`].
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<T>)>,
    {
        let mut vocab = HashMap::new();
        let mut data = vec![T::zero(); 2 * dim];
        let mut duplicates = 0;
        for (word, vector) in entries {
            if vector.len() != dim {
                return Err(invalid!(
                    "embedding for {word:?} has {} values, expected {dim}",
                    vector.len()
                ));
            }
            if vocab.contains_key(&word) {
                duplicates += 1;
                continue;
            }
            vocab.insert(word, data.len() / dim);
            data.extend(vector);
        }
        let rows = data.len() / dim;
        Ok(Self {
            vocab,
            matrix: Tensor::new(vec![rows, dim], data)?,
            duplicates,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.shape()[1]
    }

    /// Number of rows including the pad and OOV rows.
    pub fn rows(&self) -> usize {
        self.matrix.shape()[0]
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn matrix(&self) -> &Tensor<T> {
        &self.matrix
    }

    /// Token index for a normalised word, or [`OOV_INDEX`].
    pub fn index_of(&self, word: &str) -> usize {
        self.vocab.get(word).copied().unwrap_or(OOV_INDEX)
    }

    pub fn row(&self, index: usize) -> Option<&[T]> {
        let d = self.dim();
        (index < self.rows()).then(|| &self.matrix.data()[index * d..(index + 1) * d])
    }

    /// `[n] token indices -> [n, dim]`; pad and OOV tokens give zero rows.
    pub fn lookup<'t>(&self, tape: &'t Tape<T>, tokens: &[usize]) -> Result<Var<'t, T>> {
        Ok(tape.constant(self.gather(tokens)?))
    }

    /// `[n] token indices -> [n, dim]` without a tape. The table is frozen,
    /// so only the gathered rows are copied.
    pub fn gather(&self, tokens: &[usize]) -> Result<Tensor<T>> {
        let d = self.dim();
        let mut data = vec![T::zero(); tokens.len() * d];
        for (i, &t) in tokens.iter().enumerate() {
            match t {
                PAD_INDEX | OOV_INDEX => {}
                t if t < self.rows() => data[i * d..(i + 1) * d]
                    .copy_from_slice(&self.matrix.data()[t * d..(t + 1) * d]),
                t => {
                    return Err(invalid!(
                        "token index {t} out of range for a vocabulary of {} rows",
                        self.rows()
                    ))
                }
            }
        }
        Tensor::new(vec![tokens.len(), d], data)
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingTable<U> {
        EmbeddingTable {
            vocab: self.vocab.clone(),
            matrix: self.matrix.cast(),
            duplicates: self.duplicates,
        }
    }
}
