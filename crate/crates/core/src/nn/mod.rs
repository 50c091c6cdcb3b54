//! Trainable layer primitives shared by the acoustic, text and fusion
//! networks.

mod batchnorm;
mod conv;
mod dense;
mod embedding;
mod lstm;

pub use batchnorm::BatchNorm1d;
pub use conv::Conv1dLayer;
pub use dense::Dense;
pub use embedding::{EmbeddingTable, EMBEDDING_DIM, OOV_INDEX, PAD_INDEX};
pub use lstm::{BiLstm, LstmDirection};

use rand::Rng;

use crate::autograd::Var;
use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

/// Negative-side slope of every leaky ReLU in the networks.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Whether a forward pass is part of training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// `-log softmax(logits)[label]`; the gradient is `softmax - onehot`.
pub fn cross_entropy<'t, T: Scalar>(logits: Var<'t, T>, label: usize) -> Result<Var<'t, T>> {
    logits.cross_entropy(label)
}

/// Softmax of a plain vector, max-shifted for stability.
pub fn softmax_vec<T: Scalar>(logits: &[T]) -> Vec<T> {
    let mut out = logits.to_vec();
    crate::autograd::softmax_in_place(&mut out);
    out
}

/// Inverted dropout. A no-op for `p == 0` or when no generator is given
/// (evaluation).
pub fn dropout<'t, T: Scalar>(
    x: Var<'t, T>,
    p: f64,
    rng: Option<&mut dyn rand::RngCore>,
) -> Result<Var<'t, T>> {
    let Some(rng) = rng else { return Ok(x) };
    if p <= 0.0 {
        return Ok(x);
    }
    let keep = 1.0 - p;
    let shape = x.shape();
    let n: usize = shape.iter().product();
    let mask = (0..n)
        .map(|_| {
            if rng.gen::<f64>() < keep {
                T::lit(1.0 / keep)
            } else {
                T::zero()
            }
        })
        .collect();
    x.mul_const(Tensor::new(shape, mask)?)
}

/// Uniform fan-in initialisation bound `1/√fan_in`.
pub(crate) fn fan_in_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in.max(1) as f64).sqrt()
}
