//! Checks shared by the integration test binaries. Each returns a short
//! detail line on success and a reason on failure.
#![allow(dead_code)]

pub mod grads;
pub mod oracles;
pub mod pipeline;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sincfuse::autograd::{Tape, Var};
use sincfuse::{Result, Tensor};

pub type Check = std::result::Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::uniform(shape.to_vec(), 1.0, rng)
}

/// `Σ y ⊙ R` for a fixed random `R`: a scalar loss whose gradient with
/// respect to `y` is dense and generic.
pub fn projection<'t>(tape: &'t Tape<f64>, y: Var<'t, f64>, seed: u64) -> Result<Var<'t, f64>> {
    let r = random_tensor(&y.shape(), &mut rng(seed));
    y.mul(tape.constant(r))?.sum()
}

/// Runs `f`, turning panics into failures so that one broken check does
/// not hide the others.
pub fn guarded(f: impl FnOnce() -> Check + std::panic::UnwindSafe) -> Check {
    match std::panic::catch_unwind(f) {
        Ok(r) => r,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

/// `Err` with the message unless `cond` holds.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}
