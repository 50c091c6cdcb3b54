//! Compares taped gradients of a small conv + batch norm + dense stack
//! against central differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sincfuse::autograd::{Padding, Tape, Var};
use sincfuse::gradcheck::{check_module, grad_check};
use sincfuse::nn::{cross_entropy, Conv1dLayer};
use sincfuse::Tensor;

fn loss<'t>(
    m: &Conv1dLayer<f64>,
    tape: &'t Tape<f64>,
    x: Var<'t, f64>,
) -> sincfuse::Result<Var<'t, f64>> {
    let y = m.forward(tape, x)?.sum_axis(1)?;
    cross_entropy(y, 2)
}

fn main() -> sincfuse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut conv = Conv1dLayer::<f64>::new("conv", 2, 4, 3, Padding::Same, &mut rng);
    let x = Tensor::uniform(vec![2, 12], 1.0, &mut rng);

    let params = check_module(
        &mut conv,
        |m, tape| loss(m, tape, tape.constant(x.clone())),
        1e-5,
        32,
        &mut rng,
    )?;
    for (name, err) in &params.per_param {
        println!("{name:12} max relative error {err:.2e}");
    }
    let input = grad_check(|tape, x| loss(&conv, tape, x), &x, 1e-5)?;
    println!("{:12} max relative error {input:.2e}", "input");
    Ok(())
}
