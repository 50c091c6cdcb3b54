//! Merges the same acoustic and text features under each fusion mode and
//! shows the merged width and class probabilities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sincfuse::autograd::Tape;
use sincfuse::fusion::{FusionConfig, FusionMode, FusionNet};
use sincfuse::nn::softmax_vec;
use sincfuse::Tensor;

fn main() -> sincfuse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let acoustic = Tensor::<f32>::uniform(vec![16], 1.0, &mut rng);
    let text = Tensor::<f32>::uniform(vec![24], 1.0, &mut rng);
    for mode in FusionMode::ALL {
        let net = FusionNet::<f32>::new(
            FusionConfig {
                mode,
                acoustic_width: 16,
                text_width: 24,
                hidden: 8,
            },
            &mut rng,
        )?;
        let tape = Tape::inference();
        let out = net.forward(
            &tape,
            tape.constant(acoustic.clone()),
            tape.constant(text.clone()),
        )?;
        let p = softmax_vec(out.logits.value().data());
        println!(
            "{mode}: merged {:?}, probabilities {p:.3?}",
            out.merged.shape()
        );
    }
    Ok(())
}
