//! Runs the text network on one transcript and prints the attention each
//! n-gram branch puts on the words.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sincfuse::autograd::Tape;
use sincfuse::data::{normalize_words, tokenize_and_pad};
use sincfuse::nn::EmbeddingTable;
use sincfuse::text::{TextConfig, TextNet};

fn main() -> sincfuse::Result<()> {
    let transcript = "Well, I don't think that's fair at all!";
    let words = normalize_words(transcript);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let table = EmbeddingTable::from_entries(
        8,
        words.iter().map(|w| {
            (
                w.clone(),
                (0..8)
                    .map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0))
                    .collect(),
            )
        }),
    )?;
    let config = TextConfig {
        max_len: 12,
        ..TextConfig::toy()
    };
    let tokens = tokenize_and_pad(transcript, &table, config.max_len);
    let net = TextNet::<f32>::new(config.clone(), Arc::new(table), &mut rng)?;

    let tape = Tape::inference();
    let out = net.forward(&tape, &tokens, None)?;
    println!("feature width {}", out.feature.shape()[0]);
    for (width, summary) in config.widths.iter().zip(&out.attention) {
        let alpha = summary.alpha.value();
        let shown: Vec<String> = words
            .iter()
            .zip(alpha.data())
            .map(|(w, a)| format!("{w}:{a:.2}"))
            .collect();
        println!("width {width}: {}", shown.join(" "));
    }
    Ok(())
}
