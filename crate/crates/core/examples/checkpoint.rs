//! Saves an acoustic network, loads it back and checks that the weights
//! and the predictions survive the round trip.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sincfuse::acoustic::{utterance_predict, AcousticConfig, AcousticNet};
use sincfuse::checkpoint::{load_acoustic, save_acoustic};
use sincfuse::train::param_checksum;
use sincfuse::Tensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = AcousticConfig::toy();
    let net = AcousticNet::<f32>::new(config.clone(), &mut rng)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("acoustic.ckpt");
    save_acoustic(&net, &path)?;
    let back = load_acoustic(&path, Some(&config))?;

    let wave = Tensor::<f32>::uniform(vec![6000], 0.5, &mut rng).into_data();
    let before = utterance_predict(&net, &wave, config.plan())?;
    let after = utterance_predict(&back, &wave, config.plan())?;
    println!(
        "{} bytes on disk",
        std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0)
    );
    println!(
        "checksums {:016x} {:016x}",
        param_checksum(&net),
        param_checksum(&back)
    );
    println!("summed window probabilities {before:.4?}");
    println!("identical predictions: {}", before == after);
    Ok(())
}
