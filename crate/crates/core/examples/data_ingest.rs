//! Reads a manifest and an embeddings file, merges labels and shows the
//! class counts and one tokenised transcript.

use sincfuse::data::{
    generate_toy_corpus, load_embeddings, load_manifest, tokenize_and_pad, ToyCorpusSpec,
};
use sincfuse::Emotion;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let corpus = generate_toy_corpus(
        &ToyCorpusSpec {
            per_class: 5,
            ..Default::default()
        },
        dir.path(),
    )?;
    let records = load_manifest(&corpus.manifest)?;
    let table = load_embeddings(&corpus.embeddings)?;
    let mut counts = [0usize; Emotion::COUNT];
    for r in &records {
        counts[r.label.index()] += 1;
    }
    for e in Emotion::ALL {
        println!("{:10} {}", e.as_str(), counts[e.index()]);
    }
    let first = &records[0];
    println!("{}: {:?}", first.id, first.transcript);
    println!(
        "tokens {:?}",
        &tokenize_and_pad(&first.transcript, &table, 100)[..12]
    );
    println!(
        "vocabulary {} words of dimension {}",
        table.rows() - 2,
        table.dim()
    );
    Ok(())
}
