//! The three training stages on a small synthetic corpus: acoustic and
//! text networks first, then a fusion head on their frozen features.

use std::sync::Arc;

use sincfuse::acoustic::AcousticConfig;
use sincfuse::data::{
    generate_toy_corpus, load_embeddings, prepare, stratified_holdout, ToyCorpusSpec,
};
use sincfuse::fusion::{FusionConfig, FusionMode};
use sincfuse::text::TextConfig;
use sincfuse::train::{
    evaluate_acoustic, evaluate_fusion, evaluate_text, extract_features, train_acoustic,
    train_fusion, train_text, TrainOptions,
};
use sincfuse::Emotion;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let dir = tempfile::tempdir()?;
    let corpus = generate_toy_corpus(
        &ToyCorpusSpec {
            per_class: 25,
            ..Default::default()
        },
        dir.path(),
    )?;
    let table = Arc::new(load_embeddings(&corpus.embeddings)?);
    let records = prepare(&corpus.records, &table, TextConfig::toy().max_len, false)?;
    let labels: Vec<Emotion> = records.iter().map(|r| r.label).collect();
    let split = stratified_holdout(&labels, 5, 5, 0)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    let (train, val, test) = (
        pick(&split.train),
        pick(&split.validation),
        pick(&split.test),
    );
    let opts = TrainOptions {
        batch_size: 8,
        max_epochs: 10,
        ..TrainOptions::toy()
    };

    let (acoustic, _) = train_acoustic(AcousticConfig::toy(), &train, &val, &opts)?;
    println!(
        "acoustic test WA {:.3}",
        evaluate_acoustic(&acoustic, &test, true)?.wa
    );
    let (text, _) = train_text(TextConfig::toy(), table.clone(), &train, &val, &opts)?;
    println!(
        "text     test WA {:.3}",
        evaluate_text(&text, &test, true)?.wa
    );

    let feats = |r: &[_]| extract_features(&acoustic, &text, r, true);
    let (train_f, val_f, test_f) = (feats(&train)?, feats(&val)?, feats(&test)?);
    let lab = |r: &[sincfuse::data::Prepared]| r.iter().map(|p| p.label).collect::<Vec<_>>();
    for mode in FusionMode::ALL {
        let config = FusionConfig {
            mode,
            acoustic_width: acoustic.feature_width(),
            text_width: TextConfig::toy().feature_width,
            hidden: 32,
        };
        let (net, _) = train_fusion(config, &train_f, &lab(&train), &val_f, &lab(&val), &opts)?;
        println!(
            "{mode}       test WA {:.3}",
            evaluate_fusion(&net, &test_f, &lab(&test))?.wa
        );
    }
    Ok(())
}
