use proptest::prelude::*;
use sincfuse::acoustic::ChunkPlan;
use sincfuse::autograd::Tape;
use sincfuse::data::{
    decode_wav, encode_wav, merge_labels, normalize_words, split_folds, tokenize_and_pad,
    SAMPLE_RATE,
};
use sincfuse::nn::{softmax_vec, EmbeddingTable, PAD_INDEX};
use sincfuse::sinc::{SincConfig, SincLayer};
use sincfuse::text::cross_attention;
use sincfuse::train::ConfusionMatrix;
use sincfuse::{Emotion, Tensor};

fn table() -> EmbeddingTable<f32> {
    let words = ["the", "cat", "sat", "on", "mat", "don't"];
    EmbeddingTable::from_entries(2, words.iter().map(|w| (w.to_string(), vec![0.5, -0.5]))).unwrap()
}

proptest! {
    #[test]
    fn softmax_sums_to_one_and_ignores_shifts(
        logits in prop::collection::vec(-30.0f64..30.0, 1..12),
        shift in -100.0f64..100.0,
    ) {
        let p = softmax_vec(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        for (a, b) in p.iter().zip(softmax_vec(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn accuracies_match_direct_counts(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..200)) {
        let m = ConfusionMatrix::from_pairs(4, pairs.iter().copied()).unwrap();
        let hits = pairs.iter().filter(|(t, p)| t == p).count();
        let wa = m.weighted_accuracy().unwrap();
        prop_assert!((wa - hits as f64 / pairs.len() as f64).abs() < 1e-12);
        let mut recalls = Vec::new();
        for c in 0..4 {
            let support = pairs.iter().filter(|(t, _)| *t == c).count();
            if support > 0 {
                let right = pairs.iter().filter(|(t, p)| *t == c && *p == c).count();
                recalls.push(right as f64 / support as f64);
            }
        }
        let ua = m.unweighted_accuracy().unwrap();
        prop_assert!((ua - recalls.iter().sum::<f64>() / recalls.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn folds_partition_every_record(n in 10usize..300, seed in any::<u64>()) {
        let ids: Vec<usize> = (0..n).collect();
        let folds = split_folds(&ids, seed).unwrap();
        prop_assert_eq!(folds.len(), 10);
        let mut tests: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
        tests.sort_unstable();
        prop_assert_eq!(&tests, &ids);
        for f in &folds {
            prop_assert!(f.test.len().abs_diff(n / 10) <= 1);
            let mut all: Vec<usize> = f.train.iter().chain(&f.validation).chain(&f.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(&all, &ids);
            prop_assert!(f.validation.iter().all(|v| !f.test.contains(v)));
        }
    }

    #[test]
    fn window_count_follows_hop_arithmetic(window in 1usize..5000, hop in 1usize..500, len in 0usize..100_000) {
        let plan = ChunkPlan { window, hop };
        let count = plan.count(len);
        if len <= window {
            prop_assert_eq!(count, 1);
        } else {
            prop_assert_eq!(count, (len - window) / hop + 1);
            let last = plan.starts(len).last().unwrap();
            prop_assert!(last + window <= len);
            prop_assert!(last + hop + window > len);
        }
    }

    #[test]
    fn transcripts_always_pad_to_fixed_length(text in "[a-zA-Z' .,!?]{0,400}", max_len in 1usize..120) {
        let t = table();
        let tokens = tokenize_and_pad(&text, &t, max_len);
        prop_assert_eq!(tokens.len(), max_len);
        let words = normalize_words(&text).len().min(max_len);
        prop_assert!(tokens[words..].iter().all(|&i| i == PAD_INDEX));
    }

    #[test]
    fn wav_round_trip_within_quantisation(samples in prop::collection::vec(-1.0f32..1.0, 0..500)) {
        let (rate, decoded) = decode_wav(&encode_wav(&samples, SAMPLE_RATE)).unwrap();
        prop_assert_eq!(rate, SAMPLE_RATE);
        prop_assert_eq!(decoded.len(), samples.len());
        for (a, b) in samples.iter().zip(&decoded) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn other_sample_rates_are_rejected(rate in 1u32..96_000) {
        prop_assume!(rate != SAMPLE_RATE);
        let err = decode_wav(&encode_wav(&[0.25, -0.25], rate)).unwrap_err();
        prop_assert!(err.contains("expected 16000"), "{}", err);
    }

    #[test]
    fn attention_weights_are_a_distribution(steps in 1usize..20, width in 1usize..10, seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let tape = Tape::<f64>::inference();
        let a = tape.constant(Tensor::uniform(vec![steps, width], 3.0, &mut r));
        let b = tape.constant(Tensor::uniform(vec![steps, width], 3.0, &mut r));
        let s = cross_attention(a, b).unwrap();
        let alpha = s.alpha.value();
        prop_assert!((alpha.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(alpha.data().iter().all(|&v| v >= 0.0));
        prop_assert_eq!(s.context.shape(), vec![width]);
    }

    #[test]
    fn sinc_kernels_are_symmetric_band_passes(
        low in prop::collection::vec(1.0f64..6000.0, 1..6),
        band in prop::collection::vec(10.0f64..3000.0, 6),
    ) {
        let n = low.len();
        let config = SincConfig { filters: n, length: 33, ..SincConfig::default() };
        let layer = SincLayer::<f64>::from_params("s", config, &low, &band[..n]).unwrap();
        let kernels = layer.kernels();
        for (row, (f1, f2)) in kernels.data().chunks(33).zip(layer.cutoffs()) {
            prop_assert!((0..33).all(|i| row[i] == row[32 - i]));
            prop_assert!(0.0 < f1 && f1 < f2 && f2 <= 8000.0);
        }
    }
}

#[test]
fn label_matching_ignores_case_and_padding() {
    for raw in ["Excitement", " EXCITEMENT ", "happiness"] {
        assert_eq!(merge_labels(raw).unwrap(), Emotion::Happiness);
    }
    assert!(merge_labels("frustration").is_err());
}
