use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::Emotion;

pub const FOLDS: usize = 10;

/// One cross-validation split: fold `fold` is the test set, fold
/// `fold + 1` (mod 10) the validation set, and the other eight train.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit<I> {
    pub fold: usize,
    pub train: Vec<I>,
    pub validation: Vec<I>,
    pub test: Vec<I>,
}

/// Shuffles `ids` with `seed` and deals them round-robin into ten folds.
pub fn split_folds<I: Clone>(ids: &[I], seed: u64) -> Result<Vec<FoldSplit<I>>> {
    if ids.len() < FOLDS {
        return Err(invalid!(
            "need at least {FOLDS} records to split into folds, got {}",
            ids.len()
        ));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds: Vec<Vec<I>> = vec![Vec::new(); FOLDS];
    for (i, &k) in order.iter().enumerate() {
        folds[i % FOLDS].push(ids[k].clone());
    }
    Ok((0..FOLDS)
        .map(|k| {
            let val = (k + 1) % FOLDS;
            FoldSplit {
                fold: k,
                train: (0..FOLDS)
                    .filter(|&f| f != k && f != val)
                    .flat_map(|f| folds[f].iter().cloned())
                    .collect(),
                validation: folds[val].clone(),
                test: folds[k].clone(),
            }
        })
        .collect())
}

/// Indices for a class-balanced train / validation / test split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Holdout {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per class, shuffles that class's indices and takes `validation` and
/// `test` of them for those sets; the rest train. Index lists are sorted.
pub fn stratified_holdout(
    labels: &[Emotion],
    validation: usize,
    test: usize,
    seed: u64,
) -> Result<Holdout> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Holdout {
        train: vec![],
        validation: vec![],
        test: vec![],
    };
    for class in Emotion::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < validation + test + 1 {
            return Err(invalid!(
                "class {class} has {} records; need more than {} for validation and test",
                idx.len(),
                validation + test
            ));
        }
        idx.shuffle(&mut rng);
        out.validation.extend(&idx[..validation]);
        out.test.extend(&idx[validation..validation + test]);
        out.train.extend(&idx[validation + test..]);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn hundred_ids() {
        let ids: Vec<u32> = (0..100).collect();
        let splits = split_folds(&ids, 7).unwrap();
        assert_eq!(splits.len(), 10);
        for s in &splits {
            assert_eq!(
                (s.train.len(), s.validation.len(), s.test.len()),
                (80, 10, 10)
            );
            let all: HashSet<u32> = s
                .train
                .iter()
                .chain(&s.validation)
                .chain(&s.test)
                .copied()
                .collect();
            assert_eq!(all.len(), 100);
        }
        assert_eq!(splits, split_folds(&ids, 7).unwrap());
        assert_ne!(splits, split_folds(&ids, 8).unwrap());
        assert!(split_folds(&ids[..9], 0).is_err());
    }

    #[test]
    fn holdout_is_balanced() {
        let labels: Vec<Emotion> = (0..280).map(|i| Emotion::ALL[i % 4]).collect();
        let h = stratified_holdout(&labels, 10, 10, 3).unwrap();
        assert_eq!(
            (h.train.len(), h.validation.len(), h.test.len()),
            (200, 40, 40)
        );
        for class in Emotion::ALL {
            assert_eq!(h.test.iter().filter(|&&i| labels[i] == class).count(), 10);
        }
        assert!(stratified_holdout(&labels[..20], 10, 10, 3).is_err());
    }
}
