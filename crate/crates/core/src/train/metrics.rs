use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Square confusion matrix; rows are true classes, columns predictions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if n == 0 || counts.iter().any(|r| r.len() != n) {
            return Err(invalid!("confusion matrix must be square and non-empty"));
        }
        Ok(Self { counts })
    }

    pub fn from_pairs(
        classes: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut m = Self::new(classes);
        for (t, p) in pairs {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let n = self.classes();
        if truth >= n || predicted >= n {
            return Err(invalid!(
                "class pair ({truth}, {predicted}) out of range for {n} classes"
            ));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// Overall accuracy: trace / total.
    pub fn weighted_accuracy(&self) -> Option<f64> {
        let total = self.total();
        let trace: u64 = (0..self.classes()).map(|i| self.counts[i][i]).sum();
        (total > 0).then(|| trace as f64 / total as f64)
    }

    /// Recall per class; `None` for classes without support.
    pub fn per_class_recall(&self) -> Vec<Option<f64>> {
        (0..self.classes())
            .map(|i| {
                let s = self.support(i);
                (s > 0).then(|| self.counts[i][i] as f64 / s as f64)
            })
            .collect()
    }

    /// Mean recall over classes with support.
    pub fn unweighted_accuracy(&self) -> Option<f64> {
        let recalls: Vec<f64> = self.per_class_recall().into_iter().flatten().collect();
        (!recalls.is_empty()).then(|| recalls.iter().sum::<f64>() / recalls.len() as f64)
    }
}

/// Evaluation summary as written to `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: Vec<Vec<u64>>,
    pub wa: f64,
    pub ua: f64,
    /// `null` marks a class with no test records; it is left out of `ua`.
    pub per_class_recall: Vec<Option<f64>>,
    pub n: u64,
}

impl EvalReport {
    pub fn from_confusion(m: &ConfusionMatrix) -> Result<Self> {
        let (Some(wa), Some(ua)) = (m.weighted_accuracy(), m.unweighted_accuracy()) else {
            return Err(invalid!("cannot evaluate an empty record set"));
        };
        Ok(Self {
            confusion: m.counts().to_vec(),
            wa,
            ua,
            per_class_recall: m.per_class_recall(),
            n: m.total(),
        })
    }

    pub fn matrix(&self) -> Result<ConfusionMatrix> {
        ConfusionMatrix::from_counts(self.confusion.clone())
    }
}

/// Report for `(truth, predicted)` pairs over `classes` classes.
pub fn evaluate_pairs(
    classes: usize,
    pairs: impl IntoIterator<Item = (usize, usize)>,
) -> Result<EvalReport> {
    EvalReport::from_confusion(&ConfusionMatrix::from_pairs(classes, pairs)?)
}
