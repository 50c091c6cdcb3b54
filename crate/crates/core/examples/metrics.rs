//! Weighted and unweighted accuracy on an imbalanced confusion matrix.

use sincfuse::artifacts::confusion_csv;
use sincfuse::train::{ConfusionMatrix, EvalReport};

fn main() -> sincfuse::Result<()> {
    let m = ConfusionMatrix::from_counts(vec![
        vec![40, 5, 3, 2],
        vec![4, 10, 5, 1],
        vec![6, 4, 80, 10],
        vec![1, 0, 4, 25],
    ])?;
    let report = EvalReport::from_confusion(&m)?;
    println!("n = {}", report.n);
    println!("WA = {:.4}", report.wa);
    println!("UA = {:.4}", report.ua);
    print!("{}", confusion_csv(&report));
    Ok(())
}
