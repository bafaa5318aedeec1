use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::network::Prediction;

/// Fraction of predictions strictly within `tol` of their labels.
pub fn wta(predictions: &[f64], labels: &[f64], tol: f64) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: predictions.len().to_string(),
            found: labels.len().to_string(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("wta"));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, y)| (*y - *p).abs() < tol).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Binary view of the predictions at one label threshold. Ratios that would
/// divide by zero are `None`, and `degenerate` flags an empty class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryReport {
    pub threshold: f64,
    pub positives: usize,
    pub negatives: usize,
    /// negatives / positives
    pub imbalance_ratio: Option<f64>,
    pub accuracy: f64,
    pub balanced_accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub degenerate: bool,
}

/// A label counts as positive when it exceeds the threshold; the predicted
/// class is the argmax of the two logits.
pub fn binary_report(predictions: &[Prediction], labels: &[f64], thresholds: &[f64]) -> Result<Vec<BinaryReport>> {
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: predictions.len().to_string(),
            found: labels.len().to_string(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("binary_report"));
    }
    thresholds
        .iter()
        .map(|&threshold| {
            if !(threshold > 0.0 && threshold < 1.0) {
                return Err(Error::InvalidConfig(format!("threshold {threshold} outside (0, 1)")));
            }
            let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
            for (p, &y) in predictions.iter().zip(labels) {
                match (y > threshold, p.positive()) {
                    (true, true) => tp += 1,
                    (true, false) => fn_ += 1,
                    (false, true) => fp += 1,
                    (false, false) => tn += 1,
                }
            }
            let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
            let (positives, negatives) = (tp + fn_, tn + fp);
            let recall = ratio(tp, positives);
            let specificity = ratio(tn, negatives);
            Ok(BinaryReport {
                threshold,
                positives,
                negatives,
                imbalance_ratio: ratio(negatives, positives),
                accuracy: (tp + tn) as f64 / predictions.len() as f64,
                balanced_accuracy: recall.zip(specificity).map(|(r, s)| (r + s) / 2.0),
                precision: ratio(tp, tp + fp),
                recall,
                degenerate: positives == 0 || negatives == 0,
            })
        })
        .collect()
}

/// Plain-text table of `reports` with percentages to one decimal.
pub fn format_binary_table(reports: &[BinaryReport]) -> String {
    let pct = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{:.1}", 100.0 * x));
    let mut out = format!(
        "{:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "threshold", "positive", "negative", "imbalance", "acc%", "bal_acc%", "prec%", "recall%"
    );
    for r in reports {
        out.push_str(&format!(
            "{:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}{}\n",
            r.threshold,
            r.positives,
            r.negatives,
            r.imbalance_ratio.map_or_else(|| "NA".to_string(), |x| format!("{x:.2}")),
            pct(Some(r.accuracy)),
            pct(r.balanced_accuracy),
            pct(r.precision),
            pct(r.recall),
            if r.degenerate { "  (degenerate)" } else { "" }
        ));
    }
    out
}
