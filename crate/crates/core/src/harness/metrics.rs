use serde::{Deserialize, Serialize};

use crate::data::Stance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of true members of the class.
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub macro_f1: f64,
    pub yes: ClassMetrics,
    pub no: ClassMetrics,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn class_metrics(pred: &[Stance], truth: &[Stance], class: Stance) -> ClassMetrics {
    let mut tp = 0;
    let mut fp = 0;
    let mut fneg = 0;
    for (p, t) in pred.iter().zip(truth) {
        match (*p == class, *t == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    ClassMetrics {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fneg),
        f1: ratio(2 * tp, 2 * tp + fp + fneg),
        support: tp + fneg,
    }
}

/// Unweighted mean of the YES and NO F1 scores. A class that is neither
/// predicted nor present scores 0.
pub fn macro_f1(pred: &[Stance], truth: &[Stance]) -> Result<F1Report> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::invalid("macro-F1 of an empty set"));
    }
    let yes = class_metrics(pred, truth, Stance::Yes);
    let no = class_metrics(pred, truth, Stance::No);
    Ok(F1Report {
        macro_f1: 0.5 * (yes.f1 + no.f1),
        yes,
        no,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_no_on_imbalanced_set() {
        let truth: Vec<Stance> = (0..100).map(|i| if i < 77 { Stance::No } else { Stance::Yes }).collect();
        let pred = vec![Stance::No; 100];
        let r = macro_f1(&pred, &truth).unwrap();
        let f_no = 2.0 * 0.77 / 1.77;
        assert!((r.no.f1 - f_no).abs() < 1e-12);
        assert_eq!(r.yes.f1, 0.0);
        assert!((r.macro_f1 - f_no / 2.0).abs() < 1e-12);
        assert_eq!(macro_f1(&truth, &truth).unwrap().macro_f1, 1.0);
        assert!(macro_f1(&pred[..3], &truth).is_err());
    }
}
