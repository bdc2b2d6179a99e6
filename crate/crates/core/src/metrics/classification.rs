use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fn_: u64, fp: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `TP + TN`.
    pub fn true_predictions(&self) -> u64 {
        self.tp + self.tn
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Counts predictions where `score >= threshold` means positive.
pub fn confusion(labels: &[bool], scores: &[f64], threshold: f64) -> Result<ConfusionMatrix> {
    if labels.len() != scores.len() {
        return Err(Error::Dimension(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    let mut c = ConfusionMatrix::default();
    for (&y, &s) in labels.iter().zip(scores) {
        match (y, s >= threshold) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Set when a metric's denominator was zero; the metric is then reported as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Undefined {
    pub accuracy: bool,
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
}

impl Undefined {
    pub fn any(&self) -> bool {
        self.accuracy || self.precision || self.recall || self.f1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub undefined: Undefined,
}

pub fn prf1(c: &ConfusionMatrix) -> Prf1 {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            (0.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    };
    let (accuracy, acc_u) = ratio(c.tp + c.tn, c.total());
    let (precision, prec_u) = ratio(c.tp, c.tp + c.fp);
    let (recall, rec_u) = ratio(c.tp, c.tp + c.fn_);
    // 2PR/(P+R) written in counts so that it stays defined whenever TP+FP+FN > 0
    let (f1, f1_u) = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    Prf1 {
        accuracy,
        precision,
        recall,
        f1,
        undefined: Undefined {
            accuracy: acc_u,
            precision: prec_u,
            recall: rec_u,
            f1: f1_u,
        },
    }
}
