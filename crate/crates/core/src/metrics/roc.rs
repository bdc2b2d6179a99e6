use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false-positive rate, true-positive rate)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    /// Threshold reached at each point after the first; scores `>=` it are positive.
    pub thresholds: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr,threshold\n");
        for (i, (fpr, tpr)) in self.points.iter().enumerate() {
            let th = if i == 0 {
                "inf".to_string()
            } else {
                self.thresholds[i - 1].to_string()
            };
            let _ = writeln!(out, "{fpr},{tpr},{th}");
        }
        out
    }
}

/// Sweeps the threshold down through the distinct scores. Tied scores move the
/// curve diagonally in one step, which makes the trapezoid area equal to the
/// Mann-Whitney statistic with ties counted as one half.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<RocCurve> {
    if labels.len() != scores.len() {
        return Err(Error::Dimension(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::domain("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::domain("ROC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (p, n) = (n_pos as f64, n_neg as f64);
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area in units of one positive × one negative
    let mut area2 = 0u128;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += ((fp - fp0) * (tp + tp0)) as u128;
        points.push((fp as f64 / n, tp as f64 / p));
        thresholds.push(s);
    }
    Ok(RocCurve {
        points,
        thresholds,
        auc: area2 as f64 / (2.0 * p * n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_and_tied() {
        let labels = [true, true, false, false];
        assert_eq!(roc_auc(&labels, &[0.9, 0.8, 0.2, 0.1]).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&labels, &[0.1, 0.2, 0.8, 0.9]).unwrap().auc, 0.0);
        let tied = roc_auc(&labels, &[0.5; 4]).unwrap();
        assert_eq!(tied.auc, 0.5);
        assert_eq!(tied.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn single_class_rejected() {
        assert!(roc_auc(&[true, true], &[0.1, 0.2]).is_err());
        assert!(roc_auc(&[true, false], &[0.1, f64::NAN]).is_err());
    }

    #[test]
    fn csv_has_every_point() {
        let c = roc_auc(&[true, false, true], &[0.9, 0.5, 0.1]).unwrap();
        let csv = c.to_csv();
        assert_eq!(csv.lines().count(), 1 + c.points.len());
        assert!(csv.starts_with("fpr,tpr,threshold\n0,0,inf\n"));
    }
}
