use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::argmax;

/// Rows are true classes, columns predictions.
pub fn confusion_matrix(y: &[usize], pred: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&t, &p) in y.iter().zip(pred) {
        m[t][p] += 1;
    }
    m
}

pub fn accuracy(y: &[usize], pred: &[usize]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    y.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

/// Per-class precision and recall from a confusion matrix; an empty
/// denominator gives 0.
pub fn precision_recall(confusion: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
    let k = confusion.len();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = (0..k)
        .map(|c| ratio(confusion[c][c], (0..k).map(|r| confusion[r][c]).sum()))
        .collect();
    let recall = (0..k)
        .map(|c| ratio(confusion[c][c], confusion[c].iter().sum()))
        .collect();
    (precision, recall)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub class: usize,
    pub points: Vec<RocPoint>,
    /// `None` when the class or its complement is absent.
    pub auc: Option<f64>,
}

/// Threshold sweep over distinct scores, highest first, starting at (0, 0).
/// Tied scores move together, so the trapezoid area credits ties by half.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> (Vec<RocPoint>, Option<f64>) {
    let pos = positive.iter().filter(|p| **p).count();
    let neg = positive.len() - pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: if neg == 0 { 0.0 } else { fp as f64 / neg as f64 },
            tpr: if pos == 0 { 0.0 } else { tp as f64 / pos as f64 },
            threshold: s,
        });
    }
    let auc = (pos > 0 && neg > 0).then(|| {
        points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum::<f64>()
            .clamp(0.0, 1.0)
    });
    (points, auc)
}

/// One-vs-rest curves for every class.
pub fn roc_curves(y: &[usize], proba: &[Vec<f64>], n_classes: usize) -> Vec<RocCurve> {
    (0..n_classes)
        .map(|c| {
            let scores: Vec<f64> = proba.iter().map(|p| p[c]).collect();
            let positive: Vec<bool> = y.iter().map(|&t| t == c).collect();
            let (points, auc) = roc_curve(&scores, &positive);
            RocCurve { class: c, points, auc }
        })
        .collect()
}

pub fn predictions(proba: &[Vec<f64>]) -> Vec<usize> {
    proba.iter().map(|p| argmax(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_report() {
        let y = [0, 0, 1, 1];
        let pred = [0, 1, 1, 1];
        assert_eq!(accuracy(&y, &pred), 0.75);
        let m = confusion_matrix(&y, &pred, 2);
        assert_eq!(m, vec![vec![1, 1], vec![0, 2]]);
        let (p, r) = precision_recall(&m);
        assert!((p[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r[1], 1.0);
    }

    #[test]
    fn ranked_pairs_auc() {
        let (_, auc) = roc_curve(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]);
        assert!((auc.unwrap() - 0.75).abs() < 1e-15);
        let (_, perfect) = roc_curve(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]);
        assert_eq!(perfect, Some(1.0));
        let (_, tied) = roc_curve(&[0.5; 4], &[false, true, false, true]);
        assert_eq!(tied, Some(0.5));
        assert_eq!(roc_curve(&[0.5], &[true]).1, None);
    }
}
