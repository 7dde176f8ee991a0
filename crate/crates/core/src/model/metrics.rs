use serde::{Deserialize, Serialize};

use super::ClassifierHandle;
use crate::data::EncodedMatrix;
use crate::error::{Error, Result};
use crate::stats::average_ranks;

/// Hold-out accuracy metrics. Precision, recall and F1 are 0 when their
/// denominator is 0; `auc` is `None` when the labels hold a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// `(tp, fp, tn, fn)` for 0/1 predictions against 0/1 labels.
pub fn confusion(preds: &[u8], labels: &[u8]) -> (usize, usize, usize, usize) {
    let mut c = (0, 0, 0, 0);
    for (&p, &y) in preds.iter().zip(labels) {
        match (p, y) {
            (1, 1) => c.0 += 1,
            (1, _) => c.1 += 1,
            (_, 0) => c.2 += 1,
            _ => c.3 += 1,
        }
    }
    c
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn f1_score(preds: &[u8], labels: &[u8]) -> f64 {
    let (tp, fp, _, fn_) = confusion(preds, labels);
    ratio(2 * tp, 2 * tp + fp + fn_)
}

/// Area under the ROC curve via the rank-sum statistic; tied scores share
/// their average rank, which counts each tied positive–negative pair as ½.
pub fn auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n1 = labels.iter().filter(|&&y| y == 1).count();
    let n0 = labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return None;
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &y)| y == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
    Some(u / (n1 as f64 * n0 as f64))
}

/// Build a report from scores, thresholded predictions and labels.
pub fn report_from_predictions(scores: &[f64], preds: &[u8], labels: &[u8]) -> EvalReport {
    let (tp, fp, tn, fn_) = confusion(preds, labels);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    EvalReport {
        acc: ratio(tp + tn, labels.len()),
        precision,
        recall,
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        auc: auc(scores, labels),
        tp,
        fp,
        tn,
        fn_,
    }
}

/// Score a fitted classifier on a labelled hold-out set.
pub fn evaluate(handle: &ClassifierHandle, test: &EncodedMatrix, labels: &[u8]) -> Result<EvalReport> {
    if test.nrows() == 0 {
        return Err(Error::InvalidInput("evaluation set is empty".into()));
    }
    if labels.len() != test.nrows() {
        return Err(Error::InvalidInput(format!("{} labels for {} rows", labels.len(), test.nrows())));
    }
    let (preds, probas) = handle.predict_with_proba(test)?;
    Ok(report_from_predictions(&probas, &preds, labels))
}
