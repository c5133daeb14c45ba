use super::{resample_vertices, tolerance_counts, AnnotatedInstance, Prediction};
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// IoU(tau) at or above which a matched prediction is a true positive.
pub const MATCH_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatch {
    pub prediction: usize,
    /// Truth instance the prediction was compared against, if any was free.
    pub truth: Option<usize>,
    pub iou: f64,
    pub true_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub ap: f64,
    pub tolerance: f64,
    pub truth_count: usize,
    /// One entry per prediction, in ranking order.
    pub matches: Vec<PredictionMatch>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

/// Pairwise IoU(tau) between predictions (rows) and truths (columns);
/// `None` across classes.
pub(crate) fn iou_matrix(
    truth: &[AnnotatedInstance],
    predictions: &[Prediction],
    tolerance: f64,
    spacing: Option<f64>,
) -> Result<Vec<Vec<Option<f64>>>> {
    let truth_vertices =
        truth.iter().map(|t| resample_vertices(&t.geometry, spacing)).collect::<Result<Vec<_>>>()?;
    predictions
        .par_iter()
        .map(|p| {
            let pv = resample_vertices(&p.geometry, spacing)?;
            truth
                .iter()
                .zip(&truth_vertices)
                .map(|(t, tv)| {
                    if t.class != p.class {
                        return Ok(None);
                    }
                    Ok(Some(tolerance_counts(tv, &pv, tolerance)?.iou()))
                })
                .collect()
        })
        .collect()
}

/// Prediction indices by descending confidence; ties keep input order.
fn ranking(predictions: &[Prediction]) -> Result<Vec<usize>> {
    if let Some(i) = predictions.iter().position(|p| !p.confidence.is_finite()) {
        return Err(Error::param("confidence", format!("prediction {i} has a non-finite confidence")));
    }
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[b].confidence.total_cmp(&predictions[a].confidence));
    Ok(order)
}

/// AP50 at positional tolerance `tolerance`, with greedy matching by
/// confidence. Vertices are resampled at `spacing` first when given.
pub fn ap50(
    truth: &[AnnotatedInstance],
    predictions: &[Prediction],
    tolerance: f64,
    spacing: Option<f64>,
) -> Result<ApResult> {
    let ious = iou_matrix(truth, predictions, tolerance, spacing)?;
    let order = ranking(predictions)?;
    let mut taken = vec![false; truth.len()];
    let mut matches = Vec::with_capacity(order.len());
    for &p in &order {
        let best = ious[p]
            .iter()
            .enumerate()
            .filter_map(|(t, iou)| iou.filter(|_| !taken[t]).map(|v| (t, v)))
            .fold(None, |acc: Option<(usize, f64)>, (t, v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((t, v)),
            });
        let (truth_idx, iou) = match best {
            Some((t, v)) => (Some(t), v),
            None => (None, 0.0),
        };
        let tp = iou >= MATCH_THRESHOLD;
        if tp {
            taken[truth_idx.expect("matched")] = true;
        }
        matches.push(PredictionMatch { prediction: p, truth: truth_idx, iou, true_positive: tp });
    }
    let flags: Vec<bool> = matches.iter().map(|m| m.true_positive).collect();
    let (precision, recall, ap) = pr_curve(&flags, truth.len());
    Ok(ApResult { ap, tolerance, truth_count: truth.len(), matches, precision, recall })
}

/// Best AP over every one-to-one assignment of predictions to same-class
/// truths with IoU at or above the threshold. Exponential; meant for
/// cross-checking the greedy matcher on a handful of instances.
pub fn ap50_exhaustive(
    truth: &[AnnotatedInstance],
    predictions: &[Prediction],
    tolerance: f64,
    spacing: Option<f64>,
) -> Result<f64> {
    const LIMIT: usize = 8;
    if truth.len() > LIMIT || predictions.len() > LIMIT {
        return Err(Error::param("predictions", format!("exhaustive matching supports at most {LIMIT} instances")));
    }
    let ious = iou_matrix(truth, predictions, tolerance, spacing)?;
    let order = ranking(predictions)?;
    let mut best = f64::NEG_INFINITY;
    let mut flags = Vec::with_capacity(order.len());
    let mut taken = vec![false; truth.len()];
    search(&order, &ious, &mut taken, &mut flags, truth.len(), &mut best);
    Ok(best)
}

fn search(
    order: &[usize],
    ious: &[Vec<Option<f64>>],
    taken: &mut [bool],
    flags: &mut Vec<bool>,
    truth_count: usize,
    best: &mut f64,
) {
    let depth = flags.len();
    if depth == order.len() {
        *best = best.max(pr_curve(flags, truth_count).2);
        return;
    }
    let p = order[depth];
    for t in 0..taken.len() {
        if !taken[t] && ious[p][t].is_some_and(|v| v >= MATCH_THRESHOLD) {
            taken[t] = true;
            flags.push(true);
            search(order, ious, taken, flags, truth_count, best);
            flags.pop();
            taken[t] = false;
        }
    }
    flags.push(false);
    search(order, ious, taken, flags, truth_count, best);
    flags.pop();
}

/// Cumulative precision and recall over ranked true-positive flags, and the
/// area under the all-point interpolated curve. With no truths, AP is 1 when
/// there are also no predictions and 0 otherwise.
pub(crate) fn pr_curve(flags: &[bool], truth_count: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let mut precision = Vec::with_capacity(flags.len());
    let mut recall = Vec::with_capacity(flags.len());
    let mut tp = 0usize;
    for (i, &f) in flags.iter().enumerate() {
        tp += f as usize;
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(if truth_count == 0 { 0.0 } else { tp as f64 / truth_count as f64 });
    }
    if truth_count == 0 {
        return (precision, recall, if flags.is_empty() { 1.0 } else { 0.0 });
    }
    // Precision envelope: best precision at any rank at or beyond this one.
    let mut envelope = precision.clone();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recall.iter().zip(&envelope) {
        if *r > prev_recall {
            ap += (r - prev_recall) * p;
            prev_recall = *r;
        }
    }
    (precision, recall, ap)
}
