use super::{ap50, resample_vertices, tolerance_counts, AnnotationSet, Prediction, ToleranceCounts, DEFAULT_SPACING};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Tolerance grid of the metrics report (m).
pub const DEFAULT_TOLERANCES: [f64; 5] = [0.01, 0.02, 0.04, 0.06, 0.08];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub tolerances: Vec<f64>,
    /// Resampling spacing (m); `None` compares raw vertices.
    pub spacing: Option<f64>,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self { tolerances: DEFAULT_TOLERANCES.to_vec(), spacing: Some(DEFAULT_SPACING) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    /// IoU over all vertices of the class, pooled across instances.
    pub iou: f64,
    pub ap50: f64,
    pub counts: ToleranceCounts,
    pub truth_instances: usize,
    pub predicted_instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceRow {
    pub tolerance: f64,
    pub classes: Vec<ClassMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub spacing: Option<f64>,
    pub rows: Vec<ToleranceRow>,
}

/// Scores predictions against ground truth for every class that appears in
/// either, at every tolerance.
pub fn evaluate(truth: &AnnotationSet, predictions: &[Prediction], params: &EvalParams) -> Result<MetricsReport> {
    truth.validate()?;
    if params.tolerances.is_empty() {
        return Err(Error::param("tolerances", "at least one tolerance is required"));
    }
    for (i, p) in predictions.iter().enumerate() {
        if p.class >= truth.classes.len() {
            return Err(Error::UnknownClass(format!("index {} in prediction {i}", p.class)));
        }
        p.geometry.validate()?;
    }
    let mut classes: Vec<usize> =
        truth.instances.iter().map(|t| t.class).chain(predictions.iter().map(|p| p.class)).collect();
    classes.sort_unstable();
    classes.dedup();

    let mut rows = Vec::new();
    for &tol in &params.tolerances {
        let mut per_class = Vec::new();
        for &c in &classes {
            let t: Vec<_> = truth.instances.iter().filter(|t| t.class == c).cloned().collect();
            let p: Vec<_> = predictions.iter().filter(|p| p.class == c).cloned().collect();
            let mut tv = Vec::new();
            for inst in &t {
                tv.extend(resample_vertices(&inst.geometry, params.spacing)?);
            }
            let mut pv = Vec::new();
            for inst in &p {
                pv.extend(resample_vertices(&inst.geometry, params.spacing)?);
            }
            let counts = tolerance_counts(&tv, &pv, tol)?;
            let ap = ap50(&t, &p, tol, params.spacing)?;
            per_class.push(ClassMetrics {
                class: truth.classes[c].clone(),
                iou: counts.iou(),
                ap50: ap.ap,
                counts,
                truth_instances: t.len(),
                predicted_instances: p.len(),
            });
        }
        rows.push(ToleranceRow { tolerance: tol, classes: per_class });
    }
    Ok(MetricsReport { spacing: params.spacing, rows })
}

impl MetricsReport {
    /// Aligned table with one row per tolerance and IoU / AP50 columns per class.
    pub fn to_text(&self) -> String {
        let mut header = vec!["Tol.".to_string()];
        if let Some(first) = self.rows.first() {
            for c in &first.classes {
                header.push(format!("{} IoU", c.class));
                header.push(format!("{} AP50", c.class));
            }
        }
        let mut table = vec![header];
        for row in &self.rows {
            let mut cells = vec![format!("{:.1} cm", row.tolerance * 100.0)];
            for c in &row.classes {
                cells.push(format!("{:.3}", c.iou));
                cells.push(format!("{:.3}", c.ap50));
            }
            table.push(cells);
        }
        let cols = table[0].len();
        let widths: Vec<usize> =
            (0..cols).map(|i| table.iter().map(|r| r.get(i).map_or(0, String::len)).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &table {
            let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}
