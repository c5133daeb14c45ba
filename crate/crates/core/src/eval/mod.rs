//! Tolerance-based vertex metrics and instance-level AP.

mod ap;
mod report;

pub use ap::{ap50, ap50_exhaustive, ApResult, PredictionMatch};
pub use report::{evaluate, ClassMetrics, EvalParams, MetricsReport, ToleranceRow, DEFAULT_TOLERANCES};

use crate::error::{Error, Result};
use crate::geometry::KdTree;
use nalgebra::Point3;
use serde::{Deserialize, Serialize};

/// Default resampling spacing before vertex metrics (m).
pub const DEFAULT_SPACING: f64 = 0.005;

/// Vertex geometry of one damage instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Geometry {
    /// Open polylines, e.g. the branches of a crack.
    Polylines { lines: Vec<Vec<[f64; 3]>> },
    /// A closed loop; the last vertex connects back to the first.
    Polygon { vertices: Vec<[f64; 3]> },
}

impl Geometry {
    pub fn polylines(lines: &[Vec<Point3<f64>>]) -> Self {
        Geometry::Polylines { lines: lines.iter().map(|l| l.iter().map(|p| [p.x, p.y, p.z]).collect()).collect() }
    }

    pub fn polygon(vertices: &[Point3<f64>]) -> Self {
        Geometry::Polygon { vertices: vertices.iter().map(|p| [p.x, p.y, p.z]).collect() }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64; 3]| v.iter().all(|c| c.is_finite());
        match self {
            Geometry::Polylines { lines } => {
                if lines.is_empty() {
                    return Err(Error::InvalidCloud("crack geometry has no polylines".into()));
                }
                for l in lines {
                    if l.len() < 2 {
                        return Err(Error::InvalidCloud("polyline with fewer than 2 vertices".into()));
                    }
                    if !l.iter().all(finite) {
                        return Err(Error::InvalidCloud("polyline vertex is not finite".into()));
                    }
                }
            }
            Geometry::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::InvalidCloud("polygon with fewer than 3 vertices".into()));
                }
                if !vertices.iter().all(finite) {
                    return Err(Error::InvalidCloud("polygon vertex is not finite".into()));
                }
            }
        }
        Ok(())
    }

    /// All stored vertices.
    pub fn vertices(&self) -> Vec<Point3<f64>> {
        let pts: Box<dyn Iterator<Item = &[f64; 3]>> = match self {
            Geometry::Polylines { lines } => Box::new(lines.iter().flatten()),
            Geometry::Polygon { vertices } => Box::new(vertices.iter()),
        };
        pts.map(|v| Point3::from(*v)).collect()
    }
}

/// One ground-truth damage instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedInstance {
    pub class: usize,
    pub geometry: Geometry,
}

/// Ground truth for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationSet {
    /// Class names indexed by `AnnotatedInstance::class`.
    pub classes: Vec<String>,
    pub instances: Vec<AnnotatedInstance>,
}

impl AnnotationSet {
    pub fn validate(&self) -> Result<()> {
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.class >= self.classes.len() {
                return Err(Error::UnknownClass(format!("index {} in annotation {i}", inst.class)));
            }
            inst.geometry.validate()?;
        }
        Ok(())
    }
}

/// One predicted damage instance with its ranking confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub confidence: f64,
    pub geometry: Geometry,
}

/// Evenly spaced vertices along the geometry (every polyline and the polygon
/// perimeter), or the raw vertices when `spacing` is `None`.
pub fn resample_vertices(geometry: &Geometry, spacing: Option<f64>) -> Result<Vec<Point3<f64>>> {
    let Some(spacing) = spacing else { return Ok(geometry.vertices()) };
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::param("spacing", format!("must be positive, got {spacing}")));
    }
    let to_points = |v: &[[f64; 3]]| v.iter().map(|p| Point3::from(*p)).collect::<Vec<_>>();
    Ok(match geometry {
        Geometry::Polylines { lines } => {
            lines.iter().flat_map(|l| resample_path(&to_points(l), spacing, false)).collect()
        }
        Geometry::Polygon { vertices } => resample_path(&to_points(vertices), spacing, true),
    })
}

/// Samples at arc lengths 0, s, 2s, ... plus the final endpoint of an open
/// path. A closed path wraps back to its start and does not repeat it.
pub fn resample_path(path: &[Point3<f64>], spacing: f64, closed: bool) -> Vec<Point3<f64>> {
    if path.is_empty() {
        return Vec::new();
    }
    let mut nodes = path.to_vec();
    if closed {
        nodes.push(path[0]);
    }
    let total: f64 = nodes.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    if total == 0.0 {
        return vec![path[0]];
    }
    // Absorb round-off so a length that is a multiple of the spacing does not
    // produce a sliver sample next to the end.
    let eps = 1e-9 * spacing;
    let count = ((total + eps) / spacing).floor() as usize;
    let mut out = Vec::with_capacity(count + 2);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..=count {
        let target = k as f64 * spacing;
        if closed && target >= total - eps {
            break;
        }
        let target = target.min(total);
        while seg + 1 < nodes.len() - 1 && seg_start + (nodes[seg + 1] - nodes[seg]).norm() < target {
            seg_start += (nodes[seg + 1] - nodes[seg]).norm();
            seg += 1;
        }
        let len = (nodes[seg + 1] - nodes[seg]).norm();
        let t = if len > 0.0 { ((target - seg_start) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(nodes[seg] + (nodes[seg + 1] - nodes[seg]) * t);
    }
    if !closed && total - count as f64 * spacing > eps {
        out.push(*nodes.last().expect("non-empty"));
    }
    out
}

/// Vertex-level agreement at one positional tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceCounts {
    pub true_positives: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub tolerance: f64,
}

impl ToleranceCounts {
    /// `TP / (TP + FN + FP)`; 1 when both vertex sets are empty.
    pub fn iou(&self) -> f64 {
        let total = self.true_positives + self.false_negatives + self.false_positives;
        if total == 0 {
            1.0
        } else {
            self.true_positives as f64 / total as f64
        }
    }
}

pub fn iou_tol(counts: &ToleranceCounts) -> f64 {
    counts.iou()
}

/// Truth vertices with a prediction within `tolerance` are true positives, the
/// rest false negatives; predictions with no truth vertex within `tolerance`
/// are false positives.
pub fn tolerance_counts(truth: &[Point3<f64>], predicted: &[Point3<f64>], tolerance: f64) -> Result<ToleranceCounts> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::param("tolerance", format!("must be positive, got {tolerance}")));
    }
    let covered = |from: &[Point3<f64>], to: &[Point3<f64>]| -> usize {
        if from.is_empty() || to.is_empty() {
            return 0;
        }
        let tree = KdTree::new(to);
        from.iter().filter(|p| tree.knn(p, 1, None)[0].distance <= tolerance).count()
    };
    let tp = covered(truth, predicted);
    let matched_pred = covered(predicted, truth);
    Ok(ToleranceCounts {
        true_positives: tp,
        false_negatives: truth.len() - tp,
        false_positives: predicted.len() - matched_pred,
        tolerance,
    })
}
