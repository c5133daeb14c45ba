//! Fusion of per-view class heatmaps onto a point cloud.
//!
//! Each view that sees a point contributes with weight `1/N` when the angle
//! `θ` between the point normal and the viewing ray lies strictly inside
//! `(130°, 230°)`, and nothing otherwise. The angle is measured so that a
//! surface squarely facing the camera (normal anti-parallel to the ray)
//! gives `θ = 180°`. Because the unsigned angle lives in `[0°, 180°]`, the
//! accepted range is effectively `(130°, 180°]`.
//!
//! Class scores are accumulated channel by channel and the label is the
//! winner-takes-all argmax. Ties go to background, then to the lowest class
//! index. Points without any contributing view are background.

use crate::camera::{visible_projections, CameraView, VisibilityParams};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const THETA_MIN_DEG: f64 = 130.0;
pub const THETA_MAX_DEG: f64 = 230.0;

/// Angles within this many degrees of an interval bound count as on the
/// bound (and are rejected), absorbing rounding in `atan2`.
pub const THETA_BOUND_SNAP_DEG: f64 = 1e-9;

/// Ordered class names plus the background index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCatalog {
    names: Vec<String>,
    background: usize,
}

impl Default for ClassCatalog {
    fn default() -> Self {
        Self {
            names: ["background", "crack", "spalling", "corrosion"].map(String::from).to_vec(),
            background: 0,
        }
    }
}

impl ClassCatalog {
    pub fn new(names: Vec<String>, background: usize) -> Result<Self> {
        if background >= names.len() {
            return Err(Error::param("background", format!("index {background} out of range")));
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::param("classes", "empty class name"));
            }
            if names[..i].contains(n) {
                return Err(Error::param("classes", format!("duplicate class `{n}`")));
            }
        }
        Ok(Self { names, background })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn background(&self) -> usize {
        self.background
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    /// Winner-takes-all over one score vector.
    pub fn argmax(&self, scores: &[f64]) -> usize {
        let mut best = self.background;
        for (c, &s) in scores.iter().enumerate() {
            if c != self.background && s > scores[best] {
                best = c;
            }
        }
        best
    }
}

/// What `N` counts in the `1/N` weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewCountMode {
    /// Views that see the point and pass the angular test.
    #[default]
    InInterval,
    /// Every view that sees the point, whatever the angle.
    AllVisible,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionParams {
    pub visibility: VisibilityParams,
    pub view_count: ViewCountMode,
}

/// Angle in degrees between a point normal and a viewing direction, 180°
/// for a normal pointing straight back at the camera.
pub fn angular_deviation_deg(normal: &Vector3<f64>, view_direction: &Vector3<f64>) -> f64 {
    normal.cross(view_direction).norm().atan2(normal.dot(view_direction)).to_degrees()
}

/// Whether `theta_deg` lies strictly inside the accepted interval.
pub fn in_weight_interval(theta_deg: f64) -> bool {
    theta_deg > THETA_MIN_DEG + THETA_BOUND_SNAP_DEG && theta_deg < THETA_MAX_DEG - THETA_BOUND_SNAP_DEG
}

/// Weight of one view for one point: `1/N` inside the interval, else 0.
pub fn view_weight(
    point_normal: &Vector3<f64>,
    view_direction: &Vector3<f64>,
    valid_view_count: usize,
) -> Result<f64> {
    if point_normal.norm() == 0.0 || view_direction.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    if valid_view_count == 0 {
        return Err(Error::param("valid_view_count", "must be at least 1"));
    }
    let theta = angular_deviation_deg(point_normal, view_direction);
    Ok(if in_weight_interval(theta) { 1.0 / valid_view_count as f64 } else { 0.0 })
}

/// A cloud with fused per-class scores and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedCloud {
    cloud: PointCloud,
    catalog: ClassCatalog,
    /// Row-major `len x classes`.
    scores: Vec<f64>,
    labels: Vec<usize>,
    view_counts: Vec<u32>,
}

impl SegmentedCloud {
    /// Assemble and check the labeling invariants.
    pub fn from_parts(
        cloud: PointCloud,
        catalog: ClassCatalog,
        scores: Vec<f64>,
        labels: Vec<usize>,
        view_counts: Vec<u32>,
    ) -> Result<Self> {
        let n = cloud.len();
        let c = catalog.len();
        if scores.len() != n * c || labels.len() != n || view_counts.len() != n {
            return Err(Error::InvalidCloud(format!(
                "segmentation arrays do not match {n} points x {c} classes"
            )));
        }
        if let Some(i) = scores.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidCloud(format!("invalid score at flat index {i}")));
        }
        for i in 0..n {
            let expected = if view_counts[i] == 0 {
                catalog.background()
            } else {
                catalog.argmax(&scores[i * c..(i + 1) * c])
            };
            if labels[i] != expected {
                return Err(Error::InvalidCloud(format!(
                    "point {i} labeled {} but its scores select {expected}",
                    labels[i]
                )));
            }
        }
        Ok(Self { cloud, catalog, scores, labels, view_counts })
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn catalog(&self) -> &ClassCatalog {
        &self.catalog
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn scores(&self, i: usize) -> &[f64] {
        let c = self.catalog.len();
        &self.scores[i * c..(i + 1) * c]
    }

    pub fn score(&self, i: usize, class: usize) -> f64 {
        self.scores[i * self.catalog.len() + class]
    }

    pub fn view_counts(&self) -> &[u32] {
        &self.view_counts
    }

    /// Indices of points carrying `class`.
    pub fn indices_of(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }
}

/// Fuse every view's heatmaps onto the cloud.
pub fn fuse(
    cloud: &PointCloud,
    views: &[CameraView],
    catalog: &ClassCatalog,
    params: &FusionParams,
) -> Result<SegmentedCloud> {
    let normals = cloud.normals().ok_or(Error::MissingNormals)?;
    if views.is_empty() {
        return Err(Error::NoViews);
    }
    let classes = catalog.len();
    for v in views {
        if v.heatmaps().len() != classes {
            return Err(Error::InvalidCamera {
                name: v.name().to_string(),
                reason: format!("{} heatmaps for {classes} classes", v.heatmaps().len()),
            });
        }
    }
    let n = cloud.len();
    let pts = cloud.positions();
    let mut sums = vec![0.0f64; n * classes];
    let mut valid = vec![0u32; n];
    let mut visible = vec![0u32; n];

    // Views are folded in list order so the summation order is fixed.
    for view in views {
        let projections = visible_projections(view, pts, &params.visibility)?;
        let center = view.center();
        sums.par_chunks_mut(classes)
            .zip(valid.par_iter_mut())
            .zip(visible.par_iter_mut())
            .enumerate()
            .try_for_each(|(i, ((acc, val), vis))| -> Result<()> {
                let Some(pr) = projections[i] else { return Ok(()) };
                *vis += 1;
                let dir = pts[i] - center;
                if dir.norm() == 0.0 {
                    return Ok(());
                }
                let theta = angular_deviation_deg(&normals[i], &dir);
                if !in_weight_interval(theta) {
                    return Ok(());
                }
                *val += 1;
                for (c, a) in acc.iter_mut().enumerate() {
                    *a += view.sample_heatmap(c, pr.u, pr.v)?;
                }
                Ok(())
            })?;
    }

    let count = |i: usize| match params.view_count {
        ViewCountMode::InInterval => valid[i],
        ViewCountMode::AllVisible => visible[i],
    };
    let mut labels = vec![catalog.background(); n];
    let mut view_counts = vec![0u32; n];
    for i in 0..n {
        let nv = count(i);
        view_counts[i] = nv;
        let row = &mut sums[i * classes..(i + 1) * classes];
        if nv == 0 || valid[i] == 0 {
            row.iter_mut().for_each(|s| *s = 0.0);
            continue;
        }
        let w = 1.0 / nv as f64;
        row.iter_mut().for_each(|s| *s *= w);
        labels[i] = catalog.argmax(row);
    }
    SegmentedCloud::from_parts(cloud.clone(), catalog.clone(), sums, labels, view_counts)
}
