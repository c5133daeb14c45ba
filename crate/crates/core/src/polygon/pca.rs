use crate::error::{Error, Result};
use crate::geometry::centroid;
use nalgebra::{Matrix3, Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};

/// Eigenvalue ratio below which the second principal axis counts as absent.
pub const COLLINEARITY_TOLERANCE: f64 = 1e-10;

/// How plane coordinates are scaled into the unit square before alpha filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Each axis is min-max scaled to [0, 1] on its own.
    #[default]
    PerAxis,
    /// Both axes share the larger range, preserving the aspect ratio.
    Joint,
}

/// Best-fit plane of a point set with its normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFrame {
    pub centroid: Point3<f64>,
    /// Principal axes by decreasing variance; `axes[2]` is the plane normal and
    /// the basis is right-handed.
    pub axes: [Vector3<f64>; 3],
    /// Share of the total variance carried by the first two axes.
    pub explained_variance: f64,
    /// Minimum plane coordinate along each axis.
    pub offset: [f64; 2],
    /// Divisor applied after subtracting `offset`.
    pub scale: [f64; 2],
}

impl PlaneFrame {
    /// Unscaled in-plane coordinates (meters).
    pub fn to_plane(&self, p: &Point3<f64>) -> Point2<f64> {
        let d = p - self.centroid;
        Point2::new(d.dot(&self.axes[0]), d.dot(&self.axes[1]))
    }

    pub fn normalize(&self, p: &Point3<f64>) -> Point2<f64> {
        let q = self.to_plane(p);
        Point2::new((q.x - self.offset[0]) / self.scale[0], (q.y - self.offset[1]) / self.scale[1])
    }

    /// Offset along the normal.
    pub fn residual(&self, p: &Point3<f64>) -> f64 {
        (p - self.centroid).dot(&self.axes[2])
    }
}

/// Fit a plane by PCA and map the points into normalized plane coordinates.
pub fn pca_project(points: &[Point3<f64>], normalization: Normalization) -> Result<(PlaneFrame, Vec<Point2<f64>>)> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: points.len() });
    }
    let c = centroid(points).expect("non-empty");
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;
    let eig = cov.symmetric_eigen();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    if values[0] <= 0.0 {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    if values[1] <= COLLINEARITY_TOLERANCE * values[0] {
        return Err(Error::Degenerate("points are collinear".into()));
    }
    let e1 = canonical_sign(eig.eigenvectors.column(order[0]).into_owned());
    let e2 = canonical_sign(eig.eigenvectors.column(order[1]).into_owned());
    let e3 = e1.cross(&e2).normalize();
    let explained = (values[0] + values[1]) / values.iter().sum::<f64>();

    let mut frame = PlaneFrame {
        centroid: c,
        axes: [e1, e2, e3],
        explained_variance: explained.clamp(0.0, 1.0),
        offset: [0.0; 2],
        scale: [1.0; 2],
    };
    let plane: Vec<Point2<f64>> = points.iter().map(|p| frame.to_plane(p)).collect();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for q in &plane {
        for a in 0..2 {
            lo[a] = lo[a].min(q[a]);
            hi[a] = hi[a].max(q[a]);
        }
    }
    let range = [hi[0] - lo[0], hi[1] - lo[1]];
    frame.offset = lo;
    frame.scale = match normalization {
        Normalization::PerAxis => range,
        Normalization::Joint => [range[0].max(range[1]); 2],
    };
    let normalized = plane
        .iter()
        .map(|q| Point2::new((q.x - lo[0]) / frame.scale[0], (q.y - lo[1]) / frame.scale[1]))
        .collect();
    Ok((frame, normalized))
}

/// Flips `v` so its largest-magnitude component is positive.
fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let i = v.iamax();
    if v[i] < 0.0 {
        -v
    } else {
        v
    }
}
