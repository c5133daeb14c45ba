//! 2.5D bounding polygons for areal damage: PCA planarization followed by an
//! alpha complex in normalized plane coordinates.

mod alpha;
mod pca;

pub use alpha::{
    alpha_boundary, alpha_triangles, circumradius, contains, convex_hull_area, delaunay_triangles, signed_area,
    AlphaBoundary,
};
pub use pca::{pca_project, Normalization, PlaneFrame, COLLINEARITY_TOLERANCE};

use crate::clustering::InstanceCloud;
use crate::error::{Error, Result};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolygonParams {
    /// Alpha in normalized plane coordinates; triangles with circumradius
    /// above `1 / alpha` are dropped.
    pub alpha: f64,
    /// Minimum explained variance of the two plane axes to call a patch planar.
    pub planarity_threshold: f64,
    pub normalization: Normalization,
}

impl Default for PolygonParams {
    fn default() -> Self {
        Self { alpha: 100.0, planarity_threshold: 0.95, normalization: Normalization::PerAxis }
    }
}

impl PolygonParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", format!("must be positive, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.planarity_threshold) {
            return Err(Error::param("planarity_threshold", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Closed polygon around one areal-damage instance. Vertices are instance
/// points, not projections; the loop closes implicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingPolygon {
    pub instance_id: Option<usize>,
    pub vertices: Vec<Point3<f64>>,
    /// Positions of `vertices` within the input point list.
    pub vertex_indices: Vec<usize>,
    /// Further boundary loops (holes, islands), as input point indices.
    pub auxiliary_loops: Vec<Vec<usize>>,
    pub planar: bool,
    pub alpha: f64,
    pub frame: PlaneFrame,
    /// Enclosed area in the unscaled PCA plane (square meters).
    pub plane_area: f64,
}

pub fn extract_polygon(instance: &InstanceCloud, params: &PolygonParams) -> Result<BoundingPolygon> {
    let mut polygon = polygon_of_points(&instance.positions, params)?;
    polygon.instance_id = Some(instance.id);
    Ok(polygon)
}

/// Bounding polygon of a bare point set.
pub fn polygon_of_points(points: &[Point3<f64>], params: &PolygonParams) -> Result<BoundingPolygon> {
    params.validate()?;
    let (frame, uv) = pca_project(points, params.normalization)?;
    let boundary = alpha_boundary(&uv, params.alpha)?;
    let plane: Vec<_> = points.iter().map(|p| frame.to_plane(p)).collect();
    Ok(BoundingPolygon {
        instance_id: None,
        vertices: boundary.main.iter().map(|&i| points[i]).collect(),
        plane_area: signed_area(&plane, &boundary.main).abs(),
        vertex_indices: boundary.main,
        auxiliary_loops: boundary.auxiliary,
        planar: frame.explained_variance >= params.planarity_threshold,
        alpha: params.alpha,
        frame,
    })
}
