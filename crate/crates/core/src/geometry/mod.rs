//! Point-cloud types and neighborhood queries shared by every stage.

pub(crate) mod graph;
mod kdtree;
mod normals;

pub use graph::{build_knn_graph, NeighborGraph};
pub use kdtree::{lex_cmp, KdTree, Neighbor};
pub use normals::{estimate_normals, NormalOrientation, DEFAULT_NORMAL_K};

use crate::error::{Error, Result};
use nalgebra::{Point3, Vector3};

/// Tolerance on stored normal lengths.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Positions with optional per-point normals and colors.
///
/// Parallel arrays always have equal length, positions are finite and stored
/// normals are unit length. The type is immutable once built; the `with_*`
/// builders consume and re-validate.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<Point3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
    colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Point3<f64>>) -> Result<Self> {
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidCloud(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { positions, normals: None, colors: None })
    }

    pub fn with_normals(mut self, normals: Vec<Vector3<f64>>) -> Result<Self> {
        if normals.len() != self.positions.len() {
            return Err(Error::InvalidCloud(format!(
                "{} normals for {} points",
                normals.len(),
                self.positions.len()
            )));
        }
        if let Some(i) = normals.iter().position(|n| (n.norm() - 1.0).abs() > UNIT_TOLERANCE) {
            return Err(Error::InvalidCloud(format!(
                "normal {i} has length {}",
                normals[i].norm()
            )));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_colors(mut self, colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.len() != self.positions.len() {
            return Err(Error::InvalidCloud(format!(
                "{} colors for {} points",
                colors.len(),
                self.positions.len()
            )));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3<f64>] {
        &self.positions
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    /// Sub-cloud made of the given point indices, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            normals: self.normals.as_ref().map(|n| indices.iter().map(|&i| n[i]).collect()),
            colors: self.colors.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        centroid(&self.positions)
    }
}

pub fn centroid(points: &[Point3<f64>]) -> Option<Point3<f64>> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Some(Point3::from(sum / points.len() as f64))
}

/// Mean distance from every point to its `k` nearest neighbors.
///
/// Zero distances are allowed here (contracted clouds bunch up).
pub fn local_extents(points: &[Point3<f64>], k: usize) -> Result<Vec<f64>> {
    if points.len() < k + 1 {
        return Err(Error::TooFewPoints { needed: k + 1, got: points.len() });
    }
    use rayon::prelude::*;
    let tree = KdTree::new(points);
    Ok((0..points.len())
        .into_par_iter()
        .map(|i| {
            let nn = tree.knn(&points[i], k, Some(i));
            nn.iter().map(|n| n.distance).sum::<f64>() / k as f64
        })
        .collect())
}
