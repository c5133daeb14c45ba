//! Pinhole views: projection, splat-buffer visibility and heatmap sampling.
//!
//! Pixel `(i, j)` covers `[i, i + 1) x [j, j + 1)`; its center sits at
//! `(i + 0.5, j + 0.5)`. A principal point of `(w / 2, h / 2)` is therefore
//! the exact image center.

mod raster;
mod visibility;

pub use raster::Raster;
pub use visibility::{visibility_mask, visible_projections, VisibilityParams};

use crate::error::{Error, Result};
use nalgebra::{Matrix3, Point3, Vector3};

/// Orthonormality tolerance enforced on a constructed view.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// Result of projecting a world point into a view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Distance along the optical axis, meters.
    pub depth: f64,
    pub in_bounds: bool,
}

/// One undistorted pinhole camera plus its per-class heatmaps.
///
/// The pose maps world to camera: `X_c = R * X_w + t`, camera looking down
/// +z with +x right and +y down in the image.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    name: String,
    intrinsics: Intrinsics,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    heatmaps: Vec<Raster>,
}

impl CameraView {
    pub fn new(
        name: impl Into<String>,
        intrinsics: Intrinsics,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let name = name.into();
        let bad = |reason: String| Error::InvalidCamera { name: name.clone(), reason };
        let Intrinsics { fx, fy, cx, cy, width, height } = intrinsics;
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(bad(format!("focal lengths must be positive, got fx={fx}, fy={fy}")));
        }
        if width == 0 || height == 0 {
            return Err(bad(format!("empty image {width}x{height}")));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(bad(format!("principal point ({cx}, {cy}) outside {width}x{height}")));
        }
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(bad("non-finite translation".into()));
        }
        let err = orthonormality_error(&rotation);
        if !(err <= ROTATION_TOLERANCE) {
            return Err(bad(format!("rotation is not orthonormal (max |R^T R - I| = {err:.3e})")));
        }
        let det = rotation.determinant();
        if det < 0.0 {
            return Err(Error::ImproperRotation { name, det });
        }
        Ok(Self { name, intrinsics, rotation, translation, heatmaps: Vec::new() })
    }

    /// Attach one raster per class, in catalog order.
    pub fn with_heatmaps(mut self, heatmaps: Vec<Raster>) -> Result<Self> {
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        for (c, r) in heatmaps.iter().enumerate() {
            if r.width() != w || r.height() != h {
                return Err(Error::InvalidCamera {
                    name: self.name.clone(),
                    reason: format!(
                        "heatmap {c} is {}x{}, image is {w}x{h}",
                        r.width(),
                        r.height()
                    ),
                });
            }
        }
        self.heatmaps = heatmaps;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn heatmaps(&self) -> &[Raster] {
        &self.heatmaps
    }

    /// Camera center in world coordinates, `-R^T t`.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    /// Pinhole projection; `None` when the point is not in front of the camera.
    pub fn project(&self, point: &Point3<f64>) -> Option<Projection> {
        let pc = self.rotation * point.coords + self.translation;
        if !(pc.z > 0.0) {
            return None;
        }
        let Intrinsics { fx, fy, cx, cy, width, height } = self.intrinsics;
        let u = fx * pc.x / pc.z + cx;
        let v = fy * pc.y / pc.z + cy;
        let in_bounds = (0.0..width as f64).contains(&u) && (0.0..height as f64).contains(&v);
        Some(Projection { u, v, depth: pc.z, in_bounds })
    }

    /// Inverse of [`project`](Self::project) for a known depth.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Point3<f64> {
        let Intrinsics { fx, fy, cx, cy, .. } = self.intrinsics;
        let pc = Vector3::new((u - cx) / fx * depth, (v - cy) / fy * depth, depth);
        Point3::from(self.rotation.transpose() * (pc - self.translation))
    }

    /// World-space unit direction of the ray through pixel position `(u, v)`.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vector3<f64> {
        let Intrinsics { fx, fy, cx, cy, .. } = self.intrinsics;
        let dc = Vector3::new((u - cx) / fx, (v - cy) / fy, 1.0);
        (self.rotation.transpose() * dc).normalize()
    }

    /// Bilinear sample of the class raster at continuous pixel coordinates.
    pub fn sample_heatmap(&self, class_id: usize, u: f64, v: f64) -> Result<f64> {
        let raster = self
            .heatmaps
            .get(class_id)
            .ok_or_else(|| Error::UnknownClass(format!("class index {class_id}")))?;
        raster.sample(u, v)
    }
}

/// Largest absolute entry of `R^T R - I`.
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).amax()
}

/// World-to-camera rotation for a camera at `eye` looking at `target`, with
/// image-down aligned as closely as possible to `-up`.
pub fn look_at(eye: &Point3<f64>, target: &Point3<f64>, up: &Vector3<f64>) -> Matrix3<f64> {
    let z = (target - eye).normalize();
    let mut x = z.cross(up);
    if x.norm() < 1e-12 {
        x = z.cross(&Vector3::x());
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}
