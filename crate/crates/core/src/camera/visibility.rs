use super::{CameraView, Projection};
use crate::error::{Error, Result};
use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Point-splat occlusion test settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisibilityParams {
    /// Radius of the disc each point writes into the depth buffer, pixels.
    pub splat_radius_px: f64,
    /// A point stays visible while its depth is within this relative margin
    /// of the buffer minimum at its pixel.
    pub depth_tol_rel: f64,
    /// With `false` every in-frame point in front of the camera is visible.
    pub occlusion: bool,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self { splat_radius_px: 2.0, depth_tol_rel: 0.01, occlusion: true }
    }
}

impl VisibilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.splat_radius_px > 0.0 && self.splat_radius_px.is_finite()) {
            return Err(Error::param("splat_radius_px", "must be positive"));
        }
        if !(self.depth_tol_rel > 0.0 && self.depth_tol_rel.is_finite()) {
            return Err(Error::param("depth_tol_rel", "must be positive"));
        }
        Ok(())
    }
}

/// Projection of every point that is visible in `view`, `None` otherwise.
pub fn visible_projections(
    view: &CameraView,
    points: &[Point3<f64>],
    params: &VisibilityParams,
) -> Result<Vec<Option<Projection>>> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::Empty("visibility needs at least one point"));
    }
    let projections: Vec<Option<Projection>> = points
        .par_iter()
        .map(|p| view.project(p).filter(|pr| pr.in_bounds))
        .collect();
    if !params.occlusion {
        return Ok(projections);
    }

    let w = view.intrinsics().width as usize;
    let h = view.intrinsics().height as usize;
    let mut depth = vec![f64::INFINITY; w * h];
    let r = params.splat_radius_px;
    let ri = r.floor() as i64;
    for pr in projections.iter().flatten() {
        let (px, py) = (pr.u.floor() as i64, pr.v.floor() as i64);
        for dy in -ri..=ri {
            let y = py + dy;
            if y < 0 || y >= h as i64 {
                continue;
            }
            for dx in -ri..=ri {
                let x = px + dx;
                if x < 0 || x >= w as i64 || ((dx * dx + dy * dy) as f64) > r * r {
                    continue;
                }
                let cell = &mut depth[y as usize * w + x as usize];
                if pr.depth < *cell {
                    *cell = pr.depth;
                }
            }
        }
    }
    let tol = 1.0 + params.depth_tol_rel;
    Ok(projections
        .into_par_iter()
        .map(|pr| {
            pr.filter(|pr| {
                let cell = depth[pr.v.floor() as usize * w + pr.u.floor() as usize];
                pr.depth <= tol * cell
            })
        })
        .collect())
}

/// Per-point visibility flags for one view.
pub fn visibility_mask(
    view: &CameraView,
    points: &[Point3<f64>],
    params: &VisibilityParams,
) -> Result<Vec<bool>> {
    Ok(visible_projections(view, points, params)?.iter().map(Option::is_some).collect())
}
