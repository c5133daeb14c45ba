//! Iterative Laplacian contraction of a point set toward its curve skeleton.
//!
//! Each iteration minimizes, independently per coordinate,
//!
//! ```text
//! |W_L L X|^2 + sum_i W_H,i^2 |x_i - p_i|^2
//! ```
//!
//! where `p_i` are the points entering the iteration and `L` is the Gaussian
//! k-NN Laplacian of the input points, built once. The minimizer solves the
//! normal equations
//! `(L^T W_L^2 L + W_H^2) X = W_H^2 P`. Between iterations the contraction
//! weight is amplified and every attraction weight is reset to
//! `w_H0 * S_i^0 / S_i`, with `S_i` the point's current mean distance to its
//! original k nearest neighbors.

use super::laplacian::NeighborTopology;
use super::sparse::{EnvelopeCholesky, SparseMatrix};
use crate::error::{Error, Result};
use crate::geometry::centroid;
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractionParams {
    /// Neighborhood size for the Laplacian and for local extents. Both use
    /// the neighbors of the input points throughout.
    pub k: usize,
    pub initial_contraction_weight: f64,
    pub initial_attraction_weight: f64,
    /// Factor applied to the contraction weight after every iteration.
    pub contraction_amplification: f64,
    pub max_iterations: usize,
    /// Stop once the mean local extent drops below this fraction of its
    /// initial value.
    pub convergence_ratio: f64,
    /// Upper bound on the amplified contraction weight.
    pub max_contraction_weight: f64,
    /// Upper bound on any attraction weight. Points that clump off the axis
    /// early have a tiny local extent; a low bound keeps them from freezing
    /// there.
    pub max_attraction_weight: f64,
    pub anchor: Anchor,
}

/// Positions the attraction term pulls toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// The input points, for every iteration.
    Original,
    /// The points entering each iteration.
    #[default]
    Previous,
}

impl Default for ContractionParams {
    fn default() -> Self {
        Self {
            k: 8,
            initial_contraction_weight: 1.0,
            initial_attraction_weight: 1.0,
            contraction_amplification: 3.0,
            max_iterations: 20,
            convergence_ratio: 0.01,
            max_contraction_weight: 2048.0,
            max_attraction_weight: 4.0,
            anchor: Anchor::Previous,
        }
    }
}

impl ContractionParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        if self.k == 0 {
            return Err(Error::param("k", "must be positive"));
        }
        positive("initial_contraction_weight", self.initial_contraction_weight)?;
        positive("initial_attraction_weight", self.initial_attraction_weight)?;
        positive("convergence_ratio", self.convergence_ratio)?;
        positive("max_contraction_weight", self.max_contraction_weight)?;
        positive("max_attraction_weight", self.max_attraction_weight)?;
        if !(self.contraction_amplification > 1.0 && self.contraction_amplification.is_finite()) {
            return Err(Error::param("contraction_amplification", "must be greater than 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractionStop {
    /// Mean extent fell below the convergence ratio.
    Converged,
    MaxIterations,
    /// An iteration would have grown the mean extent; it was discarded.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionIteration {
    pub contraction_weight: f64,
    /// Mean local extent of the points entering the iteration.
    pub extent_before: f64,
    /// Mean local extent of the solution.
    pub extent_after: f64,
    /// Objective at the incoming points (weights fixed).
    pub energy_before: f64,
    /// Objective at the solution.
    pub energy_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contraction {
    pub points: Vec<Point3<f64>>,
    pub initial_extent: f64,
    pub iterations: Vec<ContractionIteration>,
    pub stop: ContractionStop,
}

/// Contract `points` toward their medial axis.
pub fn contract(points: &[Point3<f64>], params: &ContractionParams) -> Result<Contraction> {
    params.validate()?;
    let n = points.len();
    let k = params.k;
    if n < k + 1 {
        return Err(Error::TooFewPoints { needed: k + 1, got: n });
    }
    // Work in centered coordinates; L annihilates constants so this is exact.
    let center = centroid(points).expect("non-empty");
    let mut current: Vec<Point3<f64>> = points.iter().map(|p| Point3::from(p - center)).collect();
    let original = current.clone();

    let topology = NeighborTopology::new(&current, k)?;
    let laplacian = topology.laplacian(&current);
    let initial_local = topology.local_extents(&current);
    let initial_extent = mean(&initial_local);
    let mut extent = initial_extent;
    let mut wl = params.initial_contraction_weight;
    let mut wh = vec![params.initial_attraction_weight; n];
    let mut iterations = Vec::new();
    let mut stop = ContractionStop::MaxIterations;

    for it in 0..params.max_iterations {
        let wh2: Vec<f64> = wh.iter().map(|w| w * w).collect();
        let normal = laplacian.weighted_normal_matrix(&vec![wl; n], &wh2);
        let chol = EnvelopeCholesky::factor(&normal).map_err(|e| Error::SolverFailure {
            iteration: it,
            reason: format!("pivot {:.3e} at point {}", e.pivot, e.row),
        })?;
        let anchors = match params.anchor {
            Anchor::Original => &original,
            Anchor::Previous => &current,
        };
        let mut next = vec![Point3::origin(); n];
        for axis in 0..3 {
            let rhs: Vec<f64> = (0..n).map(|i| wh2[i] * anchors[i][axis]).collect();
            let sol = chol.solve(&rhs);
            for (p, v) in next.iter_mut().zip(sol) {
                p[axis] = v;
            }
        }
        if let Some(i) = next.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::SolverFailure {
                iteration: it,
                reason: format!("non-finite solution at point {i}"),
            });
        }

        let energy_before = energy(&laplacian, wl, &wh2, &current, anchors);
        let energy_after = energy(&laplacian, wl, &wh2, &next, anchors);
        let local = topology.local_extents(&next);
        let next_extent = mean(&local);
        if next_extent > extent {
            stop = ContractionStop::Stalled;
            break;
        }
        iterations.push(ContractionIteration {
            contraction_weight: wl,
            extent_before: extent,
            extent_after: next_extent,
            energy_before,
            energy_after,
        });
        current = next;
        extent = next_extent;
        if extent < params.convergence_ratio * initial_extent {
            stop = ContractionStop::Converged;
            break;
        }
        wl = (wl * params.contraction_amplification).min(params.max_contraction_weight);
        for (w, (s0, s)) in wh.iter_mut().zip(initial_local.iter().zip(&local)) {
            *w = if *s > 0.0 {
                (params.initial_attraction_weight * s0 / s).min(params.max_attraction_weight)
            } else {
                params.max_attraction_weight
            };
        }
    }

    Ok(Contraction {
        points: current.into_iter().map(|p| p + center.coords).collect(),
        initial_extent,
        iterations,
        stop,
    })
}

/// `|W_L L X|^2 + sum_i W_H,i^2 |x_i - a_i|^2` with anchors `a`.
fn energy(
    laplacian: &SparseMatrix,
    wl: f64,
    wh2: &[f64],
    x: &[Point3<f64>],
    anchors: &[Point3<f64>],
) -> f64 {
    let mut total = 0.0;
    for axis in 0..3 {
        let coords: Vec<f64> = x.iter().map(|p| p[axis]).collect();
        total += laplacian.mul_vec(&coords).iter().map(|v| wl * wl * v * v).sum::<f64>();
    }
    total
        + x.iter()
            .zip(anchors)
            .zip(wh2)
            .map(|((p, a), w2)| w2 * (p - a).norm_squared())
            .sum::<f64>()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Distance from `p` to the segment `a`-`b`.
pub(crate) fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab: Vector3<f64> = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collinear_points_stay_on_their_line() {
        let origin = Point3::new(0.3, -0.2, 1.0);
        let dir = Vector3::new(1.0, 2.0, -0.5).normalize();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<_> = (0..80).map(|_| origin + dir * rng.random_range(0.0..0.5)).collect();
        let out = contract(&pts, &ContractionParams::default()).unwrap();
        for p in &out.points {
            let off = (p - origin) - dir * (p - origin).dot(&dir);
            assert!(off.norm() < 1e-6, "{}", off.norm());
        }
    }

    #[test]
    fn too_few_points() {
        let pts = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)];
        assert!(matches!(
            contract(&pts, &ContractionParams::default()),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn rejects_bad_params() {
        let pts: Vec<_> = (0..20).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        for params in [
            ContractionParams { contraction_amplification: 1.0, ..Default::default() },
            ContractionParams { max_iterations: 0, ..Default::default() },
            ContractionParams { initial_attraction_weight: 0.0, ..Default::default() },
            ContractionParams { k: 0, ..Default::default() },
        ] {
            assert!(contract(&pts, &params).is_err());
        }
    }

    #[test]
    fn energy_and_extent_decrease_each_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts: Vec<_> = (0..400)
            .map(|_| {
                Point3::new(
                    rng.random_range(0.0..0.3),
                    rng.random_range(-0.004..0.004),
                    rng.random_range(-0.0005..0.0005),
                )
            })
            .collect();
        let out = contract(&pts, &ContractionParams::default()).unwrap();
        assert!(!out.iterations.is_empty());
        for it in &out.iterations {
            assert!(it.extent_after <= it.extent_before);
            assert!(it.energy_after <= it.energy_before * (1.0 + 1e-12));
        }
    }

    #[test]
    fn segment_distance() {
        let a = Point3::origin();
        let b = Point3::new(1.0, 0.0, 0.0);
        assert_eq!(point_segment_distance(&Point3::new(0.5, 2.0, 0.0), &a, &b), 2.0);
        assert_eq!(point_segment_distance(&Point3::new(-3.0, 0.0, 4.0), &a, &b), 5.0);
    }
}
