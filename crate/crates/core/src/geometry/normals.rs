use super::{KdTree, PointCloud};
use crate::error::{Error, Result};
use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use rayon::prelude::*;

pub const DEFAULT_NORMAL_K: usize = 16;

/// Which way estimated normals should face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalOrientation {
    /// Flip each normal to face this point (e.g. the mean camera center).
    Toward(Point3<f64>),
    /// Flip into the +z hemisphere.
    PositiveZ,
}

/// PCA normals over each point's `k` nearest neighbors (plus the point itself).
pub fn estimate_normals(
    cloud: &PointCloud,
    k: usize,
    orientation: NormalOrientation,
) -> Result<PointCloud> {
    if k < 3 {
        return Err(Error::param("k", format!("normal estimation needs k >= 3, got {k}")));
    }
    let pts = cloud.positions();
    if pts.len() < k + 1 {
        return Err(Error::TooFewPoints { needed: k + 1, got: pts.len() });
    }
    let tree = KdTree::new(pts);
    let normals: Vec<Vector3<f64>> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let nn = tree.knn(&pts[i], k, Some(i));
            let mut mean = pts[i].coords;
            for n in &nn {
                mean += pts[n.index].coords;
            }
            mean /= (nn.len() + 1) as f64;
            let mut cov = Matrix3::zeros();
            let d = pts[i].coords - mean;
            cov += d * d.transpose();
            for n in &nn {
                let d = pts[n.index].coords - mean;
                cov += d * d.transpose();
            }
            let normal = smallest_eigenvector(&cov);
            orient(normal, &pts[i], orientation)
        })
        .collect();
    cloud.clone().with_normals(normals)
}

pub(crate) fn smallest_eigenvector(cov: &Matrix3<f64>) -> Vector3<f64> {
    let eig = SymmetricEigen::new(*cov);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("3 eigenvalues");
    eig.eigenvectors.column(imin).normalize()
}

fn orient(n: Vector3<f64>, p: &Point3<f64>, orientation: NormalOrientation) -> Vector3<f64> {
    let s = match orientation {
        NormalOrientation::Toward(view) => n.dot(&(view - p)),
        NormalOrientation::PositiveZ => {
            if n.z != 0.0 {
                n.z
            } else if n.y != 0.0 {
                n.y
            } else {
                n.x
            }
        }
    };
    if s < 0.0 {
        -n
    } else {
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn planar_cloud_has_vertical_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<_> =
            (0..100).map(|_| Point3::new(rng.random::<f64>(), rng.random::<f64>(), 0.0)).collect();
        let cloud = PointCloud::new(pts).unwrap();
        for k in [3, 8, 16] {
            let out = estimate_normals(&cloud, k, NormalOrientation::PositiveZ).unwrap();
            for n in out.normals().unwrap() {
                assert!((n - Vector3::z()).norm() < 1e-6, "{n:?}");
            }
        }
    }

    #[test]
    fn too_few_points_and_small_k_are_rejected() {
        let cloud = PointCloud::new(vec![Point3::origin(); 4]).unwrap();
        assert!(matches!(
            estimate_normals(&cloud, 5, NormalOrientation::PositiveZ),
            Err(Error::TooFewPoints { .. })
        ));
        assert!(matches!(
            estimate_normals(&cloud, 2, NormalOrientation::PositiveZ),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn sphere_normals_are_radial() {
        // Fibonacci sphere: well spread, no duplicates.
        let n = 500;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let pts: Vec<_> = (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).sqrt();
                let phi = golden * i as f64;
                Point3::new(r * phi.cos(), y, r * phi.sin())
            })
            .collect();
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let view = Point3::new(5.0, 0.0, 0.0);
        let out = estimate_normals(&cloud, 12, NormalOrientation::Toward(view)).unwrap();
        let cos5 = 5f64.to_radians().cos();
        for (p, nrm) in pts.iter().zip(out.normals().unwrap()) {
            let radial = p.coords.normalize();
            assert!(nrm.dot(&radial).abs() >= cos5);
            assert!(nrm.dot(&(view - p)) >= 0.0);
        }
    }

    #[test]
    fn normals_rotate_with_the_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<_> = (0..200)
            .map(|_| {
                let x: f64 = rng.random();
                let y: f64 = rng.random();
                Point3::new(x, y, 0.3 * x * x - 0.2 * y)
            })
            .collect();
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let rotated: Vec<_> = pts.iter().map(|p| rot * p).collect();
        let a = estimate_normals(&PointCloud::new(pts).unwrap(), 10, NormalOrientation::PositiveZ)
            .unwrap();
        let b =
            estimate_normals(&PointCloud::new(rotated).unwrap(), 10, NormalOrientation::PositiveZ)
                .unwrap();
        for (na, nb) in a.normals().unwrap().iter().zip(b.normals().unwrap()) {
            let ra = rot * na;
            assert!((ra - nb).norm() < 1e-6 || (ra + nb).norm() < 1e-6);
        }
    }
}
