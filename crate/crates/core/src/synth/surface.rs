use nalgebra::{Point3, Vector3};

/// Wall surface parameterized by arc-length coordinates `(u, v)`; `v` runs
/// along world +y and the wall faces +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    /// The plane `z = 0` with `(u, v) = (x, y)`.
    Plane,
    /// A cylinder of the given radius around the line `x = 0, z = -radius`,
    /// bulging toward +z.
    Cylinder { radius: f64 },
}

impl Surface {
    pub fn point(&self, u: f64, v: f64) -> Point3<f64> {
        match *self {
            Surface::Plane => Point3::new(u, v, 0.0),
            Surface::Cylinder { radius } => {
                let phi = u / radius;
                Point3::new(radius * phi.sin(), v, radius * phi.cos() - radius)
            }
        }
    }

    pub fn normal(&self, u: f64, _v: f64) -> Vector3<f64> {
        match *self {
            Surface::Plane => Vector3::z(),
            Surface::Cylinder { radius } => {
                let phi = u / radius;
                Vector3::new(phi.sin(), 0.0, phi.cos())
            }
        }
    }

    /// Unit tangent along increasing `u`.
    pub fn tangent_u(&self, u: f64) -> Vector3<f64> {
        match *self {
            Surface::Plane => Vector3::x(),
            Surface::Cylinder { radius } => {
                let phi = u / radius;
                Vector3::new(phi.cos(), 0.0, -phi.sin())
            }
        }
    }

    /// First hit of the ray `origin + t * dir`, `t > 0`, as `(t, u, v)`.
    pub fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        match *self {
            Surface::Plane => {
                if dir.z == 0.0 {
                    return None;
                }
                let t = -origin.z / dir.z;
                (t > 0.0).then(|| (t, origin.x + t * dir.x, origin.y + t * dir.y))
            }
            Surface::Cylinder { radius } => {
                let (ox, oz) = (origin.x, origin.z + radius);
                let a = dir.x * dir.x + dir.z * dir.z;
                if a == 0.0 {
                    return None;
                }
                let b = 2.0 * (ox * dir.x + oz * dir.z);
                let c = ox * ox + oz * oz - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t = [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)].into_iter().find(|&t| t > 0.0)?;
                let p = origin + dir * t;
                let phi = p.x.atan2(p.z + radius);
                Some((t, radius * phi, p.y))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_hit_recovers_parameters() {
        let s = Surface::Cylinder { radius: 3.0 };
        let p = s.point(0.7, -0.2);
        let origin = p + s.normal(0.7, -0.2) * 2.0 + Vector3::new(0.3, 0.1, 0.0);
        let (t, u, v) = s.intersect(&origin, &(p - origin).normalize()).unwrap();
        assert!((u - 0.7).abs() < 1e-12 && (v + 0.2).abs() < 1e-12);
        assert!((t - (p - origin).norm()).abs() < 1e-12);
        assert!((s.point(u, v) - p).norm() < 1e-12);
    }

    #[test]
    fn plane_hit() {
        let (t, u, v) = Surface::Plane.intersect(&Point3::new(1.0, 2.0, 4.0), &-Vector3::z()).unwrap();
        assert_eq!((t, u, v), (4.0, 1.0, 2.0));
        assert!(Surface::Plane.intersect(&Point3::new(0.0, 0.0, 4.0), &Vector3::z()).is_none());
    }
}
