//! Synthetic inspection scenes with exact ground truth.
//!
//! A wall is sampled on a jittered grid, damages are drawn in the wall's
//! `(u, v)` coordinates, and every camera of a ring renders one-hot class
//! heatmaps by casting a ray through each pixel center.

mod surface;

pub use surface::Surface;

use crate::camera::{CameraView, Raster};
use crate::error::{Error, Result};
use crate::eval::{AnnotatedInstance, AnnotationSet, Geometry};
use crate::geometry::PointCloud;
use crate::io::{self, BitDepth, CameraEntry, PlyEncoding, SceneBundle, SceneManifest};
use crate::mapping::ClassCatalog;
use nalgebra::{Matrix3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallSpec {
    pub width: f64,
    pub height: f64,
    /// Grid spacing of the sampled points (m).
    pub spacing: f64,
    /// Uniform jitter amplitude as a fraction of the spacing.
    pub jitter: f64,
    /// Bend the wall into a cylinder of this radius.
    pub curvature_radius: Option<f64>,
}

impl Default for WallSpec {
    fn default() -> Self {
        Self { width: 2.0, height: 1.0, spacing: 0.002, jitter: 0.25, curvature_radius: None }
    }
}

/// A crack made of one or more polylines in wall coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrackSpec {
    #[serde(default = "crack_class")]
    pub class: String,
    pub branches: Vec<Vec<[f64; 2]>>,
    /// Full opening width (m).
    pub width: f64,
}

fn crack_class() -> String {
    "crack".into()
}

/// A polygonal areal damage in wall coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub class: String,
    pub outline: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraRing {
    pub count: usize,
    /// Ring radius in the wall's tangent plane (m).
    pub radius: f64,
    /// Distance of the ring plane from the wall (m).
    pub distance: f64,
    /// Wall coordinates every camera looks at.
    pub target: [f64; 2],
    pub width: u32,
    pub height: u32,
    pub focal: f64,
}

impl Default for CameraRing {
    fn default() -> Self {
        Self { count: 12, radius: 0.8, distance: 2.0, target: [0.0, 0.0], width: 1024, height: 768, focal: 800.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub classes: Vec<String>,
    pub background: String,
    pub wall: WallSpec,
    pub cracks: Vec<CrackSpec>,
    pub patches: Vec<PatchSpec>,
    pub cameras: CameraRing,
    /// Standard deviation of Gaussian noise added to every heatmap pixel.
    pub noise: f64,
    pub bit_depth: BitDepth,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        let catalog = ClassCatalog::default();
        Self {
            classes: catalog.names().to_vec(),
            background: catalog.name(catalog.background()).to_string(),
            wall: WallSpec::default(),
            cracks: Vec::new(),
            patches: Vec::new(),
            cameras: CameraRing::default(),
            noise: 0.0,
            bit_depth: BitDepth::Eight,
            seed: 0,
        }
    }
}

fn rectangle(cx: f64, cy: f64, w: f64, h: f64) -> Vec<[f64; 2]> {
    vec![[cx - w / 2.0, cy - h / 2.0], [cx + w / 2.0, cy - h / 2.0], [cx + w / 2.0, cy + h / 2.0], [cx - w / 2.0, cy + h / 2.0]]
}

impl SceneSpec {
    /// One straight crack and one Y-shaped crack.
    pub fn cracks() -> Self {
        Self {
            cracks: vec![
                CrackSpec { class: crack_class(), branches: vec![vec![[-0.85, -0.3], [-0.15, 0.35]]], width: 0.006 },
                CrackSpec {
                    class: crack_class(),
                    branches: vec![
                        vec![[0.45, 0.0], [0.2, -0.35]],
                        vec![[0.45, 0.0], [0.75, -0.3]],
                        vec![[0.45, 0.0], [0.5, 0.4]],
                    ],
                    width: 0.006,
                },
            ],
            ..Self::default()
        }
    }

    /// One rectangular spalling patch and one corrosion patch.
    pub fn areal() -> Self {
        Self {
            patches: vec![
                PatchSpec { class: "spalling".into(), outline: rectangle(-0.45, 0.0, 0.4, 0.3) },
                PatchSpec { class: "corrosion".into(), outline: rectangle(0.5, 0.05, 0.35, 0.35) },
            ],
            ..Self::default()
        }
    }

    pub fn catalog(&self) -> Result<ClassCatalog> {
        let bg = self
            .classes
            .iter()
            .position(|c| *c == self.background)
            .ok_or_else(|| Error::UnknownClass(self.background.clone()))?;
        ClassCatalog::new(self.classes.clone(), bg)
    }

    pub fn surface(&self) -> Surface {
        match self.wall.curvature_radius {
            Some(radius) => Surface::Cylinder { radius },
            None => Surface::Plane,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        let w = &self.wall;
        positive("wall.width", w.width)?;
        positive("wall.height", w.height)?;
        positive("wall.spacing", w.spacing)?;
        if !(0.0..0.5).contains(&w.jitter) {
            return Err(Error::param("wall.jitter", "must lie in [0, 0.5)"));
        }
        if let Some(r) = w.curvature_radius {
            positive("wall.curvature_radius", r)?;
            if w.width / r >= std::f64::consts::PI {
                return Err(Error::param("wall.curvature_radius", "wall would wrap past a half cylinder"));
            }
        }
        if (w.width / w.spacing) * (w.height / w.spacing) > 5e7 {
            return Err(Error::param("wall.spacing", "too many points"));
        }
        let catalog = self.catalog()?;
        let inside = |p: &[f64; 2]| p[0].abs() <= w.width / 2.0 && p[1].abs() <= w.height / 2.0;
        let damage_class = |name: &str| -> Result<usize> {
            let c = catalog.index_of(name)?;
            if c == catalog.background() {
                return Err(Error::param("class", "damages cannot use the background class"));
            }
            Ok(c)
        };
        for c in &self.cracks {
            damage_class(&c.class)?;
            positive("cracks.width", c.width)?;
            if c.branches.is_empty() || c.branches.iter().any(|b| b.len() < 2) {
                return Err(Error::param("cracks.branches", "every crack needs polylines of at least 2 vertices"));
            }
            if !c.branches.iter().flatten().all(inside) {
                return Err(Error::param("cracks.branches", "vertex outside the wall"));
            }
        }
        for p in &self.patches {
            damage_class(&p.class)?;
            if p.outline.len() < 3 || !p.outline.iter().all(inside) {
                return Err(Error::param("patches.outline", "needs 3 or more vertices inside the wall"));
            }
        }
        let r = &self.cameras;
        if r.count == 0 || r.width == 0 || r.height == 0 {
            return Err(Error::param("cameras", "count and image size must be positive"));
        }
        positive("cameras.distance", r.distance)?;
        positive("cameras.focal", r.focal)?;
        if !(r.radius >= 0.0) {
            return Err(Error::param("cameras.radius", "must be non-negative"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::param("noise", "must be non-negative"));
        }
        Ok(())
    }
}

/// A ground-truth 3D point seen by one camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerObservation {
    pub camera: String,
    pub marker: usize,
    pub position: [f64; 3],
    pub pixel: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub catalog: ClassCatalog,
    /// Wall samples with exact surface normals.
    pub cloud: PointCloud,
    /// Ground-truth class of every point.
    pub point_labels: Vec<usize>,
    pub cameras: Vec<CameraEntry>,
    /// Views with their rendered heatmaps attached.
    pub views: Vec<CameraView>,
    pub annotations: AnnotationSet,
    pub markers: Vec<MarkerObservation>,
}

/// Classifies wall coordinates: cracks first, then patches in list order.
struct DamageMap {
    background: usize,
    segments: Vec<([f64; 2], [f64; 2], f64, usize)>,
    patches: Vec<(Vec<[f64; 2]>, usize)>,
}

impl DamageMap {
    fn new(spec: &SceneSpec, catalog: &ClassCatalog) -> Result<Self> {
        let mut segments = Vec::new();
        for c in &spec.cracks {
            let class = catalog.index_of(&c.class)?;
            for b in &c.branches {
                for w in b.windows(2) {
                    segments.push((w[0], w[1], c.width / 2.0, class));
                }
            }
        }
        let patches = spec
            .patches
            .iter()
            .map(|p| Ok((p.outline.clone(), catalog.index_of(&p.class)?)))
            .collect::<Result<_>>()?;
        Ok(Self { background: catalog.background(), segments, patches })
    }

    fn classify(&self, u: f64, v: f64) -> usize {
        for &(a, b, half, class) in &self.segments {
            if segment_distance_2d([u, v], a, b) <= half {
                return class;
            }
        }
        for (outline, class) in &self.patches {
            if point_in_polygon([u, v], outline) {
                return *class;
            }
        }
        self.background
    }
}

pub fn segment_distance_2d(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (abx, aby) = (b[0] - a[0], b[1] - a[1]);
    let (apx, apy) = (p[0] - a[0], p[1] - a[1]);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 { ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (apx - t * abx).hypot(apy - t * aby)
}

/// Even-odd containment.
pub fn point_in_polygon(p: [f64; 2], outline: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = outline.len();
    for i in 0..n {
        let (a, b) = (outline[i], outline[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Camera frame built directly from the ring geometry.
struct RingCamera {
    name: String,
    eye: Point3<f64>,
    right: Vector3<f64>,
    down: Vector3<f64>,
    forward: Vector3<f64>,
}

impl RingCamera {
    fn pixel(&self, ring: &CameraRing, x: &Point3<f64>) -> Option<[f64; 2]> {
        let d = x - self.eye;
        let z = d.dot(&self.forward);
        if !(z > 0.0) {
            return None;
        }
        let (cx, cy) = (ring.width as f64 / 2.0, ring.height as f64 / 2.0);
        let u = ring.focal * d.dot(&self.right) / z + cx;
        let v = ring.focal * d.dot(&self.down) / z + cy;
        ((0.0..ring.width as f64).contains(&u) && (0.0..ring.height as f64).contains(&v)).then_some([u, v])
    }

    fn ray(&self, ring: &CameraRing, px: f64, py: f64) -> Vector3<f64> {
        let (cx, cy) = (ring.width as f64 / 2.0, ring.height as f64 / 2.0);
        (self.forward + self.right * ((px - cx) / ring.focal) + self.down * ((py - cy) / ring.focal)).normalize()
    }

    fn entry(&self, ring: &CameraRing) -> CameraEntry {
        let r = Matrix3::from_rows(&[self.right.transpose(), self.down.transpose(), self.forward.transpose()]);
        let t = -(r * self.eye.coords);
        CameraEntry {
            name: self.name.clone(),
            width: ring.width,
            height: ring.height,
            fx: ring.focal,
            fy: ring.focal,
            cx: ring.width as f64 / 2.0,
            cy: ring.height as f64 / 2.0,
            rotation: std::array::from_fn(|i| r[(i / 3, i % 3)]),
            translation: [t.x, t.y, t.z],
            heatmap_prefix: self.name.clone(),
        }
    }
}

fn ring_cameras(spec: &SceneSpec) -> Vec<RingCamera> {
    let s = spec.surface();
    let ring = &spec.cameras;
    let [tu, tv] = ring.target;
    let target = s.point(tu, tv);
    let (n, eu, ev) = (s.normal(tu, tv), s.tangent_u(tu), Vector3::y());
    (0..ring.count)
        .map(|k| {
            let phi = std::f64::consts::TAU * k as f64 / ring.count as f64;
            let eye = target + n * ring.distance + (eu * phi.cos() + ev * phi.sin()) * ring.radius;
            let forward = (target - eye).normalize();
            let right = forward.cross(&ev).normalize();
            let down = forward.cross(&right);
            RingCamera { name: format!("cam{k:02}"), eye, right, down, forward }
        })
        .collect()
}

/// Map a wall-coordinate polyline onto the surface, densified to 1 mm on
/// curved walls so the 3D chords follow the surface.
fn lift(surface: &Surface, line: &[[f64; 2]]) -> Vec<[f64; 3]> {
    let to3 = |u: f64, v: f64| {
        let p = surface.point(u, v);
        [p.x, p.y, p.z]
    };
    if *surface == Surface::Plane {
        return line.iter().map(|p| to3(p[0], p[1])).collect();
    }
    let mut out = vec![to3(line[0][0], line[0][1])];
    for w in line.windows(2) {
        let len = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        let steps = (len / 0.001).ceil().max(1.0) as usize;
        for s in 1..=steps {
            let t = s as f64 / steps as f64;
            out.push(to3(w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])));
        }
    }
    out
}

pub fn generate(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let catalog = spec.catalog()?;
    let surface = spec.surface();
    let damage = DamageMap::new(spec, &catalog)?;
    let wall = &spec.wall;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let nu = (wall.width / wall.spacing).floor() as usize;
    let nv = (wall.height / wall.spacing).floor() as usize;
    let (u0, v0) = (-(nu as f64) * wall.spacing / 2.0, -(nv as f64) * wall.spacing / 2.0);
    let mut uv = Vec::with_capacity(nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            let ju = wall.jitter * wall.spacing * rng.random_range(-1.0..=1.0);
            let jv = wall.jitter * wall.spacing * rng.random_range(-1.0..=1.0);
            uv.push((u0 + (i as f64 + 0.5) * wall.spacing + ju, v0 + (j as f64 + 0.5) * wall.spacing + jv));
        }
    }
    let positions = uv.iter().map(|&(u, v)| surface.point(u, v)).collect();
    let normals = uv.iter().map(|&(u, v)| surface.normal(u, v)).collect();
    let cloud = PointCloud::new(positions)?.with_normals(normals)?;
    let point_labels = uv.iter().map(|&(u, v)| damage.classify(u, v)).collect();

    let cams = ring_cameras(spec);
    let ring = &spec.cameras;
    let half = (wall.width / 2.0, wall.height / 2.0);
    let views = cams
        .par_iter()
        .enumerate()
        .map(|(k, cam)| {
            let (w, h) = (ring.width as usize, ring.height as usize);
            let mut planes = vec![vec![0.0f32; w * h]; catalog.len()];
            for y in 0..h {
                for x in 0..w {
                    let dir = cam.ray(ring, x as f64 + 0.5, y as f64 + 0.5);
                    let class = match surface.intersect(&cam.eye, &dir) {
                        Some((_, u, v)) if u.abs() <= half.0 && v.abs() <= half.1 => damage.classify(u, v),
                        _ => catalog.background(),
                    };
                    planes[class][y * w + x] = 1.0;
                }
            }
            if spec.noise > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(k as u64 + 1);
                let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::param("noise", e.to_string()))?;
                for plane in &mut planes {
                    for v in plane.iter_mut() {
                        *v = (*v + normal.sample(&mut rng) as f32).clamp(0.0, 1.0);
                    }
                }
            }
            let rasters = planes
                .into_iter()
                .map(|p| Raster::new(ring.width, ring.height, p))
                .collect::<Result<Vec<_>>>()?;
            cam.entry(ring).to_view()?.with_heatmaps(rasters)
        })
        .collect::<Result<Vec<_>>>()?;
    let cameras: Vec<CameraEntry> = cams.iter().map(|c| c.entry(ring)).collect();

    let mut instances = Vec::new();
    for c in &spec.cracks {
        let lines = c.branches.iter().map(|b| lift(&surface, b)).collect();
        instances.push(AnnotatedInstance { class: catalog.index_of(&c.class)?, geometry: Geometry::Polylines { lines } });
    }
    for p in &spec.patches {
        let mut closed = p.outline.clone();
        closed.push(p.outline[0]);
        let mut vertices = lift(&surface, &closed);
        vertices.pop();
        instances.push(AnnotatedInstance { class: catalog.index_of(&p.class)?, geometry: Geometry::Polygon { vertices } });
    }
    let annotations = AnnotationSet { classes: catalog.names().to_vec(), instances };

    let mut marker_uv = vec![[-half.0, -half.1], [half.0, -half.1], [half.0, half.1], [-half.0, half.1]];
    marker_uv.extend(spec.cracks.iter().flat_map(|c| c.branches.iter().flatten().copied()));
    marker_uv.extend(spec.patches.iter().flat_map(|p| p.outline.iter().copied()));
    let mut markers = Vec::new();
    for cam in &cams {
        for (m, p) in marker_uv.iter().enumerate() {
            let x = surface.point(p[0], p[1]);
            if let Some(pixel) = cam.pixel(ring, &x) {
                markers.push(MarkerObservation { camera: cam.name.clone(), marker: m, position: [x.x, x.y, x.z], pixel });
            }
        }
    }

    Ok(SyntheticScene { spec: spec.clone(), catalog, cloud, point_labels, cameras, views, annotations, markers })
}

impl SyntheticScene {
    /// Write a scene bundle into `dir`: cloud, camera manifest, heatmaps,
    /// annotations, markers and the `scene.json` index.
    pub fn write(&self, dir: &Path) -> Result<SceneBundle> {
        let manifest = SceneManifest {
            cloud: "cloud.ply".into(),
            cameras: "cameras.json".into(),
            heatmaps: "heatmaps".into(),
            classes: self.catalog.names().to_vec(),
            background: self.catalog.name(self.catalog.background()).to_string(),
            annotations: Some("annotations.json".into()),
            config: None,
        };
        io::ensure_dir(&dir.join(&manifest.heatmaps))?;
        io::write_ply(&dir.join(&manifest.cloud), &self.cloud, PlyEncoding::BinaryLittleEndian)?;
        io::write_cameras(&dir.join(&manifest.cameras), &self.cameras)?;
        let heatmap_dir = dir.join(&manifest.heatmaps);
        self.views
            .par_iter()
            .zip(&self.cameras)
            .try_for_each(|(view, entry)| -> Result<()> {
                for (c, raster) in view.heatmaps().iter().enumerate() {
                    let path = io::heatmap_path(&heatmap_dir, &entry.heatmap_prefix, self.catalog.name(c));
                    io::write_raster(&path, raster, self.spec.bit_depth)?;
                }
                Ok(())
            })?;
        io::write_annotations(&dir.join("annotations.json"), &self.annotations)?;
        io::write_json(&dir.join("markers.json"), &self.markers)?;
        io::write_json(&dir.join("spec.json"), &self.spec)?;
        io::write_json(&dir.join(crate::io::SCENE_MANIFEST), &manifest)?;
        SceneBundle::open(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mut spec: SceneSpec) -> SceneSpec {
        spec.wall = WallSpec { width: 0.4, height: 0.2, spacing: 0.01, ..WallSpec::default() };
        spec.cameras = CameraRing { count: 3, radius: 0.1, distance: 0.5, width: 64, height: 48, focal: 60.0, ..CameraRing::default() };
        spec
    }

    #[test]
    fn no_damage_means_pure_background() {
        let scene = generate(&small(SceneSpec::default())).unwrap();
        for view in &scene.views {
            assert!(view.heatmaps()[0].data().iter().all(|&v| v == 1.0));
            for h in &view.heatmaps()[1..] {
                assert!(h.data().iter().all(|&v| v == 0.0));
            }
        }
        assert!(scene.annotations.instances.is_empty());
        assert!(scene.point_labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let mut spec = small(SceneSpec::areal());
        spec.patches = vec![PatchSpec { class: "spalling".into(), outline: rectangle(0.0, 0.0, 0.1, 0.1) }];
        spec.noise = 0.1;
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.cloud, b.cloud);
        assert_eq!(a.views, b.views);
        spec.seed = 1;
        assert_ne!(generate(&spec).unwrap().cloud, a.cloud);
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut spec = small(SceneSpec::default());
        spec.wall.spacing = 0.0;
        assert!(generate(&spec).is_err());
        let mut spec = small(SceneSpec::default());
        spec.patches = vec![PatchSpec { class: "background".into(), outline: rectangle(0.0, 0.0, 0.1, 0.1) }];
        assert!(generate(&spec).is_err());
        let mut spec = small(SceneSpec::default());
        spec.cracks = vec![CrackSpec { class: "crack".into(), branches: vec![vec![[0.0, 0.0], [5.0, 0.0]]], width: 0.01 }];
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn polygon_containment() {
        let sq = rectangle(0.0, 0.0, 2.0, 2.0);
        assert!(point_in_polygon([0.5, 0.5], &sq));
        assert!(!point_in_polygon([1.5, 0.5], &sq));
        assert_eq!(segment_distance_2d([0.5, 1.0], [0.0, 0.0], [1.0, 0.0]), 1.0);
    }
}
