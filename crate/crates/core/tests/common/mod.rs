#![allow(dead_code)]

use nalgebra::{Point3, Vector3};
use std::path::{Path, PathBuf};
use surfdamage::camera::{look_at, CameraView, Intrinsics, Raster};
use surfdamage::geometry::PointCloud;
use surfdamage::io::{read_cameras, read_instances, read_ply};
use surfdamage::mapping::ClassCatalog;
use surfdamage::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfdamage::eval::{evaluate, EvalParams, MetricsReport};
use surfdamage::geometry::lex_cmp;
use surfdamage::pipeline::{self, PipelineRun};
use surfdamage::synth::{generate, SceneSpec, SyntheticScene};
use surfdamage::config::PipelineConfig;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Point3<f64>> {
    (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(0.0..scale),
                rng.random_range(0.0..scale),
                rng.random_range(0.0..scale),
            )
        })
        .collect()
}

/// The `k` nearest neighbors of `points[i]` by sorting all others on
/// (distance, coordinates, index).
pub fn brute_knn(points: &[Point3<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..points.len()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| {
        let da = (points[a] - points[i]).norm_squared();
        let db = (points[b] - points[i]).norm_squared();
        da.total_cmp(&db).then_with(|| lex_cmp(&points[a], &points[b])).then_with(|| a.cmp(&b))
    });
    others.truncate(k);
    others
}

/// Textbook DBSCAN from an all-pairs distance table. Clusters are the
/// eps-connected components of core points, numbered by their lowest core
/// index; a border point joins the adjacent cluster with the lowest number.
pub fn brute_dbscan(points: &[Point3<f64>], eps: f64, min_pts: usize) -> Vec<i64> {
    let n = points.len();
    let near = |a: usize, b: usize| (points[a] - points[b]).norm_squared() <= eps * eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
    let mut comp = vec![usize::MAX; n];
    let mut ncomp = 0;
    for s in 0..n {
        if !core[s] || comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = ncomp;
        while let Some(q) = stack.pop() {
            for j in 0..n {
                if core[j] && comp[j] == usize::MAX && near(q, j) {
                    comp[j] = ncomp;
                    stack.push(j);
                }
            }
        }
        ncomp += 1;
    }
    (0..n)
        .map(|i| {
            if core[i] {
                comp[i] as i64
            } else {
                (0..n).filter(|&j| core[j] && near(i, j)).map(|j| comp[j] as i64).min().unwrap_or(-1)
            }
        })
        .collect()
}

/// Relabel clusters in order of first appearance so partitions compare
/// up to renaming.
pub fn canonical_labels(labels: &[i64]) -> Vec<i64> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            if l < 0 {
                -1
            } else {
                let next = map.len() as i64;
                *map.entry(l).or_insert(next)
            }
        })
        .collect()
}

/// Edges of the labelled tree encoded by a Prüfer sequence over `n` nodes.
pub fn prufer_tree(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("a leaf exists");
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges.sort_unstable();
    edges
}

/// Minimum spanning tree weight and edges over every labelled tree on the
/// points (all `n^(n-2)` Prüfer sequences).
pub fn exhaustive_mst(points: &[Point3<f64>]) -> (f64, Vec<(usize, usize)>) {
    let n = points.len();
    assert!((2..=9).contains(&n));
    if n == 2 {
        return ((points[1] - points[0]).norm(), vec![(0, 1)]);
    }
    let mut seq = vec![0usize; n - 2];
    let mut best = (f64::INFINITY, Vec::new());
    loop {
        let edges = prufer_tree(&seq, n);
        let w: f64 = edges.iter().map(|&(a, b)| (points[a] - points[b]).norm()).sum();
        if w < best.0 {
            best = (w, edges);
        }
        let mut i = 0;
        loop {
            if i == seq.len() {
                return best;
            }
            seq[i] += 1;
            if seq[i] < n {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
    }
}

pub struct SceneRun {
    pub scene: SyntheticScene,
    pub run: PipelineRun,
    pub report: MetricsReport,
}

/// Generate a scene, run the whole pipeline in memory and score it.
pub fn run_scene(spec: &SceneSpec, config: &PipelineConfig, tolerances: &[f64]) -> SceneRun {
    let scene = generate(spec).expect("scene generates");
    let run = pipeline::run(&scene.cloud, &scene.views, &scene.catalog, config).expect("pipeline runs");
    let predictions = run.extraction.document.predictions(&scene.annotations.classes).expect("known classes");
    let params = EvalParams { tolerances: tolerances.to_vec(), ..EvalParams::default() };
    let report = evaluate(&scene.annotations, &predictions, &params).expect("evaluates");
    SceneRun { scene, run, report }
}

pub fn metric(report: &MetricsReport, tolerance: f64, class: &str) -> (f64, f64) {
    let row = report.rows.iter().find(|r| r.tolerance == tolerance).expect("tolerance row");
    let c = row.classes.iter().find(|c| c.class == class).expect("class column");
    (c.iou, c.ap50)
}

/// A plane patch seen from above by `views` cameras with random heatmaps.
pub fn fusion_fixture(seed: u64, views: usize) -> (PointCloud, Vec<CameraView>, ClassCatalog) {
    let mut rng = rng(seed);
    let catalog = ClassCatalog::default();
    let pts: Vec<_> =
        (0..150).map(|_| Point3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 0.0)).collect();
    let cloud = PointCloud::new(pts).unwrap().with_normals(vec![Vector3::z(); 150]).unwrap();
    let cams = (0..views)
        .map(|k| {
            let eye = Point3::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), rng.random_range(1.0..2.0));
            let r = look_at(&eye, &Point3::origin(), &Vector3::y());
            let heatmaps = (0..catalog.len())
                .map(|_| Raster::new(200, 200, (0..200 * 200).map(|_| rng.random_range(0.0..1.0f32)).collect()).unwrap())
                .collect();
            CameraView::new(
                format!("v{k}"),
                Intrinsics { fx: 170.0, fy: 170.0, cx: 100.0, cy: 100.0, width: 200, height: 200 },
                r,
                -(r * eye.coords),
            )
            .unwrap()
            .with_heatmaps(heatmaps)
            .unwrap()
        })
        .collect();
    (cloud, cams, catalog)
}

/// Gap between the two largest scores of a row.
pub fn top_gap(scores: &[f64]) -> f64 {
    let mut s = scores.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s[0] - s[1]
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/malformed").join(name)
}

fn load_ply(p: &Path) -> surfdamage::Result<()> {
    read_ply(p).map(|_| ())
}

fn load_cameras(p: &Path) -> surfdamage::Result<()> {
    read_cameras(p).map(|_| ())
}

fn load_instances(p: &Path) -> surfdamage::Result<()> {
    read_instances(p).map(|_| ())
}

fn load_config(p: &Path) -> surfdamage::Result<()> {
    PipelineConfig::load(p).map(|_| ())
}

pub type Loader = fn(&Path) -> surfdamage::Result<()>;
pub type Check = fn(&Error) -> bool;

/// Every malformed fixture with the reader that loads it and the error it
/// must produce.
pub fn malformed_cases() -> Vec<(&'static str, Loader, Check)> {
    vec![
        ("truncated_ascii.ply", load_ply, |e| matches!(e, Error::TruncatedBody { expected: 10, read: 9 })),
        ("truncated_binary.ply", load_ply, |e| matches!(e, Error::TruncatedBody { expected: 4, read: 3 })),
        ("bad_magic.ply", load_ply, |e| matches!(e, Error::PlyHeader(_))),
        ("big_endian.ply", load_ply, |e| matches!(e, Error::PlyHeader(_))),
        ("missing_z.ply", load_ply, |e| matches!(e, Error::MissingProperty("z"))),
        ("bad_token.ply", load_ply, |e| matches!(e, Error::PlyBody(_))),
        ("zero_normal.ply", load_ply, |e| matches!(e, Error::PlyBody(_))),
        ("improper_rotation.json", load_cameras, |e| matches!(e, Error::ImproperRotation { .. })),
        ("non_orthonormal_rotation.json", load_cameras, |e| matches!(e, Error::InvalidCamera { .. })),
        ("missing_field.json", load_cameras, |e| matches!(e, Error::Schema { .. })),
        ("instances_future_version.json", load_instances, |e| matches!(e, Error::Schema { .. })),
        ("unknown_config_key.toml", load_config, |e| matches!(e, Error::Schema { .. })),
    ]
}
