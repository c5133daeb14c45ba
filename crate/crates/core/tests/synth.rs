mod common;

use surfdamage::eval::{evaluate, EvalParams, Prediction, DEFAULT_TOLERANCES};
use surfdamage::io::{self, BitDepth};
use surfdamage::synth::{generate, segment_distance_2d, CrackSpec, SceneSpec, WallSpec};

fn coarse(spec: SceneSpec) -> SceneSpec {
    SceneSpec { wall: WallSpec { spacing: 0.02, ..spec.wall.clone() }, ..spec }
}

#[test]
fn crack_mask_matches_ray_distance_oracle() {
    let (a, b, width) = ([-0.6, -0.2], [0.5, 0.3], 0.006);
    let spec = coarse(SceneSpec {
        cracks: vec![CrackSpec { class: "crack".into(), branches: vec![vec![a, b]], width }],
        ..SceneSpec::default()
    });
    let scene = generate(&spec).unwrap();
    let crack = scene.catalog.index_of("crack").unwrap();
    let (hw, hh) = (spec.wall.width / 2.0, spec.wall.height / 2.0);
    let mut hits = 0usize;
    for (entry, rendered) in scene.cameras.iter().zip(&scene.views) {
        let view = entry.to_view().unwrap();
        let eye = view.center();
        let mask = &rendered.heatmaps()[crack];
        for y in 0..entry.height {
            for x in 0..entry.width {
                let d = view.ray_direction(x as f64 + 0.5, y as f64 + 0.5);
                let t = -eye.z / d.z;
                let hit = eye + d * t;
                if (hit.x.abs() - hw).abs() < 1e-9 || (hit.y.abs() - hh).abs() < 1e-9 {
                    continue;
                }
                let dist = segment_distance_2d([hit.x, hit.y], a, b);
                if (dist - width / 2.0).abs() < 1e-9 {
                    continue;
                }
                let on_wall = t > 0.0 && hit.x.abs() <= hw && hit.y.abs() <= hh;
                let expected = on_wall && dist <= width / 2.0;
                assert_eq!(mask.get(x, y) == 1.0, expected, "{} pixel ({x}, {y})", entry.name);
                hits += expected as usize;
            }
        }
    }
    assert!(hits > 12 * 500, "{hits}");
}

#[test]
fn every_heatmap_pixel_is_one_hot() {
    let scene = generate(&coarse(SceneSpec { cracks: SceneSpec::cracks().cracks, ..SceneSpec::areal() })).unwrap();
    for view in &scene.views {
        let maps = view.heatmaps();
        for i in 0..maps[0].data().len() {
            let s: f32 = maps.iter().map(|m| m.data()[i]).sum();
            assert_eq!(s, 1.0);
        }
    }
}

fn self_evaluation(spec: &SceneSpec) {
    let scene = generate(spec).unwrap();
    let predictions: Vec<Prediction> = scene
        .annotations
        .instances
        .iter()
        .map(|t| Prediction { class: t.class, confidence: 1.0, geometry: t.geometry.clone() })
        .collect();
    let mut tolerances = DEFAULT_TOLERANCES.to_vec();
    tolerances.push(0.004);
    let report = evaluate(&scene.annotations, &predictions, &EvalParams { tolerances, ..EvalParams::default() }).unwrap();
    assert!(!report.rows[0].classes.is_empty());
    for row in &report.rows {
        for c in &row.classes {
            assert_eq!((c.iou, c.ap50), (1.0, 1.0), "{} at {}", c.class, row.tolerance);
        }
    }
}

#[test]
fn annotations_score_perfectly_against_themselves() {
    self_evaluation(&coarse(SceneSpec::cracks()));
    self_evaluation(&coarse(SceneSpec::areal()));
    let mut curved = coarse(SceneSpec::areal());
    curved.cracks = SceneSpec::cracks().cracks;
    curved.wall.curvature_radius = Some(1.5);
    self_evaluation(&curved);
}

#[test]
fn noisy_scenes_are_reproducible_per_seed() {
    let spec = SceneSpec { noise: 0.1, seed: 3, ..coarse(SceneSpec::areal()) };
    let a = generate(&spec).unwrap();
    let b = generate(&spec).unwrap();
    assert_eq!(a.views, b.views);
    assert_eq!(a.cloud, b.cloud);
    let c = generate(&SceneSpec { seed: 4, ..spec }).unwrap();
    assert_ne!(a.views[0].heatmaps(), c.views[0].heatmaps());
}

#[test]
fn written_bundle_reloads_to_the_same_inputs() {
    for depth in [BitDepth::Eight, BitDepth::Sixteen] {
        let spec = SceneSpec {
            bit_depth: depth,
            cameras: surfdamage::synth::CameraRing { count: 3, width: 320, height: 240, focal: 250.0, ..Default::default() },
            ..coarse(SceneSpec::cracks())
        };
        let scene = generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let bundle = scene.write(dir.path()).unwrap();
        let catalog = bundle.catalog().unwrap();
        assert_eq!(catalog, scene.catalog);
        assert_eq!(bundle.load_cloud().unwrap(), scene.cloud);
        assert_eq!(bundle.load_views(&catalog).unwrap(), scene.views);
        let truth = io::read_annotations(&bundle.annotations_path().unwrap()).unwrap();
        assert_eq!(truth, scene.annotations);
    }
}
