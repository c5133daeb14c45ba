mod common;

use common::{fixture, malformed_cases, rng};
use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use rand::Rng;
use surfdamage::geometry::PointCloud;
use surfdamage::io::{
    self, read_cameras, read_instances, read_ply, read_segmented_ply, write_instances, write_ply, write_segmented_ply,
    InstanceDocument, InstanceRecord, InstanceShape, PlyEncoding, Provenance,
};
use surfdamage::mapping::{ClassCatalog, SegmentedCloud};
use surfdamage::synth::{generate, MarkerObservation, SceneSpec, WallSpec};

fn random_cloud(seed: u64, n: usize) -> PointCloud {
    let mut rng = rng(seed);
    let positions = (0..n)
        .map(|_| Point3::new(rng.random_range(-1e3..1e3), rng.random_range(-1.0..1.0), rng.random_range(-1e-6..1e-6)))
        .collect();
    let normals = (0..n)
        .map(|_| {
            Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0))
                .normalize()
        })
        .collect();
    let colors = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    PointCloud::new(positions).unwrap().with_normals(normals).unwrap().with_colors(colors).unwrap()
}

fn bits(cloud: &PointCloud) -> Vec<u64> {
    let mut out: Vec<u64> = cloud.positions().iter().flat_map(|p| p.iter().map(|c| c.to_bits())).collect();
    out.extend(cloud.normals().unwrap().iter().flat_map(|n| n.iter().map(|c| c.to_bits())));
    out
}

#[test]
fn binary_ply_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ply");
    let cloud = random_cloud(5, 1000);
    write_ply(&path, &cloud, PlyEncoding::BinaryLittleEndian).unwrap();
    let back = read_ply(&path).unwrap();
    assert_eq!(bits(&back), bits(&cloud));
    assert_eq!(back.colors(), cloud.colors());
    let again = dir.path().join("d.ply");
    write_ply(&again, &back, PlyEncoding::BinaryLittleEndian).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn ascii_ply_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ply");
    let cloud = random_cloud(6, 300);
    write_ply(&path, &cloud, PlyEncoding::Ascii).unwrap();
    assert_eq!(bits(&read_ply(&path).unwrap()), bits(&cloud));
}

#[test]
fn segmented_ply_round_trips_in_both_encodings() {
    let mut rng = rng(9);
    let catalog = ClassCatalog::default();
    let cloud = random_cloud(10, 400);
    let c = catalog.len();
    let scores: Vec<f64> = (0..400 * c).map(|_| rng.random_range(0.0..1.0)).collect();
    let counts: Vec<u32> = (0..400).map(|_| rng.random_range(0..4)).collect();
    let labels = (0..400)
        .map(|i| if counts[i] == 0 { catalog.background() } else { catalog.argmax(&scores[i * c..(i + 1) * c]) })
        .collect();
    let seg = SegmentedCloud::from_parts(cloud, catalog.clone(), scores, labels, counts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
        let path = dir.path().join("s.ply");
        write_segmented_ply(&path, &seg, enc).unwrap();
        assert_eq!(read_segmented_ply(&path, Some(&catalog)).unwrap(), seg);
        assert_eq!(read_segmented_ply(&path, None).unwrap(), seg);
    }
}

fn coord() -> impl Strategy<Value = f64> {
    prop_oneof![
        -10.0f64..10.0,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE / 4.0),
    ]
}

fn vertex() -> impl Strategy<Value = [f64; 3]> {
    [coord(), coord(), coord()]
}

fn shape() -> impl Strategy<Value = InstanceShape> {
    prop_oneof![
        proptest::collection::vec(proptest::collection::vec(vertex(), 2..6), 1..4)
            .prop_map(|polylines| InstanceShape::MedialAxis { polylines }),
        (
            proptest::collection::vec(vertex(), 3..8),
            proptest::collection::vec(proptest::collection::vec(vertex(), 3..5), 0..2)
        )
            .prop_map(|(vertices, auxiliary_loops)| InstanceShape::Polygon { vertices, auxiliary_loops }),
    ]
}

fn record() -> impl Strategy<Value = (InstanceShape, f64, usize, usize, f64)> {
    (shape(), 0.0f64..=1.0, 0usize..100_000, 0usize..3, coord())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn hundred_random_instances_round_trip(records in proptest::collection::vec(record(), 100)) {
        let classes = ["crack", "spalling", "corrosion"];
        let instances = records
            .into_iter()
            .enumerate()
            .map(|(id, (shape, confidence, point_count, class, param))| InstanceRecord {
                id,
                class: classes[class].into(),
                shape,
                confidence,
                point_count,
                provenance: Provenance::new("polygon", serde_json::json!({ "alpha": param, "tag": "x" })),
            })
            .collect();
        let mut names = vec!["background".to_string()];
        names.extend(classes.iter().map(|c| c.to_string()));
        let doc = InstanceDocument::new(names, instances);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.json");
        write_instances(&path, &doc).unwrap();
        let back = read_instances(&path).unwrap();
        prop_assert_eq!(&back, &doc);
        let again = dir.path().join("j.json");
        write_instances(&again, &back).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}

#[test]
fn generator_markers_reproject_within_half_a_pixel() {
    let spec = SceneSpec {
        wall: WallSpec { spacing: 0.02, ..WallSpec::default() },
        ..SceneSpec::cracks()
    };
    let dir = tempfile::tempdir().unwrap();
    let bundle = generate(&spec).unwrap().write(dir.path()).unwrap();
    let cameras = read_cameras(&bundle.cameras_path()).unwrap();
    let markers: Vec<MarkerObservation> = io::read_json(&dir.path().join("markers.json")).unwrap();
    assert!(markers.len() >= 12 * 4);
    for m in &markers {
        let cam = cameras.iter().find(|c| c.view.name() == m.camera).unwrap();
        let pr = cam.view.project(&Point3::from(m.position)).unwrap();
        assert!(pr.in_bounds);
        let err = (pr.u - m.pixel[0]).hypot(pr.v - m.pixel[1]);
        assert!(err < 0.5, "marker {} in {}: {err} px", m.marker, m.camera);
    }
}

#[test]
fn malformed_fixtures_give_their_designated_errors() {
    for (name, load, check) in malformed_cases() {
        let err = load(&fixture(name)).expect_err(name);
        assert!(check(&err), "{name}: unexpected error {err:?}");
        assert_eq!(err.kind(), surfdamage::ErrorKind::Validation, "{name}");
    }
}

#[test]
fn improper_rotation_message() {
    let err = read_cameras(&fixture("improper_rotation.json")).unwrap_err();
    assert!(err.to_string().contains("improper rotation"), "{err}");
}
