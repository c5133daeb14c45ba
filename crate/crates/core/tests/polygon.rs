use nalgebra::{Point2, Point3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfdamage::polygon::{
    alpha_triangles, contains, convex_hull_area, pca_project, polygon_of_points, signed_area, Normalization,
    PolygonParams,
};

/// Jittered grid samples of a disc of radius `r` in the plane z = 0.
fn disc(r: f64, spacing: f64, seed: u64) -> Vec<Point3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (r / spacing).ceil() as i64;
    let mut out = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let x = i as f64 * spacing + rng.random_range(-0.15..0.15) * spacing;
            let y = j as f64 * spacing + rng.random_range(-0.15..0.15) * spacing;
            if x * x + y * y <= r * r {
                out.push(Point3::new(x, y, 0.0));
            }
        }
    }
    out
}

#[test]
fn disc_polygon_encloses_points_and_matches_area() {
    let r = 0.1;
    let rot = Rotation3::from_euler_angles(0.4, 0.2, -0.3);
    let pts: Vec<_> = disc(r, 0.002, 1).into_iter().map(|p| rot * p + Vector3::new(1.0, 2.0, 0.5)).collect();
    let poly = polygon_of_points(&pts, &PolygonParams::default()).unwrap();
    assert!(poly.planar);
    let area = std::f64::consts::PI * r * r;
    assert!((poly.plane_area - area).abs() <= 0.1 * area, "area {} vs {area}", poly.plane_area);

    let plane: Vec<Point2<f64>> = pts.iter().map(|p| poly.frame.to_plane(p)).collect();
    let inside = plane.iter().filter(|q| contains(&plane, &poly.vertex_indices, q)).count();
    assert!(inside as f64 >= 0.95 * pts.len() as f64, "{inside} of {}", pts.len());
}

#[test]
fn polygon_vertices_are_input_points() {
    let mut pts = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(0.2, 0.0, 0.0),
        Point3::new(0.2, 0.2, 0.0),
        Point3::new(0.0, 0.2, 0.0),
    ];
    for i in 1..20 {
        let t = 0.2 * i as f64 / 20.0;
        pts.extend([
            Point3::new(t, 0.0, 0.0),
            Point3::new(0.2, t, 0.0),
            Point3::new(0.2 - t, 0.2, 0.0),
            Point3::new(0.0, 0.2 - t, 0.0),
        ]);
    }
    let poly = polygon_of_points(&pts, &PolygonParams { alpha: 1.0, ..Default::default() }).unwrap();
    assert!(poly.vertices.len() >= 4);
    for (v, &i) in poly.vertices.iter().zip(&poly.vertex_indices) {
        assert_eq!(*v, pts[i]);
    }
    assert!((poly.plane_area - 0.04).abs() < 1e-12);
}

#[test]
fn corner_patch_is_flagged_non_planar() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pts = Vec::new();
    for i in 0..60 {
        for j in 0..60 {
            let a = i as f64 * 0.005 + rng.random_range(0.0..0.001);
            let b = j as f64 * 0.005 + rng.random_range(0.0..0.001);
            pts.push(if j < 30 { Point3::new(a, b, 0.0) } else { Point3::new(a, 0.15, b - 0.15) });
        }
    }
    let poly = polygon_of_points(&pts, &PolygonParams::default()).unwrap();
    assert!(!poly.planar, "explained variance {}", poly.frame.explained_variance);
}

fn cloud_2d() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 3..60)
}

proptest! {
    #[test]
    fn kept_triangles_nest_as_alpha_grows(pts in cloud_2d(), a1 in 0.1..5.0f64, factor in 1.0..4.0f64) {
        let pts: Vec<_> = pts.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
        let small = alpha_triangles(&pts, a1);
        let large = alpha_triangles(&pts, a1 * factor);
        if let (Ok(small), Ok(large)) = (small, large) {
            for t in &large {
                prop_assert!(small.contains(t));
            }
        }
    }

    #[test]
    fn polygon_area_is_at_most_hull_area(pts in cloud_2d(), alpha in 0.5..6.0f64) {
        let pts3: Vec<_> = pts.iter().map(|&(x, y)| Point3::new(x, y, 0.0)).collect();
        if let Ok(poly) = polygon_of_points(&pts3, &PolygonParams { alpha, ..Default::default() }) {
            let (_, uv) = pca_project(&pts3, Normalization::PerAxis).unwrap();
            let area = signed_area(&uv, &poly.vertex_indices);
            prop_assert!(area > 0.0);
            prop_assert!(area <= convex_hull_area(&uv).unwrap() + 1e-12);
        }
    }
}
