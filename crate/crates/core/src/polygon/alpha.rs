use crate::error::{Error, Result};
use nalgebra::Point2;
use spade::{DelaunayTriangulation, Point2 as SpadePoint, Triangulation};
use std::collections::{BTreeMap, BTreeSet};

/// Boundary of an alpha complex as loops of input indices.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBoundary {
    /// Loop with the largest enclosed area, counterclockwise.
    pub main: Vec<usize>,
    /// Remaining loops (holes or separate islands), largest first.
    pub auxiliary: Vec<Vec<usize>>,
    /// Number of Delaunay triangles kept.
    pub kept_triangles: usize,
}

/// Delaunay triangles of `points` as counterclockwise index triples.
///
/// Duplicate points collapse onto their first occurrence.
pub fn delaunay_triangles(points: &[Point2<f64>]) -> Result<Vec<[usize; 3]>> {
    let mut tri: DelaunayTriangulation<SpadePoint<f64>> = DelaunayTriangulation::new();
    let mut original = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::InvalidCloud(format!("point {i} is not finite")));
        }
        let handle = tri
            .insert(SpadePoint::new(p.x, p.y))
            .map_err(|e| Error::InvalidCloud(format!("point {i}: {e:?}")))?;
        if handle.index() == original.len() {
            original.push(i);
        }
    }
    Ok(tri
        .inner_faces()
        .map(|f| f.vertices().map(|v| original[v.fix().index()]))
        .collect())
}

pub fn circumradius(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    let (ab, bc, ca) = ((b - a).norm(), (c - b).norm(), (a - c).norm());
    let twice_area = ((b - a).perp(&(c - a))).abs();
    if twice_area == 0.0 {
        f64::INFINITY
    } else {
        ab * bc * ca / (2.0 * twice_area)
    }
}

/// Triangles of the alpha complex: Delaunay triangles with circumradius at
/// most `1 / alpha`.
pub fn alpha_triangles(points: &[Point2<f64>], alpha: f64) -> Result<Vec<[usize; 3]>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
    }
    if points.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: points.len() });
    }
    let all = delaunay_triangles(points)?;
    if all.is_empty() {
        return Err(Error::Degenerate("points are collinear".into()));
    }
    let limit = 1.0 / alpha;
    Ok(all
        .into_iter()
        .filter(|t| circumradius(&points[t[0]], &points[t[1]], &points[t[2]]) <= limit)
        .collect())
}

/// Boundary loops of the alpha complex of `points`.
pub fn alpha_boundary(points: &[Point2<f64>], alpha: f64) -> Result<AlphaBoundary> {
    let kept = alpha_triangles(points, alpha)?;
    if kept.is_empty() {
        return Err(Error::AlphaTooLarge { alpha });
    }
    let mut directed = BTreeSet::new();
    for t in &kept {
        for k in 0..3 {
            directed.insert((t[k], t[(k + 1) % 3]));
        }
    }
    // An edge used by two kept triangles appears in both directions.
    let boundary: Vec<(usize, usize)> =
        directed.iter().copied().filter(|&(a, b)| !directed.contains(&(b, a))).collect();
    let mut outgoing: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in &boundary {
        outgoing.entry(a).or_default().push(b);
    }

    let mut used = BTreeSet::new();
    let mut loops = Vec::new();
    for &(start_a, start_b) in &boundary {
        if used.contains(&(start_a, start_b)) {
            continue;
        }
        let mut ring = vec![start_a];
        let (mut prev, mut cur) = (start_a, start_b);
        used.insert((start_a, start_b));
        while cur != start_a {
            ring.push(cur);
            let next = next_boundary_vertex(points, prev, cur, &outgoing[&cur], &used);
            used.insert((cur, next));
            prev = cur;
            cur = next;
        }
        loops.push(ring);
    }
    loops.sort_by(|a, b| {
        signed_area(points, b).abs().total_cmp(&signed_area(points, a).abs()).then_with(|| a.cmp(b))
    });
    let main = loops.remove(0);
    Ok(AlphaBoundary { main, auxiliary: loops, kept_triangles: kept.len() })
}

/// At `cur`, reached from `prev`, pick the unused outgoing edge that comes
/// first when turning clockwise from the direction back to `prev`. This keeps
/// the loop inside one wedge at vertices where the complex is pinched.
fn next_boundary_vertex(
    points: &[Point2<f64>],
    prev: usize,
    cur: usize,
    candidates: &[usize],
    used: &BTreeSet<(usize, usize)>,
) -> usize {
    let back = points[prev] - points[cur];
    let back_angle = back.y.atan2(back.x);
    candidates
        .iter()
        .copied()
        .filter(|&c| !used.contains(&(cur, c)))
        .min_by(|&x, &y| {
            let turn = |c: usize| {
                let d = points[c] - points[cur];
                (back_angle - d.y.atan2(d.x)).rem_euclid(std::f64::consts::TAU)
            };
            turn(x).total_cmp(&turn(y)).then(x.cmp(&y))
        })
        .expect("every boundary vertex has an unused outgoing edge")
}

/// Shoelace area of a loop; positive when counterclockwise.
pub fn signed_area(points: &[Point2<f64>], ring: &[usize]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (p, q) = (points[ring[i]], points[ring[(i + 1) % n]]);
            p.x * q.y - q.x * p.y
        })
        .sum::<f64>()
        / 2.0
}

/// Area of the convex hull of `points`.
pub fn convex_hull_area(points: &[Point2<f64>]) -> Result<f64> {
    let mut tri: DelaunayTriangulation<SpadePoint<f64>> = DelaunayTriangulation::new();
    for p in points {
        tri.insert(SpadePoint::new(p.x, p.y)).map_err(|e| Error::InvalidCloud(format!("{e:?}")))?;
    }
    Ok(tri.inner_faces().map(|f| f.area()).sum())
}

/// Even-odd point-in-polygon test; points on an edge count as inside.
pub fn contains(points: &[Point2<f64>], ring: &[usize], q: &Point2<f64>) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (points[ring[i]], points[ring[(i + 1) % n]]);
        let ab = b - a;
        let aq = q - a;
        if ab.perp(&aq).abs() <= 1e-12 * ab.norm().max(1.0) && aq.dot(&ab) >= 0.0 && aq.dot(&ab) <= ab.norm_squared() {
            return true;
        }
        if (a.y > q.y) != (b.y > q.y) && q.x < a.x + (q.y - a.y) / (b.y - a.y) * (b.x - a.x) {
            inside = !inside;
        }
    }
    inside
}
