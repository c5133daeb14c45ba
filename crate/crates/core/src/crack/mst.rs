use super::laplacian::UnionFind;
use crate::error::{Error, Result};
use crate::geometry::graph::knn_graph_of;
use crate::geometry::{KdTree, NeighborGraph};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MstParams {
    /// Largest point count solved exactly on the complete graph.
    pub complete_graph_max: usize,
    /// Neighbor count of the sparse candidate graph used above that size.
    pub knn_k: usize,
}

impl Default for MstParams {
    fn default() -> Self {
        Self { complete_graph_max: 2000, knn_k: 8 }
    }
}

/// Euclidean minimum spanning tree.
///
/// Exact (Prim on the complete graph) up to `complete_graph_max` points;
/// beyond that Kruskal runs on the k-NN graph and any leftover components are
/// joined by their shortest bridging edges.
pub fn minimum_spanning_tree(points: &[Point3<f64>], params: &MstParams) -> Result<NeighborGraph> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    if params.knn_k == 0 {
        return Err(Error::param("knn_k", "must be positive"));
    }
    let edges = if n <= params.complete_graph_max || n <= params.knn_k {
        prim_complete(points)
    } else {
        sparse_tree(points, params.knn_k)?
    };
    NeighborGraph::from_edges(n, edges, None)
}

fn prim_complete(points: &[Point3<f64>]) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = (points[j] - points[current]).norm();
            if d < best[j] {
                best[j] = d;
                parent[j] = current;
            }
            if next == usize::MAX || best[j] < best[next] {
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((parent[next], next, best[next]));
        current = next;
    }
    edges
}

fn sparse_tree(points: &[Point3<f64>], k: usize) -> Result<Vec<(usize, usize, f64)>> {
    let n = points.len();
    let graph = knn_graph_of(points, k)?;
    let mut candidates = graph.edges().to_vec();
    candidates.sort_by(|x, y| x.2.total_cmp(&y.2).then((x.0, x.1).cmp(&(y.0, y.1))));
    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    for (a, b, w) in candidates {
        if uf.union(a, b) {
            edges.push((a, b, w));
        }
    }

    // Boruvka rounds over the remaining components.
    let tree = KdTree::new(points);
    while edges.len() < n - 1 {
        let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
        let mut cheapest: Vec<Option<(f64, usize, usize)>> = vec![None; n];
        for i in 0..n {
            let Some((d, j)) = nearest_foreign(&tree, points, &roots, i) else { continue };
            let slot = &mut cheapest[roots[i]];
            let cand = (d, i.min(j), i.max(j));
            if slot.is_none_or(|s| (cand.0, cand.1, cand.2) < (s.0, s.1, s.2)) {
                *slot = Some(cand);
            }
        }
        let mut bridges: Vec<(f64, usize, usize)> = cheapest.into_iter().flatten().collect();
        bridges.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let before = edges.len();
        for (w, a, b) in bridges {
            if uf.union(a, b) {
                edges.push((a, b, w));
            }
        }
        if edges.len() == before {
            return Err(Error::Degenerate("spanning tree bridging made no progress".into()));
        }
    }
    Ok(edges)
}

/// Nearest point to `i` that lies in another component, found by widening
/// k-NN queries.
fn nearest_foreign(
    tree: &KdTree<'_>,
    points: &[Point3<f64>],
    roots: &[usize],
    i: usize,
) -> Option<(f64, usize)> {
    let n = points.len();
    let mut k = 16.min(n - 1);
    loop {
        let found = tree
            .knn(&points[i], k, Some(i))
            .into_iter()
            .find(|nb| roots[nb.index] != roots[i]);
        if let Some(nb) = found {
            return Some((nb.distance, nb.index));
        }
        if k >= n - 1 {
            return None;
        }
        k = (k * 4).min(n - 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()))
            .collect()
    }

    /// Minimum weight over every spanning tree, plus the number of trees seen.
    fn brute_force(points: &[Point3<f64>]) -> (f64, usize) {
        let n = points.len();
        let mut all = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                all.push((a, b, (points[a] - points[b]).norm()));
            }
        }
        let mut best = f64::INFINITY;
        let mut count = 0;
        let mut chosen = Vec::new();
        fn recurse(
            all: &[(usize, usize, f64)],
            start: usize,
            need: usize,
            n: usize,
            chosen: &mut Vec<usize>,
            best: &mut f64,
            count: &mut usize,
        ) {
            if chosen.len() == need {
                let mut uf = UnionFind::new(n);
                if chosen.iter().all(|&e| uf.union(all[e].0, all[e].1)) {
                    *count += 1;
                    *best = best.min(chosen.iter().map(|&e| all[e].2).sum());
                }
                return;
            }
            for e in start..all.len() {
                chosen.push(e);
                recurse(all, e + 1, need, n, chosen, best, count);
                chosen.pop();
            }
        }
        recurse(&all, 0, n - 1, n, &mut chosen, &mut best, &mut count);
        (best, count)
    }

    #[test]
    fn collinear_triplet() {
        let pts: Vec<_> = (0..3).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let t = minimum_spanning_tree(&pts, &MstParams::default()).unwrap();
        assert_eq!(t.edges(), &[(0, 1, 1.0), (1, 2, 1.0)]);
        assert_eq!(t.total_weight(), 2.0);
    }

    #[test]
    fn unit_square() {
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let (best, count) = brute_force(&pts);
        assert_eq!(count, 16);
        assert_eq!(best, 3.0);
        let t = minimum_spanning_tree(&pts, &MstParams::default()).unwrap();
        assert_eq!(t.total_weight(), 3.0);
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        for n in 2..=8 {
            let pts = random_points(n, n as u64);
            let (best, count) = brute_force(&pts);
            // Cayley's formula for the complete graph.
            assert_eq!(count, n.pow(n as u32 - 2));
            let t = minimum_spanning_tree(&pts, &MstParams::default()).unwrap();
            assert_eq!(t.edge_count(), n - 1);
            assert!((t.total_weight() - best).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_route_matches_exact_route() {
        let pts = random_points(600, 3);
        let exact = minimum_spanning_tree(&pts, &MstParams::default()).unwrap();
        let sparse =
            minimum_spanning_tree(&pts, &MstParams { complete_graph_max: 10, knn_k: 4 }).unwrap();
        assert_eq!(sparse.edge_count(), 599);
        assert_eq!(sparse.components().len(), 1);
        assert!((exact.total_weight() - sparse.total_weight()).abs() < 1e-9);
    }

    #[test]
    fn sparse_route_bridges_separate_clusters() {
        let mut pts = random_points(50, 5);
        pts.extend(random_points(50, 6).into_iter().map(|p| p + nalgebra::Vector3::new(10.0, 0.0, 0.0)));
        let t = minimum_spanning_tree(&pts, &MstParams { complete_graph_max: 10, knn_k: 3 }).unwrap();
        assert_eq!(t.components().len(), 1);
        assert_eq!(t.edge_count(), 99);
    }

    #[test]
    fn too_few_points() {
        assert!(minimum_spanning_tree(&[Point3::origin()], &MstParams::default()).is_err());
    }
}
