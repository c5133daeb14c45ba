use super::{KdTree, PointCloud};
use crate::error::{Error, Result};
use nalgebra::Point3;
use std::collections::BTreeMap;

/// Undirected graph over point indices with Euclidean edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    node_count: usize,
    /// Sorted by `(a, b)` with `a < b`.
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
    k: Option<usize>,
}

impl NeighborGraph {
    /// Validates and normalizes an edge list: endpoints are reordered so
    /// `a < b`, and self edges, duplicates and non-positive weights are rejected.
    pub fn from_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
        k: Option<usize>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (a, b, w) in edges {
            if a >= node_count || b >= node_count {
                return Err(Error::InvalidCloud(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidCloud(format!("self edge at node {a}")));
            }
            if w <= 0.0 {
                return Err(Error::DuplicatePoints { a: a.min(b), b: a.max(b) });
            }
            if !w.is_finite() {
                return Err(Error::InvalidCloud(format!("edge ({a}, {b}) has weight {w}")));
            }
            if map.insert((a.min(b), a.max(b)), w).is_some() {
                return Err(Error::InvalidCloud(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(Self::from_sorted(node_count, map.into_iter().map(|((a, b), w)| (a, b, w)).collect(), k))
    }

    fn from_sorted(node_count: usize, edges: Vec<(usize, usize, f64)>, k: Option<usize>) -> Self {
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b, w) in &edges {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|e| e.0);
        }
        Self { node_count, edges, adjacency, k }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn k(&self) -> Option<usize> {
        self.k
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    /// Connected components as ascending node lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.node_count];
        let mut out = Vec::new();
        for start in 0..self.node_count {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &(w, _) in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// Symmetrized k-nearest-neighbor graph of a cloud.
pub fn build_knn_graph(cloud: &PointCloud, k: usize) -> Result<NeighborGraph> {
    knn_graph_of(cloud.positions(), k)
}

pub(crate) fn knn_graph_of(points: &[Point3<f64>], k: usize) -> Result<NeighborGraph> {
    if k == 0 {
        return Err(Error::param("k", "must be positive"));
    }
    if points.len() < k + 1 {
        return Err(Error::TooFewPoints { needed: k + 1, got: points.len() });
    }
    let tree = KdTree::new(points);
    let mut map = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        for n in tree.knn(p, k, Some(i)) {
            if n.distance == 0.0 {
                return Err(Error::DuplicatePoints { a: i.min(n.index), b: i.max(n.index) });
            }
            map.insert((i.min(n.index), i.max(n.index)), n.distance);
        }
    }
    Ok(NeighborGraph::from_sorted(
        points.len(),
        map.into_iter().map(|((a, b), w)| (a, b, w)).collect(),
        Some(k),
    ))
}
