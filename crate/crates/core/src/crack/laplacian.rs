use super::sparse::SparseMatrix;
use crate::error::{Error, Result};
use crate::geometry::KdTree;
use nalgebra::Point3;
use std::collections::BTreeSet;

/// Gaussian-weighted graph Laplacian `L = D - W` over the symmetrized k-NN graph.
///
/// Edge weights are `exp(-d^2 / sigma^2)` with `sigma` the mean k-NN distance,
/// which keeps `L` dimensionless. Coincident points are allowed and get
/// weight 1.
pub fn build_laplacian(points: &[Point3<f64>], k: usize) -> Result<SparseMatrix> {
    Ok(NeighborTopology::new(points, k)?.laplacian(points))
}

/// k-NN connectivity and bandwidth frozen at construction time.
///
/// Contraction keeps both fixed: re-querying neighbors on contracted points
/// splits the graph into clumps, and re-weighting by current distances feeds
/// the same clumping.
#[derive(Debug, Clone)]
pub struct NeighborTopology {
    /// Directed k-NN lists, used for the bandwidth.
    knn: Vec<Vec<usize>>,
    /// Undirected edges `(a, b)` with `a < b`, sorted.
    edges: Vec<(usize, usize)>,
    /// Mean k-NN distance of the construction points.
    sigma: f64,
}

impl NeighborTopology {
    /// Errors when the symmetrized graph is disconnected.
    pub fn new(points: &[Point3<f64>], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "must be positive"));
        }
        let n = points.len();
        if n < k + 1 {
            return Err(Error::TooFewPoints { needed: k + 1, got: n });
        }
        let tree = KdTree::new(points);
        let mut knn = Vec::with_capacity(n);
        let mut edges = BTreeSet::new();
        for (i, p) in points.iter().enumerate() {
            let nbs: Vec<usize> = tree.knn(p, k, Some(i)).into_iter().map(|nb| nb.index).collect();
            for &j in &nbs {
                edges.insert((i.min(j), i.max(j)));
            }
            knn.push(nbs);
        }
        let mut uf = UnionFind::new(n);
        for &(a, b) in &edges {
            uf.union(a, b);
        }
        let sizes = uf.component_sizes();
        if sizes.len() > 1 {
            return Err(Error::Disconnected { components: sizes.len(), sizes });
        }
        let sigma = knn
            .iter()
            .enumerate()
            .flat_map(|(i, nbs): (usize, &Vec<usize>)| nbs.iter().map(move |&j| (points[i] - points[j]).norm()))
            .sum::<f64>()
            / (n * k) as f64;
        Ok(Self { knn, edges: edges.into_iter().collect(), sigma })
    }

    pub fn node_count(&self) -> usize {
        self.knn.len()
    }

    /// Mean distance from every point to its construction-time neighbors.
    pub fn local_extents(&self, points: &[Point3<f64>]) -> Vec<f64> {
        self.knn
            .iter()
            .enumerate()
            .map(|(i, nbs)| nbs.iter().map(|&j| (points[i] - points[j]).norm()).sum::<f64>() / nbs.len() as f64)
            .collect()
    }

    /// Laplacian of this graph with weights taken from `points`, keeping the
    /// construction bandwidth.
    pub fn laplacian(&self, points: &[Point3<f64>]) -> SparseMatrix {
        let n = self.node_count();
        assert_eq!(points.len(), n, "topology and points disagree in size");
        let sigma = self.sigma;
        let mut triplets = Vec::with_capacity(4 * self.edges.len());
        for &(a, b) in &self.edges {
            let d2 = (points[a] - points[b]).norm_squared();
            let w = if sigma > 0.0 { (-d2 / (sigma * sigma)).exp() } else { 1.0 };
            triplets.extend([(a, a, w), (b, b, w), (a, b, -w), (b, a, -w)]);
        }
        SparseMatrix::from_triplets(n, n, triplets)
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }

    /// Sizes of all components, largest first.
    pub(crate) fn component_sizes(&mut self) -> Vec<usize> {
        let n = self.parent.len();
        let mut count = vec![0usize; n];
        for i in 0..n {
            let r = self.find(i);
            count[r] += 1;
        }
        let mut sizes: Vec<usize> = count.into_iter().filter(|&c| c > 0).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}
