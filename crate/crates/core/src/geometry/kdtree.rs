use nalgebra::Point3;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 8;

/// Lexicographic order on coordinates, the tie-breaker for equal distances.
pub fn lex_cmp(a: &Point3<f64>, b: &Point3<f64>) -> Ordering {
    a.x.total_cmp(&b.x)
        .then_with(|| a.y.total_cmp(&b.y))
        .then_with(|| a.z.total_cmp(&b.z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Candidate ordered by (squared distance, coordinates, index).
struct Candidate<'a> {
    d2: f64,
    index: usize,
    point: &'a Point3<f64>,
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then_with(|| lex_cmp(self.point, other.point))
            .then_with(|| self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

/// Static 3D kd-tree over a borrowed point slice.
///
/// Stored implicitly: `order` is permuted so that each subrange's median
/// is the splitting node, with the split axis kept alongside it.
pub struct KdTree<'a> {
    points: &'a [Point3<f64>],
    order: Vec<usize>,
    axis: Vec<u8>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Point3<f64>]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len()).collect(),
            axis: vec![0; points.len()],
        };
        tree.build(0, points.len());
        tree
    }

    pub fn points(&self) -> &'a [Point3<f64>] {
        self.points
    }

    fn build(&mut self, lo: usize, hi: usize) {
        if hi - lo <= LEAF_SIZE {
            return;
        }
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for &i in &self.order[lo..hi] {
            for a in 0..3 {
                min[a] = min[a].min(self.points[i][a]);
                max[a] = max[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (max[a] - min[a]).total_cmp(&(max[b] - min[b])))
            .unwrap_or(0);
        let mid = (lo + hi) / 2;
        let points = self.points;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&i, &j| {
            points[i][axis].total_cmp(&points[j][axis]).then(i.cmp(&j))
        });
        self.axis[mid] = axis as u8;
        self.build(lo, mid);
        self.build(mid + 1, hi);
    }

    /// The `k` nearest points to `query`, nearest first, optionally skipping
    /// one index (the query point itself).
    pub fn knn(&self, query: &Point3<f64>, k: usize, skip: Option<usize>) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Candidate<'a>> = BinaryHeap::with_capacity(k + 1);
        self.knn_range(0, self.points.len(), query, k, skip, &mut heap);
        let mut found = heap.into_vec();
        found.sort();
        found
            .into_iter()
            .map(|c| Neighbor { index: c.index, distance: c.d2.sqrt() })
            .collect()
    }

    fn offer(
        &self,
        i: usize,
        query: &Point3<f64>,
        k: usize,
        skip: Option<usize>,
        heap: &mut BinaryHeap<Candidate<'a>>,
    ) {
        if Some(i) == skip {
            return;
        }
        let cand = Candidate { d2: (self.points[i] - query).norm_squared(), index: i, point: &self.points[i] };
        if heap.len() < k {
            heap.push(cand);
        } else if let Some(worst) = heap.peek() {
            if cand < *worst {
                heap.pop();
                heap.push(cand);
            }
        }
    }

    fn knn_range(
        &self,
        lo: usize,
        hi: usize,
        query: &Point3<f64>,
        k: usize,
        skip: Option<usize>,
        heap: &mut BinaryHeap<Candidate<'a>>,
    ) {
        if hi - lo <= LEAF_SIZE {
            for &i in &self.order[lo..hi] {
                self.offer(i, query, k, skip, heap);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let node = self.order[mid];
        let axis = self.axis[mid] as usize;
        self.offer(node, query, k, skip, heap);
        let diff = query[axis] - self.points[node][axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.knn_range(near.0, near.1, query, k, skip, heap);
        let must_visit = heap.len() < k || heap.peek().is_some_and(|w| diff * diff <= w.d2);
        if must_visit {
            self.knn_range(far.0, far.1, query, k, skip, heap);
        }
    }

    /// Indices of all points within `radius` (inclusive) of `query`, ascending.
    pub fn within(&self, query: &Point3<f64>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.within_range(0, self.points.len(), query, radius * radius, &mut out);
        out.sort_unstable();
        out
    }

    fn within_range(&self, lo: usize, hi: usize, query: &Point3<f64>, r2: f64, out: &mut Vec<usize>) {
        if hi - lo <= LEAF_SIZE {
            out.extend(
                self.order[lo..hi]
                    .iter()
                    .copied()
                    .filter(|&i| (self.points[i] - query).norm_squared() <= r2),
            );
            return;
        }
        let mid = (lo + hi) / 2;
        let node = self.order[mid];
        let axis = self.axis[mid] as usize;
        if (self.points[node] - query).norm_squared() <= r2 {
            out.push(node);
        }
        let diff = query[axis] - self.points[node][axis];
        if diff <= 0.0 || diff * diff <= r2 {
            self.within_range(lo, mid, query, r2, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.within_range(mid + 1, hi, query, r2, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect()
    }

    #[test]
    fn within_matches_linear_scan() {
        let pts = random_points(400, 7);
        let tree = KdTree::new(&pts);
        for q in pts.iter().take(40) {
            let expected: Vec<usize> =
                (0..pts.len()).filter(|&i| (pts[i] - q).norm() <= 0.2).collect();
            assert_eq!(tree.within(q, 0.2), expected);
        }
    }

    #[test]
    fn knn_on_grid_breaks_ties_lexicographically() {
        // Four points at equal distance from the origin query.
        let pts = vec![
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, -1.0, 0.0),
        ];
        let tree = KdTree::new(&pts);
        let nn: Vec<usize> = tree.knn(&Point3::origin(), 2, None).iter().map(|n| n.index).collect();
        assert_eq!(nn, vec![1, 3]);
    }
}
