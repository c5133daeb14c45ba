//! Compressed sparse rows and an envelope (skyline) Cholesky solver.
//!
//! The contraction normal matrix `L^T W_L^2 L + W_H^2` couples points within
//! two neighborhood hops. For the thin, elongated clusters that cracks form,
//! a reverse Cuthill-McKee ordering keeps its envelope narrow, and a dense
//! envelope factorization is both simple and fast.

use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { rows, cols, row_ptr, col_idx, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of one row, ascending by column.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// `A^T diag(row_weights^2) A + diag(diagonal)` for a symmetric `A`.
    ///
    /// Symmetry of `self` is assumed (true for graph Laplacians) so that
    /// `A^T` rows can be read from `A` rows.
    pub fn weighted_normal_matrix(&self, row_weights: &[f64], diagonal: &[f64]) -> SparseMatrix {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0f64; n];
        let mut touched = vec![false; n];
        let mut pattern = Vec::new();
        for i in 0..n {
            pattern.clear();
            acc[i] += diagonal[i];
            touched[i] = true;
            pattern.push(i);
            for (r, l_ri) in self.row(i) {
                let w2 = row_weights[r] * row_weights[r];
                for (c, l_rc) in self.row(r) {
                    if !touched[c] {
                        touched[c] = true;
                        pattern.push(c);
                    }
                    acc[c] += l_ri * w2 * l_rc;
                }
            }
            pattern.sort_unstable();
            for &c in &pattern {
                col_idx.push(c);
                values.push(acc[c]);
                acc[c] = 0.0;
                touched[c] = false;
            }
            row_ptr[i + 1] = col_idx.len();
        }
        SparseMatrix { rows: n, cols: n, row_ptr, col_idx, values }
    }
}

/// Reverse Cuthill-McKee ordering of a symmetric pattern: `order[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.rows();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(c, _)| c != i).count()).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &start in &by_degree {
        if placed[start] {
            continue;
        }
        let root = pseudo_peripheral(a, start, &degree);
        placed[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> =
                a.row(v).map(|(c, _)| c).filter(|&c| c != v && !placed[c]).collect();
            next.sort_by_key(|&c| (degree[c], c));
            for c in next {
                placed[c] = true;
                queue.push_back(c);
            }
        }
    }
    order.reverse();
    order
}

/// Last node of the deepest BFS level, iterated a few times from `start`.
fn pseudo_peripheral(a: &SparseMatrix, start: usize, degree: &[usize]) -> usize {
    let n = a.rows();
    let mut root = start;
    let mut best_depth = 0;
    for _ in 0..5 {
        let mut depth = vec![usize::MAX; n];
        depth[root] = 0;
        let mut queue = VecDeque::from([root]);
        let mut far = root;
        while let Some(v) = queue.pop_front() {
            let better = depth[v] > depth[far] || (depth[v] == depth[far] && degree[v] < degree[far]);
            if better {
                far = v;
            }
            for (c, _) in a.row(v) {
                if depth[c] == usize::MAX {
                    depth[c] = depth[v] + 1;
                    queue.push_back(c);
                }
            }
        }
        if depth[far] <= best_depth {
            break;
        }
        best_depth = depth[far];
        root = far;
    }
    root
}

/// Envelope Cholesky factor `P A P^T = G G^T` of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    order: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    factor: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NotPositiveDefinite {
    pub row: usize,
    pub pivot: f64,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SparseMatrix) -> Result<Self, NotPositiveDefinite> {
        let n = a.rows();
        let order = reverse_cuthill_mckee(a);
        let mut position = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (old, &new) in position.iter().enumerate() {
            for (c, _) in a.row(old) {
                let nc = position[c];
                if nc < first[new] {
                    first[new] = nc;
                }
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut factor = vec![0.0f64; offset[n]];
        for (old, &new) in position.iter().enumerate() {
            for (c, v) in a.row(old) {
                let nc = position[c];
                if nc <= new {
                    factor[offset[new] + nc - first[new]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let (done, rest) = factor.split_at_mut(offset[i]);
            let row_i = &mut rest[..i - fi + 1];
            for j in fi..i {
                let fj = first[j];
                let row_j = &done[offset[j]..offset[j + 1]];
                let lo = fi.max(fj);
                let dot: f64 = row_i[lo - fi..j - fi]
                    .iter()
                    .zip(&row_j[lo - fj..j - fj])
                    .map(|(a, b)| a * b)
                    .sum();
                row_i[j - fi] = (row_i[j - fi] - dot) / row_j[j - fj];
            }
            let (off_diag, diag) = row_i.split_at_mut(i - fi);
            let d = diag[0] - off_diag.iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) {
                return Err(NotPositiveDefinite { row: order[i], pivot: d });
            }
            diag[0] = d.sqrt();
        }
        Ok(Self { order, first, offset, factor })
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.factor.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.order.len();
        let mut y: Vec<f64> = self.order.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.factor[self.offset[i]..self.offset[i + 1]];
            let dot: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - dot) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.factor[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (k, l) in row[..i - fi].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.order.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
