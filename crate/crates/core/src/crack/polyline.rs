use crate::error::{Error, Result};
use crate::geometry::NeighborGraph;
use nalgebra::Point3;

/// Branch-free polylines covering one crack instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MedialAxis {
    pub instance_id: Option<usize>,
    pub polylines: Vec<Vec<Point3<f64>>>,
    /// Tree nodes of degree 1.
    pub end_nodes: Vec<Point3<f64>>,
    /// Tree nodes of degree 3 or more.
    pub branch_nodes: Vec<Point3<f64>>,
}

impl MedialAxis {
    pub fn total_length(&self) -> f64 {
        self.polylines.iter().map(|l| polyline_length(l)).sum()
    }

    pub fn vertex_count(&self) -> usize {
        self.polylines.iter().map(Vec::len).sum()
    }
}

pub fn polyline_length(line: &[Point3<f64>]) -> f64 {
    line.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Split a tree at every node of degree other than 2, returning node index
/// paths. Branch nodes appear at the ends of every incident path.
pub fn partition_paths(tree: &NeighborGraph) -> Result<Vec<Vec<usize>>> {
    let n = tree.node_count();
    if tree.edge_count() == 0 {
        return Err(Error::Empty("tree"));
    }
    if tree.edge_count() != n - 1 || tree.components().len() != 1 {
        return Err(Error::InvalidCloud("graph is not a spanning tree".into()));
    }
    let mut used = std::collections::HashSet::new();
    let mut paths = Vec::new();
    for start in (0..n).filter(|&v| tree.degree(v) != 2) {
        for &(first, _) in tree.neighbors(start) {
            if used.contains(&(start.min(first), start.max(first))) {
                continue;
            }
            let mut path = vec![start];
            let (mut prev, mut cur) = (start, first);
            loop {
                used.insert((prev.min(cur), prev.max(cur)));
                path.push(cur);
                if tree.degree(cur) != 2 {
                    break;
                }
                let next = tree.neighbors(cur).iter().map(|e| e.0).find(|&v| v != prev).expect("degree 2");
                prev = cur;
                cur = next;
            }
            paths.push(path);
        }
    }
    Ok(paths)
}

/// Partition a spanning tree over `points` into branch-free polylines.
pub fn partition_polylines(tree: &NeighborGraph, points: &[Point3<f64>]) -> Result<MedialAxis> {
    if points.len() != tree.node_count() {
        return Err(Error::InvalidCloud(format!(
            "tree has {} nodes but {} points were given",
            tree.node_count(),
            points.len()
        )));
    }
    let paths = partition_paths(tree)?;
    Ok(axis_from_paths(tree, points, &paths))
}

pub(crate) fn axis_from_paths(tree: &NeighborGraph, points: &[Point3<f64>], paths: &[Vec<usize>]) -> MedialAxis {
    let pick = |pred: &dyn Fn(usize) -> bool| -> Vec<Point3<f64>> {
        (0..tree.node_count()).filter(|&v| pred(tree.degree(v))).map(|v| points[v]).collect()
    };
    MedialAxis {
        instance_id: None,
        polylines: paths.iter().map(|p| p.iter().map(|&i| points[i]).collect()).collect(),
        end_nodes: pick(&|d| d == 1),
        branch_nodes: pick(&|d| d >= 3),
    }
}

/// Douglas-Peucker simplification; endpoints are always kept.
pub fn simplify(line: &[Point3<f64>], tolerance: f64) -> Vec<Point3<f64>> {
    if line.len() <= 2 {
        return line.to_vec();
    }
    let mut keep = vec![false; line.len()];
    keep[0] = true;
    keep[line.len() - 1] = true;
    let mut stack = vec![(0, line.len() - 1)];
    while let Some((a, b)) = stack.pop() {
        let mut worst = (0.0, 0);
        for i in a + 1..b {
            let d = super::contraction::point_segment_distance(&line[i], &line[a], &line[b]);
            if d > worst.0 {
                worst = (d, i);
            }
        }
        if worst.0 > tolerance {
            keep[worst.1] = true;
            stack.push((a, worst.1));
            stack.push((worst.1, b));
        }
    }
    line.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
}
