use super::contraction::{contract, ContractionParams, ContractionStop};
use super::mst::{minimum_spanning_tree, MstParams};
use super::polyline::{axis_from_paths, partition_paths, simplify, MedialAxis};
use crate::clustering::InstanceCloud;
use crate::error::{Error, Result};
use crate::geometry::{centroid, KdTree};
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MedialAxisParams {
    pub contraction: ContractionParams,
    pub mst: MstParams,
    /// Instances larger than this are farthest-point sampled before contraction.
    pub max_contraction_points: usize,
    /// Vertex budget for the spanning tree.
    pub max_vertices: usize,
    /// Sampling stops once every contracted point is this close to a vertex (m).
    pub min_vertex_spacing: f64,
    /// Douglas-Peucker tolerance (m); zero disables simplification.
    pub simplify_tolerance: f64,
    /// Move every tree vertex to the mean input position of the points that
    /// contracted closest to it. Smoothing drags junctions and bends during
    /// contraction; this restores them while keeping the tree topology.
    pub refine: bool,
    /// Re-extend free ends to the farthest input point along their tangent,
    /// undoing the shrinkage contraction causes at crack tips.
    pub extend_ends: bool,
}

impl Default for MedialAxisParams {
    fn default() -> Self {
        Self {
            contraction: ContractionParams::default(),
            mst: MstParams::default(),
            max_contraction_points: 50_000,
            max_vertices: 500,
            min_vertex_spacing: 0.002,
            simplify_tolerance: 0.001,
            refine: true,
            extend_ends: true,
        }
    }
}

impl MedialAxisParams {
    pub fn validate(&self) -> Result<()> {
        self.contraction.validate()?;
        if self.max_vertices < 2 {
            return Err(Error::param("max_vertices", "must be at least 2"));
        }
        if self.max_contraction_points <= self.contraction.k {
            return Err(Error::param("max_contraction_points", "must exceed the contraction k"));
        }
        for (name, v) in [
            ("min_vertex_spacing", self.min_vertex_spacing),
            ("simplify_tolerance", self.simplify_tolerance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Diagnostics from one extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionReport {
    pub contraction_iterations: usize,
    pub contraction_stop: ContractionStop,
    pub tree_vertices: usize,
}

pub fn extract_medial_axis(instance: &InstanceCloud, params: &MedialAxisParams) -> Result<MedialAxis> {
    let (mut axis, _) = extract_points(&instance.positions, params)?;
    axis.instance_id = Some(instance.id);
    Ok(axis)
}

/// Medial axis of a bare point set, with diagnostics.
pub fn extract_points(points: &[Point3<f64>], params: &MedialAxisParams) -> Result<(MedialAxis, ExtractionReport)> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::Empty("crack instance"));
    }
    let input: Vec<Point3<f64>> = if points.len() > params.max_contraction_points {
        farthest_point_sample(points, params.max_contraction_points, 0.0)
            .into_iter()
            .map(|i| points[i])
            .collect()
    } else {
        points.to_vec()
    };
    let contraction = contract(&input, &params.contraction)?;
    let picked = farthest_point_sample(&contraction.points, params.max_vertices, params.min_vertex_spacing);
    let vertices: Vec<Point3<f64>> = picked.iter().map(|&i| contraction.points[i]).collect();
    if vertices.len() < 2 {
        return Err(Error::Degenerate("contracted crack collapsed to a single vertex".into()));
    }
    let tree = minimum_spanning_tree(&vertices, &params.mst)?;
    let mut paths = partition_paths(&tree)?;
    paths.retain(|p| p.len() >= 2);
    let placed = if params.refine { refine(&vertices, &contraction.points, &input) } else { vertices.clone() };
    let mut axis = axis_from_paths(&tree, &placed, &paths);
    if params.extend_ends {
        // Half-width of the search corridor around the end tangent.
        let corridor = 2.0 * contraction.initial_extent;
        for (line, path) in axis.polylines.iter_mut().zip(&paths) {
            if tree.degree(path[path.len() - 1]) == 1 {
                extend_end(line, &input, corridor);
            }
            if tree.degree(path[0]) == 1 {
                line.reverse();
                extend_end(line, &input, corridor);
                line.reverse();
            }
        }
        axis.end_nodes = axis
            .polylines
            .iter()
            .zip(&paths)
            .flat_map(|(line, path)| {
                let first = (tree.degree(path[0]) == 1).then(|| line[0]);
                let last = (tree.degree(path[path.len() - 1]) == 1).then(|| line[line.len() - 1]);
                first.into_iter().chain(last)
            })
            .collect();
    }
    if params.simplify_tolerance > 0.0 {
        for line in &mut axis.polylines {
            *line = simplify(line, params.simplify_tolerance);
        }
    }
    let report = ExtractionReport {
        contraction_iterations: contraction.iterations.len(),
        contraction_stop: contraction.stop,
        tree_vertices: vertices.len(),
    };
    Ok((axis, report))
}

/// Mean original position of the points whose contracted position is
/// nearest to each vertex; vertices without members keep their position.
fn refine(vertices: &[Point3<f64>], contracted: &[Point3<f64>], original: &[Point3<f64>]) -> Vec<Point3<f64>> {
    let tree = KdTree::new(vertices);
    let mut sums = vec![Vector3::zeros(); vertices.len()];
    let mut counts = vec![0usize; vertices.len()];
    for (c, o) in contracted.iter().zip(original) {
        let v = tree.knn(c, 1, None)[0].index;
        sums[v] += o.coords;
        counts[v] += 1;
    }
    vertices
        .iter()
        .zip(sums.iter().zip(&counts))
        .map(|(v, (s, &n))| if n > 0 { Point3::from(s / n as f64) } else { *v })
        .collect()
}

/// Appends a vertex beyond the last one of `line`, at the farthest projection
/// of any `cloud` point lying ahead of it within `corridor` of the tangent.
fn extend_end(line: &mut Vec<Point3<f64>>, cloud: &[Point3<f64>], corridor: f64) {
    let end = line[line.len() - 1];
    // Tangent from a vertex at least one corridor width back, if there is one.
    let back = line
        .iter()
        .rev()
        .skip(1)
        .find(|p| (end - *p).norm() >= corridor)
        .or_else(|| line.first())
        .copied()
        .expect("polylines have two vertices");
    let Some(dir) = (end - back).try_normalize(1e-12) else { return };
    let reach = cloud
        .iter()
        .filter_map(|q| {
            let off = q - end;
            let along = off.dot(&dir);
            (along > 0.0 && (off - dir * along).norm() <= corridor).then_some(along)
        })
        .fold(0.0, f64::max);
    if reach > 0.0 {
        line.push(end + dir * reach);
    }
}

/// Farthest-point sampling: starts at the point farthest from the centroid,
/// then repeatedly adds the point farthest from the current sample. Stops at
/// `max` samples or when that farthest distance is at most `min_spacing`.
/// Returned indices are in selection order.
pub fn farthest_point_sample(points: &[Point3<f64>], max: usize, min_spacing: f64) -> Vec<usize> {
    if points.is_empty() || max == 0 {
        return Vec::new();
    }
    let c = centroid(points).expect("non-empty");
    let first = argmax(points.iter().map(|p| (p - c).norm_squared()));
    let mut picked = vec![first];
    let mut dist: Vec<f64> = points.iter().map(|p| (p - points[first]).norm_squared()).collect();
    let limit = min_spacing * min_spacing;
    while picked.len() < max.min(points.len()) {
        let next = argmax(dist.iter().copied());
        if dist[next] <= limit {
            break;
        }
        picked.push(next);
        let q = points[next];
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min((p - q).norm_squared());
        }
    }
    picked
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in values.enumerate() {
        if v > best.0 {
            best = (v, i);
        }
    }
    best.1
}
