//! DBSCAN grouping of same-class points into damage instances.

use crate::error::{Error, Result};
use crate::geometry::KdTree;
use crate::mapping::SegmentedCloud;
use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

/// Cluster id given to noise points.
pub const NOISE: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DbscanParams {
    /// Neighborhood radius in meters. When unset it is derived from the data
    /// as `eps_auto_factor` times the median nearest-neighbor distance.
    pub eps: Option<f64>,
    /// Points (including the point itself) needed within `eps` for a core point.
    pub min_pts: usize,
    pub eps_auto_factor: f64,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self { eps: None, min_pts: 10, eps_auto_factor: 4.0 }
    }
}

impl DbscanParams {
    pub fn with_min_pts(min_pts: usize) -> Self {
        Self { min_pts, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_pts < 1 {
            return Err(Error::param("min_pts", "must be at least 1"));
        }
        match self.eps {
            Some(eps) if !(eps > 0.0 && eps.is_finite()) => {
                Err(Error::param("eps", format!("must be positive, got {eps}")))
            }
            None if !(self.eps_auto_factor > 0.0 && self.eps_auto_factor.is_finite()) => {
                Err(Error::param("eps_auto_factor", "must be positive when eps is unset"))
            }
            _ => Ok(()),
        }
    }

    /// The radius actually used for `points`.
    pub fn resolve_eps(&self, points: &[Point3<f64>]) -> f64 {
        if let Some(eps) = self.eps {
            return eps;
        }
        let mut nn = nearest_neighbor_distances(points);
        nn.sort_by(f64::total_cmp);
        let median = if nn.is_empty() { 0.0 } else { nn[nn.len() / 2] };
        let base = if median > 0.0 {
            median
        } else {
            nn.iter().copied().find(|&d| d > 0.0).unwrap_or(1e-12)
        };
        self.eps_auto_factor * base
    }
}

fn nearest_neighbor_distances(points: &[Point3<f64>]) -> Vec<f64> {
    if points.len() < 2 {
        return Vec::new();
    }
    let tree = KdTree::new(points);
    (0..points.len())
        .into_par_iter()
        .map(|i| tree.knn(&points[i], 1, Some(i))[0].distance)
        .collect()
}

/// Density-based clustering; returns a cluster id per point, [`NOISE`] for noise.
///
/// Clusters are seeded from core points in ascending index order and expanded
/// breadth-first, so a border point reachable from several clusters joins the
/// one with the lowest seed.
pub fn dbscan(points: &[Point3<f64>], params: &DbscanParams) -> Result<Vec<i64>> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::Empty("dbscan needs at least one point"));
    }
    let eps = params.resolve_eps(points);
    let tree = KdTree::new(points);
    let core: Vec<bool> = points
        .par_iter()
        .map(|p| tree.within(p, eps).len() >= params.min_pts)
        .collect();

    let mut labels = vec![NOISE; points.len()];
    let mut next = 0i64;
    let mut queue = VecDeque::new();
    for seed in 0..points.len() {
        if labels[seed] != NOISE || !core[seed] {
            continue;
        }
        labels[seed] = next;
        queue.push_back(seed);
        while let Some(q) = queue.pop_front() {
            for nb in tree.within(&points[q], eps) {
                if labels[nb] == NOISE {
                    labels[nb] = next;
                    if core[nb] {
                        queue.push_back(nb);
                    }
                }
            }
        }
        next += 1;
    }
    Ok(labels)
}

/// One damage instance: same-class points of a single DBSCAN cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceCloud {
    pub id: usize,
    pub class: usize,
    /// Indices into the parent segmented cloud, ascending.
    pub indices: Vec<usize>,
    pub positions: Vec<Point3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

impl InstanceCloud {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Mean fused score of the instance's class over its points.
    pub fn confidence(&self, seg: &SegmentedCloud) -> f64 {
        if self.indices.is_empty() {
            return 0.0;
        }
        self.indices.iter().map(|&i| seg.score(i, self.class)).sum::<f64>() / self.indices.len() as f64
    }

    /// Rebuild from parent indices.
    pub fn from_indices(id: usize, class: usize, indices: Vec<usize>, seg: &SegmentedCloud) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty("instance without points"));
        }
        for &i in &indices {
            if i >= seg.len() {
                return Err(Error::InvalidCloud(format!("instance {id} references point {i}")));
            }
            if seg.label(i) != class {
                return Err(Error::InvalidCloud(format!(
                    "instance {id} point {i} has label {} instead of {class}",
                    seg.label(i)
                )));
            }
        }
        let sub = seg.cloud().select(&indices);
        Ok(Self {
            id,
            class,
            positions: sub.positions().to_vec(),
            normals: sub.normals().map(<[_]>::to_vec),
            indices,
        })
    }
}

/// DBSCAN settings per class name, with a fallback for unlisted classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringParams {
    pub fallback: DbscanParams,
    pub classes: BTreeMap<String, DbscanParams>,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            fallback: DbscanParams::with_min_pts(10),
            classes: BTreeMap::from([("crack".to_string(), DbscanParams::with_min_pts(5))]),
        }
    }
}

impl ClusteringParams {
    pub fn for_class(&self, name: &str) -> &DbscanParams {
        self.classes.get(name).unwrap_or(&self.fallback)
    }
}

/// Cluster every non-background class and return the instances ordered by
/// class index, then size (largest first), then lowest member index.
pub fn split_instances(seg: &SegmentedCloud, params: &ClusteringParams) -> Result<Vec<InstanceCloud>> {
    let catalog = seg.catalog();
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for class in 0..catalog.len() {
        if class == catalog.background() {
            continue;
        }
        let members = seg.indices_of(class);
        if members.is_empty() {
            continue;
        }
        let pts: Vec<Point3<f64>> = members.iter().map(|&i| seg.cloud().positions()[i]).collect();
        let labels = dbscan(&pts, params.for_class(catalog.name(class)))?;
        let mut clusters: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (local, &l) in labels.iter().enumerate() {
            if l != NOISE {
                clusters.entry(l).or_default().push(members[local]);
            }
        }
        let mut found: Vec<Vec<usize>> = clusters.into_values().collect();
        found.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        groups.extend(found.into_iter().map(|ix| (class, ix)));
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(id, (class, indices))| InstanceCloud::from_indices(id, class, indices, seg))
        .collect()
}
