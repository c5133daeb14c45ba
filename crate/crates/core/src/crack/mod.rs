//! Crack skeletonization: Laplacian contraction, spanning tree and
//! partitioning into branch-free polylines.

mod contraction;
mod laplacian;
mod medial_axis;
mod mst;
mod polyline;
pub mod sparse;

pub use contraction::{contract, Anchor, Contraction, ContractionIteration, ContractionParams, ContractionStop};
pub use laplacian::{build_laplacian, NeighborTopology};
pub use medial_axis::{extract_medial_axis, extract_points, farthest_point_sample, ExtractionReport, MedialAxisParams};
pub use mst::{minimum_spanning_tree, MstParams};
pub use polyline::{partition_paths, partition_polylines, polyline_length, simplify, MedialAxis};
