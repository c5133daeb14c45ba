//! Stage parameters loadable from TOML or JSON.

use crate::clustering::ClusteringParams;
use crate::crack::MedialAxisParams;
use crate::error::{Error, Result};
use crate::eval::EvalParams;
use crate::geometry::DEFAULT_NORMAL_K;
use crate::io::{GeometryKind, PlyEncoding};
use crate::mapping::FusionParams;
use crate::polygon::PolygonParams;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalParams {
    pub k: usize,
    /// Re-estimate normals even when the cloud carries them.
    pub recompute: bool,
}

impl Default for NormalParams {
    fn default() -> Self {
        Self { k: DEFAULT_NORMAL_K, recompute: false }
    }
}

/// Geometry produced for each class; unlisted classes get polygons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassPolicy(pub BTreeMap<String, GeometryKind>);

impl Default for ClassPolicy {
    fn default() -> Self {
        Self(BTreeMap::from([
            ("crack".into(), GeometryKind::MedialAxis),
            ("spalling".into(), GeometryKind::Polygon),
            ("corrosion".into(), GeometryKind::Polygon),
        ]))
    }
}

impl ClassPolicy {
    pub fn kind(&self, class: &str) -> GeometryKind {
        self.0.get(class).copied().unwrap_or(GeometryKind::Polygon)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub normals: NormalParams,
    pub fusion: FusionParams,
    pub clustering: ClusteringParams,
    pub medial_axis: MedialAxisParams,
    pub polygon: PolygonParams,
    pub policy: ClassPolicy,
    pub eval: EvalParams,
    pub ply_encoding: PlyEncoding,
}

impl PipelineConfig {
    /// Parse by extension: `.json` as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema = |reason: String| Error::Schema { path: path.into(), reason };
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| schema(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| schema(e.to_string()))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
