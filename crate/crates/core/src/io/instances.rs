//! Schema-versioned instance JSON and OBJ export.

use crate::error::{Error, Result};
use crate::eval::{Geometry, Prediction};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    MedialAxis,
    Polygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceShape {
    MedialAxis { polylines: Vec<Vec<[f64; 3]>> },
    Polygon { vertices: Vec<[f64; 3]>, auxiliary_loops: Vec<Vec<[f64; 3]>> },
}

/// Tool, stage and parameters that produced a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub parameters: serde_json::Value,
}

impl Provenance {
    pub fn new(stage: &str, parameters: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            stage: stage.into(),
            parameters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: usize,
    pub class: String,
    #[serde(flatten)]
    pub shape: InstanceShape,
    pub confidence: f64,
    pub point_count: usize,
    pub provenance: Provenance,
}

impl InstanceRecord {
    pub fn kind(&self) -> GeometryKind {
        match self.shape {
            InstanceShape::MedialAxis { .. } => GeometryKind::MedialAxis,
            InstanceShape::Polygon { .. } => GeometryKind::Polygon,
        }
    }

    /// Geometry scored by the metrics: every polyline, or the main loop.
    pub fn geometry(&self) -> Geometry {
        match &self.shape {
            InstanceShape::MedialAxis { polylines } => Geometry::Polylines { lines: polylines.clone() },
            InstanceShape::Polygon { vertices, .. } => Geometry::Polygon { vertices: vertices.clone() },
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidCloud(format!(
                "instance {} confidence {} outside [0, 1]",
                self.id, self.confidence
            )));
        }
        self.geometry().validate()?;
        if let InstanceShape::Polygon { auxiliary_loops, .. } = &self.shape {
            for l in auxiliary_loops {
                Geometry::Polygon { vertices: l.clone() }.validate()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub schema_version: u32,
    pub classes: Vec<String>,
    pub instances: Vec<InstanceRecord>,
}

impl InstanceDocument {
    pub fn new(classes: Vec<String>, instances: Vec<InstanceRecord>) -> Self {
        Self { schema_version: INSTANCE_SCHEMA_VERSION, classes, instances }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != INSTANCE_SCHEMA_VERSION {
            return Err(Error::param(
                "schema_version",
                format!("expected {INSTANCE_SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        let mut ids = BTreeSet::new();
        for r in &self.instances {
            if !ids.insert(r.id) {
                return Err(Error::InvalidCloud(format!("duplicate instance id {}", r.id)));
            }
            if !self.classes.contains(&r.class) {
                return Err(Error::UnknownClass(r.class.clone()));
            }
            r.validate()?;
        }
        Ok(())
    }

    /// Records as predictions indexed into `classes` (usually the annotation
    /// catalog).
    pub fn predictions(&self, classes: &[String]) -> Result<Vec<Prediction>> {
        self.instances
            .iter()
            .map(|r| {
                let class = classes
                    .iter()
                    .position(|c| *c == r.class)
                    .ok_or_else(|| Error::UnknownClass(r.class.clone()))?;
                Ok(Prediction { class, confidence: r.confidence, geometry: r.geometry() })
            })
            .collect()
    }
}

/// Point membership of every instance, as written by the clustering stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceIndex {
    pub schema_version: u32,
    pub classes: Vec<String>,
    pub instances: Vec<IndexedInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexedInstance {
    pub id: usize,
    pub class: String,
    /// Ascending indices into the segmented cloud.
    pub indices: Vec<usize>,
}

impl InstanceIndex {
    pub fn new(classes: Vec<String>, instances: Vec<IndexedInstance>) -> Self {
        Self { schema_version: INSTANCE_SCHEMA_VERSION, classes, instances }
    }
}

pub fn read_instance_index(path: &Path) -> Result<InstanceIndex> {
    let index: InstanceIndex = super::read_json(path)?;
    if index.schema_version != INSTANCE_SCHEMA_VERSION {
        return Err(Error::Schema {
            path: path.into(),
            reason: format!("expected schema version {INSTANCE_SCHEMA_VERSION}, got {}", index.schema_version),
        });
    }
    Ok(index)
}

pub fn write_instances(path: &Path, doc: &InstanceDocument) -> Result<()> {
    super::write_json(path, doc)
}

pub fn read_instances(path: &Path) -> Result<InstanceDocument> {
    let doc: InstanceDocument = super::read_json(path)?;
    doc.validate().map_err(|e| Error::Schema { path: path.into(), reason: e.to_string() })?;
    Ok(doc)
}

/// Wavefront OBJ with one object per instance: polylines as `l` runs, loops
/// closed by repeating their first vertex.
pub fn obj_string(doc: &InstanceDocument) -> String {
    let mut out = String::new();
    let mut next = 1usize;
    let mut emit = |out: &mut String, run: &[[f64; 3]], closed: bool| {
        for v in run {
            writeln!(out, "v {} {} {}", v[0], v[1], v[2]).unwrap();
        }
        let mut idx: Vec<usize> = (next..next + run.len()).collect();
        if closed {
            idx.push(next);
        }
        next += run.len();
        let list: Vec<String> = idx.iter().map(usize::to_string).collect();
        writeln!(out, "l {}", list.join(" ")).unwrap();
    };
    for r in &doc.instances {
        writeln!(out, "o instance_{}_{}", r.id, r.class).unwrap();
        match &r.shape {
            InstanceShape::MedialAxis { polylines } => {
                for l in polylines {
                    emit(&mut out, l, false);
                }
            }
            InstanceShape::Polygon { vertices, auxiliary_loops } => {
                emit(&mut out, vertices, true);
                for l in auxiliary_loops {
                    emit(&mut out, l, true);
                }
            }
        }
    }
    out
}

pub fn write_obj(path: &Path, doc: &InstanceDocument) -> Result<()> {
    std::fs::write(path, obj_string(doc)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn crack() -> InstanceRecord {
        InstanceRecord {
            id: 0,
            class: "crack".into(),
            shape: InstanceShape::MedialAxis {
                polylines: vec![
                    vec![[0.1, 0.2, 0.3], [1.0 / 3.0, 2e-9, -7.5]],
                    vec![[0.0; 3], [1.0, 1.0, 1.0], [2.0, 0.5, 0.25]],
                ],
            },
            confidence: 0.875,
            point_count: 120,
            provenance: Provenance::new("extract", serde_json::json!({"k": 8})),
        }
    }

    #[test]
    fn empty_document() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.json");
        let doc = InstanceDocument::new(vec!["background".into()], vec![]);
        write_instances(&path, &doc).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"instances\": []"));
        assert_eq!(read_instances(&path).unwrap(), doc);
    }

    #[test]
    fn crack_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.json");
        let doc = InstanceDocument::new(vec!["background".into(), "crack".into()], vec![crack()]);
        write_instances(&path, &doc).unwrap();
        assert_eq!(read_instances(&path).unwrap(), doc);
    }

    #[test]
    fn rejects_unknown_version_and_class() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.json");
        let mut doc = InstanceDocument::new(vec!["background".into()], vec![crack()]);
        write_instances(&path, &doc).unwrap();
        assert!(matches!(read_instances(&path), Err(Error::Schema { .. })));
        doc.classes.push("crack".into());
        doc.schema_version = 9;
        write_instances(&path, &doc).unwrap();
        assert!(matches!(read_instances(&path), Err(Error::Schema { .. })));
    }

    #[test]
    fn obj_lines() {
        let doc = InstanceDocument::new(vec!["crack".into()], vec![crack()]);
        let obj = obj_string(&doc);
        let lines: Vec<&str> = obj.lines().filter(|l| l.starts_with('l')).collect();
        assert_eq!(lines, vec!["l 1 2", "l 3 4 5"]);
        assert!(obj.contains("v 0.3333333333333333 0.000000002 -7.5"));
    }
}
