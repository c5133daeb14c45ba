//! File formats: PLY clouds, camera manifests, heatmap PNGs, instance and
//! annotation JSON.

mod bundle;
mod cameras;
mod instances;
mod ply;

pub use bundle::{load_views, SceneBundle, SceneManifest, SCENE_MANIFEST};
pub use cameras::{
    heatmap_path, read_cameras, read_heatmaps, read_raster, write_cameras, write_raster, BitDepth, CameraEntry,
    CameraRecord, MANIFEST_ROTATION_TOLERANCE,
};
pub use instances::{
    obj_string, read_instance_index, read_instances, write_instances, write_obj, GeometryKind, InstanceDocument, InstanceRecord,
    IndexedInstance, InstanceIndex, InstanceShape, Provenance, INSTANCE_SCHEMA_VERSION,
};
pub use ply::{
    parse_vertices, ply_bytes, read_ply, read_segmented_ply, segmented_from_table, segmented_ply_bytes,
    write_ply, write_segmented_ply, PlyEncoding, VertexTable,
};

use crate::error::{Error, Result};
use crate::eval::AnnotationSet;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::path::Path;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema { path: path.into(), reason: e.to_string() })
}

/// Pretty-printed JSON with a trailing newline. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Schema { path: path.into(), reason: e.to_string() })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_annotations(path: &Path) -> Result<AnnotationSet> {
    let set: AnnotationSet = read_json(path)?;
    set.validate().map_err(|e| Error::Schema { path: path.into(), reason: e.to_string() })?;
    Ok(set)
}

pub fn write_annotations(path: &Path, set: &AnnotationSet) -> Result<()> {
    write_json(path, set)
}

/// Create `dir` and its parents.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
