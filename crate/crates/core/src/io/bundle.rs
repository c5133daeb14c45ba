use super::{read_cameras, read_heatmaps, read_json, read_ply};
use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::mapping::ClassCatalog;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// File name of the index inside a scene directory.
pub const SCENE_MANIFEST: &str = "scene.json";

/// Index of a scene directory. Paths are relative to the directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub cloud: PathBuf,
    pub cameras: PathBuf,
    pub heatmaps: PathBuf,
    pub classes: Vec<String>,
    pub background: String,
    #[serde(default)]
    pub annotations: Option<PathBuf>,
    /// Stage parameters (TOML or JSON).
    #[serde(default)]
    pub config: Option<PathBuf>,
}

/// A scene directory whose referenced files exist.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    root: PathBuf,
    manifest: SceneManifest,
}

impl SceneBundle {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest: SceneManifest = read_json(&dir.join(SCENE_MANIFEST))?;
        let bundle = Self { root: dir.to_path_buf(), manifest };
        bundle.catalog()?;
        let m = &bundle.manifest;
        let mut required = vec![&m.cloud, &m.cameras, &m.heatmaps];
        required.extend(m.annotations.iter());
        required.extend(m.config.iter());
        for rel in required {
            let path = bundle.root.join(rel);
            if !path.exists() {
                return Err(Error::io(&path, std::io::ErrorKind::NotFound.into()));
            }
        }
        Ok(bundle)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &SceneManifest {
        &self.manifest
    }

    pub fn cloud_path(&self) -> PathBuf {
        self.root.join(&self.manifest.cloud)
    }

    pub fn cameras_path(&self) -> PathBuf {
        self.root.join(&self.manifest.cameras)
    }

    pub fn heatmap_dir(&self) -> PathBuf {
        self.root.join(&self.manifest.heatmaps)
    }

    pub fn annotations_path(&self) -> Option<PathBuf> {
        self.manifest.annotations.as_ref().map(|p| self.root.join(p))
    }

    pub fn config_path(&self) -> Option<PathBuf> {
        self.manifest.config.as_ref().map(|p| self.root.join(p))
    }

    pub fn catalog(&self) -> Result<ClassCatalog> {
        let m = &self.manifest;
        let bg = m.classes.iter().position(|c| *c == m.background).ok_or_else(|| Error::Schema {
            path: self.root.join(SCENE_MANIFEST),
            reason: format!("background class `{}` is not listed", m.background),
        })?;
        ClassCatalog::new(m.classes.clone(), bg)
    }

    pub fn load_cloud(&self) -> Result<PointCloud> {
        read_ply(&self.cloud_path())
    }

    /// Every camera with its heatmaps attached, in manifest order.
    pub fn load_views(&self, catalog: &ClassCatalog) -> Result<Vec<CameraView>> {
        load_views(&self.cameras_path(), &self.heatmap_dir(), catalog)
    }
}

pub fn load_views(cameras: &Path, heatmap_dir: &Path, catalog: &ClassCatalog) -> Result<Vec<CameraView>> {
    read_cameras(cameras)?
        .par_iter()
        .map(|r| read_heatmaps(r, heatmap_dir, catalog))
        .collect()
}
