//! Camera manifest JSON and per-class heatmap PNGs.
//!
//! A manifest is an array of entries such as
//!
//! ```json
//! [{"name": "cam00", "width": 640, "height": 480,
//!   "fx": 500.0, "fy": 500.0, "cx": 320.0, "cy": 240.0,
//!   "rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1],
//!   "translation": [0, 0, 0],
//!   "heatmap_prefix": "cam00"}]
//! ```
//!
//! `rotation` is the row-major world-to-camera matrix, so a camera point is
//! `R * X + t`. The entry above sits at the origin looking down +z.

use crate::camera::{orthonormality_error, CameraView, Intrinsics, Raster, ROTATION_TOLERANCE};
use crate::error::{Error, Result};
use crate::mapping::ClassCatalog;
use image::{DynamicImage, ImageBuffer, Luma};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// Largest `max |R^T R - I|` accepted from a manifest. Rotations between the
/// view tolerance and this bound are re-orthonormalized.
pub const MANIFEST_ROTATION_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub heatmap_prefix: String,
}

impl CameraEntry {
    pub fn from_view(view: &CameraView, heatmap_prefix: impl Into<String>) -> Self {
        let k = view.intrinsics();
        let r = view.rotation();
        let t = view.translation();
        Self {
            name: view.name().to_string(),
            width: k.width,
            height: k.height,
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            rotation: std::array::from_fn(|i| r[(i / 3, i % 3)]),
            translation: [t.x, t.y, t.z],
            heatmap_prefix: heatmap_prefix.into(),
        }
    }

    /// Validated view without heatmaps.
    pub fn to_view(&self) -> Result<CameraView> {
        let mut r = Matrix3::from_row_slice(&self.rotation);
        let err = orthonormality_error(&r);
        if !(err <= MANIFEST_ROTATION_TOLERANCE) {
            return Err(Error::InvalidCamera {
                name: self.name.clone(),
                reason: format!("rotation is not orthonormal (max |R^T R - I| = {err:.3e})"),
            });
        }
        let det = r.determinant();
        if det < 0.0 {
            return Err(Error::ImproperRotation { name: self.name.clone(), det });
        }
        if err > ROTATION_TOLERANCE {
            let svd = r.svd(true, true);
            r = svd.u.unwrap() * svd.v_t.unwrap();
        }
        let intrinsics = Intrinsics {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
        };
        CameraView::new(self.name.clone(), intrinsics, r, Vector3::from(self.translation))
    }
}

/// A validated view and the file prefix of its heatmaps.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRecord {
    pub view: CameraView,
    pub heatmap_prefix: String,
}

pub fn read_cameras(path: &Path) -> Result<Vec<CameraRecord>> {
    let entries: Vec<CameraEntry> = super::read_json(path)?;
    let mut names = BTreeSet::new();
    entries
        .iter()
        .map(|e| {
            if !names.insert(e.name.as_str()) {
                return Err(Error::Schema { path: path.into(), reason: format!("duplicate camera `{}`", e.name) });
            }
            Ok(CameraRecord { view: e.to_view()?, heatmap_prefix: e.heatmap_prefix.clone() })
        })
        .collect()
}

pub fn write_cameras(path: &Path, entries: &[CameraEntry]) -> Result<()> {
    super::write_json(path, entries)
}

pub fn heatmap_path(dir: &Path, prefix: &str, class: &str) -> PathBuf {
    dir.join(format!("{prefix}_{class}.png"))
}

/// Decode a grayscale 8- or 16-bit PNG into probabilities `value / max`.
pub fn read_raster(path: &Path) -> Result<Raster> {
    if !path.is_file() {
        return Err(Error::MissingRaster { path: path.into() });
    }
    let img = image::open(path).map_err(|source| Error::Image { path: path.into(), source })?;
    let (w, h) = (img.width(), img.height());
    let data: Vec<f32> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect(),
        other => {
            return Err(Error::Schema {
                path: path.into(),
                reason: format!("expected an 8- or 16-bit grayscale PNG, got {:?}", other.color()),
            })
        }
    };
    Raster::new(w, h, data)
}

/// Attach `<dir>/<prefix>_<class>.png` for every class of `catalog`.
pub fn read_heatmaps(record: &CameraRecord, dir: &Path, catalog: &ClassCatalog) -> Result<CameraView> {
    let k = record.view.intrinsics();
    let rasters = catalog
        .names()
        .iter()
        .map(|class| {
            let path = heatmap_path(dir, &record.heatmap_prefix, class);
            let r = read_raster(&path)?;
            if r.width() != k.width || r.height() != k.height {
                return Err(Error::DimensionMismatch {
                    path,
                    got_w: r.width(),
                    got_h: r.height(),
                    want_w: k.width,
                    want_h: k.height,
                });
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    record.view.clone().with_heatmaps(rasters)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

/// Encode probabilities as a grayscale PNG, rounding to the nearest level.
pub fn write_raster(path: &Path, raster: &Raster, depth: BitDepth) -> Result<()> {
    let (w, h) = (raster.width(), raster.height());
    let img = match depth {
        BitDepth::Eight => {
            let px = raster.data().iter().map(|v| (v * 255.0).round() as u8).collect();
            DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, px).expect("sized"))
        }
        BitDepth::Sixteen => {
            let px = raster.data().iter().map(|v| (v * 65535.0).round() as u16).collect();
            DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, px).expect("sized"))
        }
    };
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn entry() -> CameraEntry {
        CameraEntry {
            name: "cam".into(),
            width: 4,
            height: 3,
            fx: 10.0,
            fy: 10.0,
            cx: 2.0,
            cy: 1.5,
            rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            translation: [0.0; 3],
            heatmap_prefix: "cam".into(),
        }
    }

    #[test]
    fn identity_camera_sits_at_origin() {
        let view = entry().to_view().unwrap();
        assert_eq!(view.center(), Point3::origin());
        let pr = view.project(&Point3::new(0.0, 0.0, 5.0)).unwrap();
        assert_eq!((pr.u, pr.v, pr.depth), (2.0, 1.5, 5.0));
    }

    #[test]
    fn improper_rotation() {
        let mut e = entry();
        e.rotation[8] = -1.0;
        let err = e.to_view().unwrap_err();
        assert!(err.to_string().contains("improper rotation"), "{err}");
    }

    #[test]
    fn slightly_off_rotation_is_repaired() {
        let mut e = entry();
        e.rotation[1] = 3e-5;
        let view = e.to_view().unwrap();
        assert!(orthonormality_error(view.rotation()) < 1e-12);
        e.rotation[1] = 1e-3;
        assert!(matches!(e.to_view(), Err(Error::InvalidCamera { .. })));
    }

    #[test]
    fn entry_round_trips_through_view() {
        let view = entry().to_view().unwrap();
        assert_eq!(CameraEntry::from_view(&view, "cam"), entry());
    }

    #[test]
    fn sixteen_bit_half_level() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.png");
        let img = ImageBuffer::<Luma<u16>, _>::from_raw(1, 1, vec![32768u16]).unwrap();
        img.save(&path).unwrap();
        let r = read_raster(&path).unwrap();
        assert!((r.get(0, 0) as f64 - 32768.0 / 65535.0).abs() < 1e-7);
        assert!((r.get(0, 0) as f64 - 0.50000763).abs() < 1e-7);
    }

    #[test]
    fn white_and_black_eight_bit() {
        let dir = tempfile::tempdir().unwrap();
        for (v, want) in [(255u8, 1.0f32), (0, 0.0)] {
            let path = dir.path().join(format!("{v}.png"));
            ImageBuffer::<Luma<u8>, _>::from_raw(3, 2, vec![v; 6]).unwrap().save(&path).unwrap();
            assert!(read_raster(&path).unwrap().data().iter().all(|&x| x == want));
        }
    }

    #[test]
    fn heatmap_attach_errors() {
        let dir = tempfile::tempdir().unwrap();
        let record = CameraRecord { view: entry().to_view().unwrap(), heatmap_prefix: "cam".into() };
        let catalog = ClassCatalog::new(vec!["background".into(), "crack".into()], 0).unwrap();
        let r = Raster::filled(4, 3, 0.5).unwrap();
        write_raster(&heatmap_path(dir.path(), "cam", "background"), &r, BitDepth::Eight).unwrap();
        assert!(matches!(read_heatmaps(&record, dir.path(), &catalog), Err(Error::MissingRaster { .. })));
        let small = Raster::filled(2, 2, 0.5).unwrap();
        write_raster(&heatmap_path(dir.path(), "cam", "crack"), &small, BitDepth::Sixteen).unwrap();
        assert!(matches!(read_heatmaps(&record, dir.path(), &catalog), Err(Error::DimensionMismatch { .. })));
        write_raster(&heatmap_path(dir.path(), "cam", "crack"), &r, BitDepth::Sixteen).unwrap();
        let view = read_heatmaps(&record, dir.path(), &catalog).unwrap();
        assert_eq!(view.heatmaps().len(), 2);
    }
}
