//! Stage orchestration: mapping, clustering and extraction.

use crate::camera::CameraView;
use crate::clustering::{split_instances, InstanceCloud};
use crate::config::PipelineConfig;
use crate::crack::extract_medial_axis;
use crate::error::{Error, Result};
use crate::geometry::{estimate_normals, NormalOrientation, PointCloud};
use crate::io::{
    GeometryKind, IndexedInstance, InstanceDocument, InstanceIndex, InstanceRecord, InstanceShape, Provenance,
};
use crate::mapping::{fuse, ClassCatalog, SegmentedCloud};
use crate::polygon::extract_polygon;
use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Fuse heatmaps onto the cloud, estimating normals when needed. Estimated
/// normals face the mean camera center.
pub fn map_cloud(
    cloud: &PointCloud,
    views: &[CameraView],
    catalog: &ClassCatalog,
    config: &PipelineConfig,
) -> Result<SegmentedCloud> {
    if views.is_empty() {
        return Err(Error::NoViews);
    }
    if cloud.normals().is_some() && !config.normals.recompute {
        return fuse(cloud, views, catalog, &config.fusion);
    }
    let center = views.iter().fold(Vector3::zeros(), |acc, v| acc + v.center().coords) / views.len() as f64;
    let with_normals = estimate_normals(cloud, config.normals.k, NormalOrientation::Toward(Point3::from(center)))?;
    fuse(&with_normals, views, catalog, &config.fusion)
}

pub fn cluster(seg: &SegmentedCloud, config: &PipelineConfig) -> Result<Vec<InstanceCloud>> {
    split_instances(seg, &config.clustering)
}

pub fn instance_index(seg: &SegmentedCloud, instances: &[InstanceCloud]) -> InstanceIndex {
    let catalog = seg.catalog();
    InstanceIndex::new(
        catalog.names().to_vec(),
        instances
            .iter()
            .map(|i| IndexedInstance { id: i.id, class: catalog.name(i.class).to_string(), indices: i.indices.clone() })
            .collect(),
    )
}

/// Rebuild instances from an index written for the same segmented cloud.
pub fn instances_from_index(seg: &SegmentedCloud, index: &InstanceIndex) -> Result<Vec<InstanceCloud>> {
    if index.classes != seg.catalog().names() {
        return Err(Error::param("classes", "instance index and segmented cloud use different classes"));
    }
    index
        .instances
        .iter()
        .map(|i| InstanceCloud::from_indices(i.id, seg.catalog().index_of(&i.class)?, i.indices.clone(), seg))
        .collect()
}

/// An instance whose geometry could not be extracted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedInstance {
    pub id: usize,
    pub class: String,
    pub point_count: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub document: InstanceDocument,
    pub skipped: Vec<SkippedInstance>,
}

/// Medial axes or polygons for every instance, chosen by the class policy.
/// Confidence is the mean fused score of the instance's class.
pub fn extract(seg: &SegmentedCloud, instances: &[InstanceCloud], config: &PipelineConfig) -> Result<Extraction> {
    config.medial_axis.validate()?;
    config.polygon.validate()?;
    let catalog = seg.catalog();
    let axis_params = serde_json::to_value(config.medial_axis).expect("params serialize");
    let polygon_params = serde_json::to_value(config.polygon).expect("params serialize");
    let results: Vec<std::result::Result<InstanceRecord, SkippedInstance>> = instances
        .par_iter()
        .map(|inst| {
            let class = catalog.name(inst.class).to_string();
            let kind = config.policy.kind(&class);
            let shape = match kind {
                GeometryKind::MedialAxis => extract_medial_axis(inst, &config.medial_axis).map(|axis| {
                    InstanceShape::MedialAxis { polylines: axis.polylines.iter().map(|l| to_arrays(l)).collect() }
                }),
                GeometryKind::Polygon => extract_polygon(inst, &config.polygon).map(|poly| InstanceShape::Polygon {
                    vertices: to_arrays(&poly.vertices),
                    auxiliary_loops: poly
                        .auxiliary_loops
                        .iter()
                        .map(|l| l.iter().map(|&i| to_array(&inst.positions[i])).collect())
                        .collect(),
                }),
            };
            match shape {
                Ok(shape) => Ok(InstanceRecord {
                    id: inst.id,
                    class,
                    shape,
                    confidence: inst.confidence(seg).clamp(0.0, 1.0),
                    point_count: inst.len(),
                    provenance: Provenance::new(
                        match kind {
                            GeometryKind::MedialAxis => "medial_axis",
                            GeometryKind::Polygon => "polygon",
                        },
                        match kind {
                            GeometryKind::MedialAxis => axis_params.clone(),
                            GeometryKind::Polygon => polygon_params.clone(),
                        },
                    ),
                }),
                Err(e) => Err(SkippedInstance { id: inst.id, class, point_count: inst.len(), reason: e.to_string() }),
            }
        })
        .collect();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(s) => skipped.push(s),
        }
    }
    Ok(Extraction { document: InstanceDocument::new(catalog.names().to_vec(), records), skipped })
}

fn to_array(p: &Point3<f64>) -> [f64; 3] {
    [p.x, p.y, p.z]
}

fn to_arrays(ps: &[Point3<f64>]) -> Vec<[f64; 3]> {
    ps.iter().map(to_array).collect()
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub segmented: SegmentedCloud,
    pub instances: Vec<InstanceCloud>,
    pub extraction: Extraction,
}

pub fn run(
    cloud: &PointCloud,
    views: &[CameraView],
    catalog: &ClassCatalog,
    config: &PipelineConfig,
) -> Result<PipelineRun> {
    let segmented = map_cloud(cloud, views, catalog, config)?;
    let instances = cluster(&segmented, config)?;
    let extraction = extract(&segmented, &instances, config)?;
    Ok(PipelineRun { segmented, instances, extraction })
}
