//! File schemas. Record streams are JSON Lines (one object per line, blank
//! lines ignored); tasks, configuration and outputs are single documents.
//! Every output document carries `version` and the resolved `config`.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigLayer, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{GroundTruthObject, MetricsReport};
use crate::model::{EmbeddingVector, Primitive, TaskSet};
use crate::scenegraph::{
    ImageFeature, PlaceNode, RankedObject, SceneGraph, ScenePlace, SceneRegion, SCHEMA_VERSION,
};
use crate::tracker::SegmentObservation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TasksFile {
    pub labels: Vec<String>,
    pub embeddings: Vec<EmbeddingVector>,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl TasksFile {
    /// Settings the tasks file contributes: its `alpha` is the default
    /// object-layer null score and its `k` the default top-k.
    pub fn config_layer(&self) -> ConfigLayer {
        ConfigLayer {
            alpha_objects: Some(self.alpha),
            k: self.k,
            ..Default::default()
        }
    }

    pub fn task_set(&self) -> Result<TaskSet> {
        match self.k {
            Some(k) => TaskSet::new(self.labels.clone(), self.embeddings.clone(), self.alpha, k),
            None => {
                TaskSet::with_default_k(self.labels.clone(), self.embeddings.clone(), self.alpha)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryFile {
    pub embedding: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionsFile {
    pub version: u32,
    pub config: RunConfig,
    pub places: Vec<ScenePlace>,
    pub regions: Vec<SceneRegion>,
}

/// One row per incremental insert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub frame: u64,
    pub inserted: usize,
    pub total_primitives: usize,
    pub components: usize,
    pub reclustered: usize,
    pub recut: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyLog {
    pub version: u32,
    pub config: RunConfig,
    pub rows: Vec<LatencyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub version: u32,
    pub config: RunConfig,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResultFile {
    pub version: u32,
    pub config: RunConfig,
    pub results: Vec<RankedObject>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses JSON Lines text. `check` validates each record; its message is
/// reported against the record's line.
pub fn parse_records<T: DeserializeOwned>(
    text: &str,
    path: &Path,
    mut check: impl FnMut(&T) -> std::result::Result<(), String>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(line).map_err(|e| Error::schema(path, i + 1, e))?;
        check(&rec).map_err(|m| Error::schema(path, i + 1, m))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_records<T: DeserializeOwned>(
    path: &Path,
    check: impl FnMut(&T) -> std::result::Result<(), String>,
) -> Result<Vec<T>> {
    parse_records(&read_text(path)?, path, check)
}

pub fn parse_document<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::schema(path, e.line(), e))
}

pub fn read_document<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_document(&read_text(path)?, path)
}

pub fn to_records<T: Serialize>(records: &[T]) -> Result<String> {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).map_err(|e| Error::Config(e.to_string()))?);
        s.push('\n');
    }
    Ok(s)
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    fs::write(path, to_records(records)?).map_err(|e| Error::io(path, e))
}

pub fn write_document<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn check_dim(e: &EmbeddingVector, dim: usize) -> std::result::Result<(), String> {
    if e.dim() == dim {
        Ok(())
    } else {
        Err(format!(
            "embedding has dimension {}, tasks use {dim}",
            e.dim()
        ))
    }
}

fn unique_ids() -> impl FnMut(u64) -> std::result::Result<(), String> {
    let mut seen = BTreeSet::new();
    move |id| {
        if seen.insert(id) {
            Ok(())
        } else {
            Err(format!("duplicate id {id}"))
        }
    }
}

pub fn read_tasks(path: &Path) -> Result<TasksFile> {
    let t: TasksFile = read_document(path)?;
    t.task_set().map_err(|e| Error::schema(path, 1, e))?;
    Ok(t)
}

pub fn read_config(path: &Path) -> Result<ConfigLayer> {
    toml::from_str(&read_text(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn read_primitives(path: &Path, dim: usize) -> Result<Vec<Primitive>> {
    let mut unique = unique_ids();
    read_records(path, |p: &Primitive| {
        check_dim(&p.embedding, dim)?;
        unique(p.id)
    })
}

pub fn read_observations(path: &Path, dim: usize) -> Result<Vec<SegmentObservation>> {
    read_records(path, |o: &SegmentObservation| {
        check_dim(&o.embedding, dim)?;
        if o.stamp.is_finite() {
            Ok(())
        } else {
            Err("stamp must be finite".into())
        }
    })
}

pub fn read_places(path: &Path) -> Result<Vec<PlaceNode>> {
    let mut unique = unique_ids();
    read_records(path, |p: &PlaceNode| {
        if p.visible.is_empty() {
            return Err(format!("place {} has no visible images", p.id));
        }
        unique(p.id)
    })
}

pub fn read_images(path: &Path, dim: usize) -> Result<Vec<ImageFeature>> {
    let mut unique = unique_ids();
    read_records(path, |im: &ImageFeature| {
        check_dim(&im.embedding, dim)?;
        unique(im.id)
    })
}

/// Task indices are 0-based and must be below `tasks`.
pub fn read_ground_truth(path: &Path, tasks: usize) -> Result<Vec<GroundTruthObject>> {
    let mut unique = unique_ids();
    read_records(path, |g: &GroundTruthObject| {
        if g.tasks.is_empty() {
            return Err(format!("ground truth {} lists no task", g.id));
        }
        if let Some(t) = g.tasks.iter().find(|&&t| t >= tasks) {
            return Err(format!("task index {t} but only {tasks} tasks"));
        }
        unique(g.id)
    })
}

fn check_version(path: &Path, version: u32) -> Result<()> {
    if version == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::schema(
            path,
            1,
            format!("schema version {version}, expected {SCHEMA_VERSION}"),
        ))
    }
}

pub fn read_scene_graph(path: &Path) -> Result<SceneGraph> {
    let g: SceneGraph = read_document(path)?;
    check_version(path, g.version)?;
    Ok(g)
}

pub fn read_regions(path: &Path) -> Result<RegionsFile> {
    let r: RegionsFile = read_document(path)?;
    check_version(path, r.version)?;
    Ok(r)
}

pub fn read_query(path: &Path) -> Result<QueryFile> {
    read_document(path)
}
