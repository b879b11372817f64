//! End-to-end commands over in-memory inputs, plus file-level wrappers used
//! by the `taskib` binary.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, GroundTruthObject, MetricsReport};
use crate::graph::PrimitiveGraph;
use crate::ib::{agglomerative_ib, ClusteringResult};
use crate::incremental::{Adjacency, IncrementalClusterer};
use crate::io::{self, LatencyLog, LatencyRow, MetricsFile, QueryResultFile, RegionsFile};
use crate::model::{EmbeddingVector, Primitive, TaskSet};
use crate::relevance::build_relevance_matrix;
use crate::scenegraph::{
    assemble, assign_place_features, cluster_regions, query, region_layer, ImageFeature, PlaceNode,
    RankedObject, SceneGraph, ScenePlace, SCHEMA_VERSION,
};
use crate::tracker::{SegmentObservation, Tracker};

/// Task set with the given null score; `k` is capped at `m + 1`.
pub fn task_set_with(tasks: &TaskSet, alpha: f64, k: usize) -> Result<TaskSet> {
    TaskSet::new(
        tasks.labels().to_vec(),
        tasks.embeddings().to_vec(),
        alpha,
        k.min(tasks.len() + 1),
    )
}

/// Relevance, pruning, overlap graph and batch clustering. Returns the
/// clustering of the unpruned primitives.
pub fn cluster_objects(
    primitives: &[Primitive],
    tasks: &TaskSet,
    config: &RunConfig,
) -> Result<ClusteringResult> {
    let tasks = task_set_with(tasks, config.alpha_objects, config.k)?;
    let relevance = build_relevance_matrix(primitives, &tasks)?;
    let kept = primitives
        .iter()
        .filter(|p| !relevance.is_pruned(p.id))
        .cloned();
    let graph = PrimitiveGraph::from_overlaps(kept)?;
    info!(
        "clustering {} primitives ({} pruned), {} edges",
        graph.len(),
        relevance.pruned.len(),
        graph.edge_count()
    );
    agglomerative_ib(&graph, &relevance.dists, config.delta_bar_objects)
}

pub fn cmd_cluster(
    primitives: &[Primitive],
    tasks: &TaskSet,
    config: &RunConfig,
) -> Result<SceneGraph> {
    config.validate()?;
    let result = cluster_objects(primitives, tasks, config)?;
    let tasks = task_set_with(tasks, config.alpha_objects, config.k)?;
    assemble(&result, &tasks, &[], &BTreeMap::new(), None, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutput {
    pub scene: SceneGraph,
    /// Primitives finalized by the tracker, in insertion order.
    pub primitives: Vec<Primitive>,
    pub clustering: ClusteringResult,
    pub latency: Vec<LatencyRow>,
}

struct Inserter<'a> {
    tasks: &'a TaskSet,
    clusterer: IncrementalClusterer,
    primitives: Vec<Primitive>,
    latency: Vec<LatencyRow>,
}

impl Inserter<'_> {
    fn insert(&mut self, frame: u64, finished: Vec<Primitive>) -> Result<()> {
        if finished.is_empty() {
            return Ok(());
        }
        let start = Instant::now();
        let relevance = build_relevance_matrix(&finished, self.tasks)?;
        self.primitives.extend(finished.iter().cloned());
        let batch: Vec<Primitive> = finished
            .into_iter()
            .filter(|p| !relevance.is_pruned(p.id))
            .collect();
        let inserted = batch.len();
        let report = self.clusterer.insert(batch, &relevance.dists)?;
        self.latency.push(LatencyRow {
            frame,
            inserted,
            total_primitives: report.total_primitives,
            components: report.components,
            reclustered: report.reclustered,
            recut: report.recut,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(())
    }
}

/// Tracker, then one incremental insert per frame of finalized primitives,
/// then a final insert of the tracks still open at the end of the stream.
/// Consecutive observations with the same `frame` form one frame.
pub fn cmd_stream(
    observations: &[SegmentObservation],
    tasks: &TaskSet,
    config: &RunConfig,
) -> Result<StreamOutput> {
    config.validate()?;
    let tasks = task_set_with(tasks, config.alpha_objects, config.k)?;
    let mut tracker = Tracker::new(config.theta_track, config.gamma_iou, config.tau_seconds);
    let mut ins = Inserter {
        tasks: &tasks,
        clusterer: IncrementalClusterer::new(config.delta_bar_objects, Adjacency::BoxOverlap)?,
        primitives: Vec::new(),
        latency: Vec::new(),
    };
    let mut now = f64::NEG_INFINITY;
    let mut last_frame = 0;
    for frame in observations.chunk_by(|a, b| a.frame == b.frame) {
        for o in frame {
            now = now.max(o.stamp);
            tracker.observe(o.clone());
        }
        last_frame = frame[0].frame;
        let finished = tracker.expire(now)?;
        ins.insert(last_frame, finished)?;
    }
    let rest = tracker.flush()?;
    ins.insert(last_frame, rest)?;
    let clustering = ins.clusterer.finalize()?;
    let scene = assemble(&clustering, &tasks, &[], &BTreeMap::new(), None, config)?;
    Ok(StreamOutput {
        scene,
        primitives: ins.primitives,
        clustering,
        latency: ins.latency,
    })
}

/// Place features, region clustering with `alpha_regions`, and the labeled
/// region layer.
pub fn cmd_regions(
    places: &[PlaceNode],
    images: &[ImageFeature],
    tasks: &TaskSet,
    config: &RunConfig,
) -> Result<RegionsFile> {
    config.validate()?;
    let tasks = task_set_with(tasks, config.alpha_regions, config.k)?;
    let features = assign_place_features(places, images, config.place_feature_strategy)?;
    let result = cluster_regions(places, &features, &tasks, config.delta_bar_regions)?;
    let places = places
        .iter()
        .map(|p| ScenePlace {
            id: p.id,
            pos: p.pos,
            neighbors: p.neighbors.clone(),
            feature: features.get(&p.id).cloned(),
        })
        .collect();
    Ok(RegionsFile {
        version: SCHEMA_VERSION,
        config: config.clone(),
        places,
        regions: region_layer(&result, &tasks),
    })
}

pub fn cmd_eval(
    scene: &SceneGraph,
    gts: &[GroundTruthObject],
    tasks: &TaskSet,
) -> Result<MetricsReport> {
    let report = evaluate(&scene.objects, gts, tasks)?;
    for w in &report.warnings {
        warn!("{w}");
    }
    Ok(report)
}

pub fn cmd_query(
    scene: &SceneGraph,
    embedding: &EmbeddingVector,
    n: usize,
) -> Result<Vec<RankedObject>> {
    query(scene, embedding, n)
}

/// Renders a metrics report as a plain-text table.
pub fn metrics_table(report: &MetricsReport) -> String {
    let mut s = format!(
        "{:<24} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "task", "osR-s", "osP-s", "F1-s", "osR-r", "osP-r", "F1-r"
    );
    let row = |name: &str, a: [f64; 3], b: [f64; 3]| {
        format!(
            "{:<24} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}\n",
            name, a[0], a[1], a[2], b[0], b[1], b[2]
        )
    };
    for (st, rl) in report.strict.per_task.iter().zip(&report.relaxed.per_task) {
        s.push_str(&row(
            &st.label,
            [st.osr, st.osp, st.f1],
            [rl.osr, rl.osp, rl.f1],
        ));
    }
    let (st, rl) = (&report.strict, &report.relaxed);
    s.push_str(&row(
        "overall",
        [st.osr, st.osp, st.f1],
        [rl.osr, rl.osp, rl.f1],
    ));
    s.push_str(&format!(
        "objects {}  mean IoU {:.4}\n",
        report.object_count, report.mean_iou
    ));
    s
}

/// Reads the tasks file and resolves the configuration: built-in defaults,
/// then the tasks file (`alpha`, `k`), then the config file, then `flags`.
pub fn load_tasks_and_config(
    tasks_path: &Path,
    config_path: Option<&Path>,
    flags: &crate::config::ConfigLayer,
) -> Result<(TaskSet, RunConfig)> {
    let tf = io::read_tasks(tasks_path)?;
    let mut layers = vec![tf.config_layer()];
    if let Some(p) = config_path {
        layers.push(io::read_config(p)?);
    }
    layers.push(flags.clone());
    let config = RunConfig::resolve(&layers)?;
    Ok((tf.task_set()?, config))
}

pub fn run_cluster(
    primitives: &Path,
    tasks: &TaskSet,
    config: &RunConfig,
    out: &Path,
) -> Result<SceneGraph> {
    let prims = io::read_primitives(primitives, tasks.dim())?;
    let scene = cmd_cluster(&prims, tasks, config)?;
    io::write_document(out, &scene)?;
    Ok(scene)
}

pub fn run_stream(
    observations: &Path,
    tasks: &TaskSet,
    config: &RunConfig,
    out: &Path,
    latency: Option<&Path>,
) -> Result<StreamOutput> {
    let obs = io::read_observations(observations, tasks.dim())?;
    let output = cmd_stream(&obs, tasks, config)?;
    io::write_document(out, &output.scene)?;
    if let Some(p) = latency {
        io::write_document(
            p,
            &LatencyLog {
                version: SCHEMA_VERSION,
                config: config.clone(),
                rows: output.latency.clone(),
            },
        )?;
    }
    Ok(output)
}

pub fn run_regions(
    places: &Path,
    images: &Path,
    tasks: &TaskSet,
    config: &RunConfig,
    out: &Path,
) -> Result<RegionsFile> {
    let places = io::read_places(places)?;
    let images = io::read_images(images, tasks.dim())?;
    let regions = cmd_regions(&places, &images, tasks, config)?;
    io::write_document(out, &regions)?;
    Ok(regions)
}

pub fn run_eval(
    scene: &Path,
    ground_truth: &Path,
    tasks: &Path,
    out: Option<&Path>,
) -> Result<MetricsReport> {
    let scene = io::read_scene_graph(scene)?;
    let tasks = io::read_tasks(tasks)?.task_set()?;
    let gts = io::read_ground_truth(ground_truth, tasks.len())?;
    if let Some(o) = scene.objects.first() {
        if o.dist.probs().len() != tasks.len() + 1 {
            return Err(Error::Config(format!(
                "scene graph has {} tasks, tasks file has {}",
                o.dist.probs().len() - 1,
                tasks.len()
            )));
        }
    }
    let report = cmd_eval(&scene, &gts, &tasks)?;
    if let Some(p) = out {
        io::write_document(
            p,
            &MetricsFile {
                version: SCHEMA_VERSION,
                config: scene.config.clone(),
                metrics: report.clone(),
            },
        )?;
    }
    Ok(report)
}

pub fn run_query(
    scene: &Path,
    query_file: &Path,
    n: usize,
    out: Option<&Path>,
) -> Result<Vec<RankedObject>> {
    let scene = io::read_scene_graph(scene)?;
    let q = io::read_query(query_file)?;
    let results = cmd_query(&scene, &q.embedding, n)?;
    if let Some(p) = out {
        io::write_document(
            p,
            &QueryResultFile {
                version: SCHEMA_VERSION,
                config: scene.config.clone(),
                results: results.clone(),
            },
        )?;
    }
    Ok(results)
}
