//! Layered output: task-relevant objects, places with semantic features,
//! and regions clustered over the place graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::PrimitiveGraph;
use crate::ib::{agglomerative_ib, ClusteringResult};
use crate::model::{
    cosine_similarity, merge_embedding, Aabb3, EmbeddingVector, Primitive, TaskDistribution,
    TaskSet,
};
use crate::relevance::build_relevance_matrix;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceNode {
    pub id: u64,
    pub pos: [f64; 3],
    #[serde(default)]
    pub neighbors: Vec<u64>,
    #[serde(default)]
    pub visible: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFeature {
    pub id: u64,
    pub stamp: f64,
    pub pos: [f64; 3],
    pub embedding: EmbeddingVector,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlaceFeatureStrategy {
    /// Re-normalized mean over every image the place is visible from.
    #[default]
    Average,
    /// Embedding of the visible image taken nearest to the place.
    Closest,
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

pub fn assign_place_features(
    places: &[PlaceNode],
    images: &[ImageFeature],
    strategy: PlaceFeatureStrategy,
) -> Result<BTreeMap<u64, EmbeddingVector>> {
    let by_id: BTreeMap<u64, &ImageFeature> = images.iter().map(|im| (im.id, im)).collect();
    let mut out = BTreeMap::new();
    for place in places {
        if place.visible.is_empty() {
            return Err(Error::NoVisibleImages(place.id));
        }
        let visible = place
            .visible
            .iter()
            .map(|id| {
                by_id.get(id).copied().ok_or(Error::UnknownImage {
                    place: place.id,
                    image: *id,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let feature = match strategy {
            PlaceFeatureStrategy::Average => {
                let weighted: Vec<_> = visible.iter().map(|im| (&im.embedding, 1.0)).collect();
                merge_embedding(&weighted)?
            }
            PlaceFeatureStrategy::Closest => {
                let best = visible
                    .iter()
                    .min_by(|a, b| {
                        dist2(a.pos, place.pos)
                            .total_cmp(&dist2(b.pos, place.pos))
                            .then(a.id.cmp(&b.id))
                    })
                    .expect("non-empty");
                best.embedding.clone()
            }
        };
        out.insert(place.id, feature);
    }
    Ok(out)
}

/// Undirected place-graph edges; one-sided neighbor entries count.
pub fn place_edges(places: &[PlaceNode]) -> Result<Vec<(u64, u64)>> {
    let ids: BTreeSet<u64> = places.iter().map(|p| p.id).collect();
    let mut edges = BTreeSet::new();
    for p in places {
        for &n in &p.neighbors {
            if !ids.contains(&n) {
                return Err(Error::UnknownNode(n));
            }
            if n != p.id {
                edges.insert((p.id.min(n), p.id.max(n)));
            }
        }
    }
    Ok(edges.into_iter().collect())
}

/// Places as point primitives carrying their features.
pub fn place_primitives(
    places: &[PlaceNode],
    features: &BTreeMap<u64, EmbeddingVector>,
) -> Result<Vec<Primitive>> {
    places
        .iter()
        .map(|p| {
            let f = features.get(&p.id).ok_or(Error::MissingRelevance(p.id))?;
            Ok(Primitive::new(p.id, f.clone(), Aabb3::point(p.pos)?))
        })
        .collect()
}

/// Clusters places into regions over the place graph. Relevance uses the
/// task set's own `alpha` (region mode conventionally uses 0). Every place
/// is kept, including those whose distribution is the null task.
pub fn cluster_regions(
    places: &[PlaceNode],
    features: &BTreeMap<u64, EmbeddingVector>,
    tasks: &TaskSet,
    delta_bar: f64,
) -> Result<ClusteringResult> {
    let prims = place_primitives(places, features)?;
    let relevance = build_relevance_matrix(&prims, tasks)?;
    let graph = PrimitiveGraph::with_edges(prims, place_edges(places)?)?;
    agglomerative_ib(&graph, &relevance.dists, delta_bar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u64,
    pub members: Vec<u64>,
    pub embedding: EmbeddingVector,
    pub bbox: Aabb3,
    pub dist: TaskDistribution,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePlace {
    pub id: u64,
    pub pos: [f64; 3],
    pub neighbors: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<EmbeddingVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRegion {
    pub id: u64,
    pub members: Vec<u64>,
    pub embedding: EmbeddingVector,
    pub dist: TaskDistribution,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub version: u32,
    pub config: RunConfig,
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub places: Vec<ScenePlace>,
    #[serde(default)]
    pub regions: Vec<SceneRegion>,
}

impl SceneGraph {
    pub fn empty(config: RunConfig) -> Self {
        Self {
            version: SCHEMA_VERSION,
            config,
            objects: Vec::new(),
            places: Vec::new(),
            regions: Vec::new(),
        }
    }
}

/// Label of the most probable real task, ignoring the null entry.
fn task_label(dist: &TaskDistribution, tasks: &TaskSet) -> String {
    let p = dist.probs();
    let mut best = 1;
    for i in 2..p.len() {
        if p[i] > p[best] {
            best = i;
        }
    }
    tasks.label_of(best).to_string()
}

/// Region labels use the full argmax, so an all-null region reads "null".
pub fn region_layer(regions: &ClusteringResult, tasks: &TaskSet) -> Vec<SceneRegion> {
    regions
        .clusters
        .iter()
        .enumerate()
        .map(|(i, c)| SceneRegion {
            id: i as u64,
            members: c.members.clone(),
            embedding: c.embedding.clone(),
            dist: c.dist.clone(),
            label: tasks.label_of(c.dist.argmax()).to_string(),
        })
        .collect()
}

/// Object layer: clusters whose fused embedding reaches `alpha` cosine
/// similarity with at least one task.
pub fn object_layer(
    objects: &ClusteringResult,
    tasks: &TaskSet,
    alpha: f64,
) -> Result<Vec<SceneObject>> {
    let mut out = Vec::new();
    for c in &objects.clusters {
        let (_, best) = tasks.best_task(&c.embedding)?;
        if best < alpha {
            continue;
        }
        out.push(SceneObject {
            id: out.len() as u64,
            members: c.members.clone(),
            embedding: c.embedding.clone(),
            bbox: c.bbox,
            dist: c.dist.clone(),
            label: task_label(&c.dist, tasks),
        });
    }
    Ok(out)
}

pub fn assemble(
    objects: &ClusteringResult,
    tasks: &TaskSet,
    places: &[PlaceNode],
    place_features: &BTreeMap<u64, EmbeddingVector>,
    regions: Option<&ClusteringResult>,
    config: &RunConfig,
) -> Result<SceneGraph> {
    let places = places
        .iter()
        .map(|p| ScenePlace {
            id: p.id,
            pos: p.pos,
            neighbors: p.neighbors.clone(),
            feature: place_features.get(&p.id).cloned(),
        })
        .collect();
    Ok(SceneGraph {
        version: SCHEMA_VERSION,
        config: config.clone(),
        objects: object_layer(objects, tasks, config.alpha_objects)?,
        places,
        regions: regions.map(|r| region_layer(r, tasks)).unwrap_or_default(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedObject {
    /// Position in the scene's object list.
    pub index: usize,
    pub id: u64,
    pub score: f64,
}

/// Top `n` objects by cosine similarity to the query, ties to the lower
/// index.
pub fn rank_objects(
    objects: &[SceneObject],
    query: &EmbeddingVector,
    n: usize,
) -> Result<Vec<RankedObject>> {
    let mut ranked = objects
        .iter()
        .enumerate()
        .map(|(index, o)| {
            Ok(RankedObject {
                index,
                id: o.id,
                score: cosine_similarity(&o.embedding, query)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    ranked.truncate(n);
    Ok(ranked)
}

pub fn query(scene: &SceneGraph, query: &EmbeddingVector, n: usize) -> Result<Vec<RankedObject>> {
    if n == 0 {
        return Err(Error::Config("query size n must be at least 1".into()));
    }
    rank_objects(&scene.objects, query, n)
}
