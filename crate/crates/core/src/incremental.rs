//! Online clustering over a growing primitive graph.
//!
//! Clustering never crosses connected components, so each component keeps
//! its own merge sequence. A component's sequence depends only on its own
//! primitives, while the stopping threshold depends on the global primitive
//! count and `I(X;Y)`. New primitives therefore trigger a full re-run only
//! for the components they touch; every other component is re-cut against
//! the new global normalization from its cached sequence. The result is
//! identical to batch clustering of the whole graph.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use crate::error::{Error, Result};
use crate::graph::{PrimitiveGraph, SpatialHash};
use crate::ib::{
    build_result, check_threshold, initial_information, merge_delta, replay, ClusteringResult,
    MergeEngine, RawMerge, MIN_INFORMATION,
};
use crate::model::{Primitive, TaskDistribution};

/// Fractional loss of a merge computed inside one component with uniform
/// in-component masses, rescaled to the global normalization:
/// `(|X_c| / |X|) * d_c / I(X;Y)`.
pub fn component_delta(
    d_component: f64,
    comp_size: usize,
    total_size: usize,
    info_xy_global: f64,
) -> f64 {
    if info_xy_global < MIN_INFORMATION {
        return 0.0;
    }
    (comp_size as f64 / total_size as f64) * d_component / info_xy_global
}

/// How edges are discovered for newly inserted primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjacency {
    /// Edge between every pair of boxes with positive overlap volume.
    BoxOverlap,
    /// Edges are supplied by the caller (place graphs).
    Explicit,
}

#[derive(Debug, Clone)]
struct ComponentState {
    nodes: Vec<u64>,
    merges: Vec<RawMerge>,
    /// Running maximum of merge weights; fractional loss is monotone in the
    /// weight, so the cut point is a partition point of this sequence.
    prefix_max: Vec<f64>,
    cut: usize,
}

impl ComponentState {
    fn cut_for(&self, total: usize, info: f64, delta_bar: f64) -> usize {
        self.prefix_max
            .partition_point(|&w| merge_delta(w / total as f64, info) < delta_bar)
    }
}

/// What a single insert did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InsertReport {
    /// Components that were re-run or whose cut point moved.
    pub changed: BTreeSet<u64>,
    /// Components whose merge sequence was recomputed from primitives.
    pub reclustered: usize,
    /// Untouched components whose cut moved after renormalization.
    pub recut: usize,
    pub components: usize,
    pub total_primitives: usize,
}

/// Running counters for instrumentation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub inserts: usize,
    pub reclustered: usize,
    pub recut: usize,
}

#[derive(Debug, Clone)]
pub struct IncrementalClusterer {
    delta_bar: f64,
    adjacency: Adjacency,
    graph: PrimitiveGraph,
    dists: BTreeMap<u64, TaskDistribution>,
    grid: Option<SpatialHash>,
    components: BTreeMap<u64, ComponentState>,
    info_xy: f64,
    stats: Stats,
}

impl IncrementalClusterer {
    pub fn new(delta_bar: f64, adjacency: Adjacency) -> Result<Self> {
        check_threshold(delta_bar)?;
        Ok(Self {
            delta_bar,
            adjacency,
            graph: PrimitiveGraph::new(),
            dists: BTreeMap::new(),
            grid: None,
            components: BTreeMap::new(),
            info_xy: 0.0,
            stats: Stats::default(),
        })
    }

    pub fn delta_bar(&self) -> f64 {
        self.delta_bar
    }

    pub fn graph(&self) -> &PrimitiveGraph {
        &self.graph
    }

    pub fn total_primitives(&self) -> usize {
        self.graph.len()
    }

    /// Global `I(X;Y)` over every inserted primitive.
    pub fn info_xy(&self) -> f64 {
        self.info_xy
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn relevance(&self) -> &BTreeMap<u64, TaskDistribution> {
        &self.dists
    }

    /// Inserts a batch, discovering edges by box overlap.
    pub fn insert(
        &mut self,
        batch: Vec<Primitive>,
        relevance: &BTreeMap<u64, TaskDistribution>,
    ) -> Result<InsertReport> {
        if self.adjacency != Adjacency::BoxOverlap {
            return Err(Error::Config(
                "explicit-adjacency clusterer needs insert_with_edges".into(),
            ));
        }
        self.insert_inner(batch, relevance, &[])
    }

    /// Inserts a batch plus caller-supplied edges. Edges may reference both
    /// new and existing primitives.
    pub fn insert_with_edges(
        &mut self,
        batch: Vec<Primitive>,
        relevance: &BTreeMap<u64, TaskDistribution>,
        edges: &[(u64, u64)],
    ) -> Result<InsertReport> {
        self.insert_inner(batch, relevance, edges)
    }

    fn insert_inner(
        &mut self,
        batch: Vec<Primitive>,
        relevance: &BTreeMap<u64, TaskDistribution>,
        edges: &[(u64, u64)],
    ) -> Result<InsertReport> {
        let mut fresh = BTreeSet::new();
        for p in &batch {
            if self.graph.contains(p.id) || !fresh.insert(p.id) {
                return Err(Error::DuplicateId(p.id));
            }
            if !relevance.contains_key(&p.id) {
                return Err(Error::MissingRelevance(p.id));
            }
        }
        for &(a, b) in edges {
            for id in [a, b] {
                if !self.graph.contains(id) && !fresh.contains(&id) {
                    return Err(Error::UnknownNode(id));
                }
            }
        }

        let mut touched: Vec<u64> = Vec::new();

        if self.adjacency == Adjacency::BoxOverlap && self.grid.is_none() {
            self.grid = Some(SpatialHash::for_boxes(batch.iter().map(|p| &p.bbox)));
        }
        for p in batch {
            let (id, bbox) = (p.id, p.bbox);
            self.dists.insert(id, relevance[&id].clone());
            self.graph.add_node(p)?;
            touched.push(id);
            if let Some(grid) = self.grid.as_mut() {
                for other in grid.overlapping(&bbox) {
                    self.graph.add_edge(id, other)?;
                }
                grid.insert(id, bbox);
            }
        }
        for &(a, b) in edges {
            self.graph.add_edge(a, b)?;
            touched.extend([a, b]);
        }
        // drop components absorbed into one with a smaller id
        let graph = &self.graph;
        self.components
            .retain(|&c, _| graph.component_id(c) == Some(c));

        let total = self.graph.len();
        self.info_xy = initial_information(self.dists.values());

        let dirty: BTreeSet<u64> = touched
            .iter()
            .map(|&id| self.graph.component_id(id).expect("inserted"))
            .collect();
        for &c in &dirty {
            let state = self.run_component(c)?;
            self.components.insert(c, state);
        }
        self.stats.reclustered += dirty.len();

        let mut report = InsertReport {
            reclustered: dirty.len(),
            ..InsertReport::default()
        };
        for (&c, state) in self.components.iter_mut() {
            let cut = state.cut_for(total, self.info_xy, self.delta_bar);
            if dirty.contains(&c) {
                state.cut = cut;
                report.changed.insert(c);
            } else if cut != state.cut {
                state.cut = cut;
                report.recut += 1;
                report.changed.insert(c);
            }
        }
        self.stats.recut += report.recut;
        self.stats.inserts += 1;
        report.components = self.components.len();
        report.total_primitives = total;
        Ok(report)
    }

    fn component_nodes(&self, start: u64) -> Vec<u64> {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(id) = queue.pop_front() {
            for n in self.graph.neighbors(id) {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Full merge sequence of one component, down to a single cluster.
    fn run_component(&self, component: u64) -> Result<ComponentState> {
        let nodes = self.component_nodes(component);
        let edges: Vec<(u64, u64)> = nodes
            .iter()
            .flat_map(|&a| {
                self.graph
                    .neighbors(a)
                    .filter(move |&b| a < b)
                    .map(move |b| (a, b))
            })
            .collect();
        let mut engine = MergeEngine::new(&nodes, &self.dists, edges)?;
        let mut merges = Vec::with_capacity(nodes.len().saturating_sub(1));
        let mut prefix_max = Vec::with_capacity(merges.capacity());
        let mut running = f64::NEG_INFINITY;
        while let Some(m) = engine.commit() {
            running = running.max(m.weight);
            prefix_max.push(running);
            merges.push(m);
        }
        Ok(ComponentState {
            nodes,
            merges,
            prefix_max,
            cut: 0,
        })
    }

    /// Cut of one component's sequence under the current normalization.
    pub fn committed_merges(&self, component: u64) -> Option<usize> {
        self.components.get(&component).map(|s| s.cut)
    }

    /// Global clustering: every component at its current cut, with the
    /// merge log interleaved in the order a single global loop would take.
    pub fn finalize(&self) -> Result<ClusteringResult> {
        if self.graph.is_empty() {
            return Ok(ClusteringResult::default());
        }
        let total = self.graph.len();
        let mut raw = Vec::new();
        let prefixes: Vec<&[RawMerge]> = self
            .components
            .values()
            .map(|s| &s.merges[..s.cut])
            .collect();
        for (state, prefix) in self.components.values().zip(&prefixes) {
            raw.extend(replay(&state.nodes, &self.dists, prefix)?);
        }
        raw.sort_by_key(|c| c.members[0]);

        let records = interleave(&prefixes)
            .into_iter()
            .map(|m| m.record(total, self.info_xy))
            .collect();
        build_result(raw, &self.graph, total, records, self.info_xy)
    }
}

struct Head<'a> {
    merge: &'a RawMerge,
    seq: usize,
    pos: usize,
}

impl PartialEq for Head<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Head<'_> {}

impl PartialOrd for Head<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Head<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.merge.order(other.merge).then(self.seq.cmp(&other.seq))
    }
}

/// Merges per-component sequences by always taking the cheapest head,
/// which is the order a global greedy loop visits them.
fn interleave(seqs: &[&[RawMerge]]) -> Vec<RawMerge> {
    let mut heap = BinaryHeap::new();
    for (seq, s) in seqs.iter().enumerate() {
        if let Some(merge) = s.first() {
            heap.push(Reverse(Head { merge, seq, pos: 0 }));
        }
    }
    let mut out = Vec::with_capacity(seqs.iter().map(|s| s.len()).sum());
    while let Some(Reverse(h)) = heap.pop() {
        out.push(*h.merge);
        if let Some(merge) = seqs[h.seq].get(h.pos + 1) {
            heap.push(Reverse(Head {
                merge,
                seq: h.seq,
                pos: h.pos + 1,
            }));
        }
    }
    out
}
