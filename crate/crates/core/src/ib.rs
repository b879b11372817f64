//! Agglomerative information bottleneck over a graph of allowable merges.
//!
//! Clusters start as single primitives with uniform prior mass. Each step
//! takes the adjacent pair with the smallest merge weight
//! `(p_i + p_j) * JS_pi(p(y|i), p(y|j))`, which equals the exact loss of
//! `I(X~;Y)` caused by merging them. The loss relative to the initial
//! `I(X;Y)` is checked before committing; the loop stops at the first
//! candidate whose fractional loss is not below the threshold.
//!
//! Internally weights are computed with integer member counts as masses, so
//! a component's merge sequence does not depend on how many primitives live
//! elsewhere in the map. Reported weights are rescaled by the global count.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PrimitiveGraph;
use crate::model::{merge_embedding, Aabb3, Cluster, EmbeddingVector, TaskDistribution};

/// Information below this is treated as zero when normalizing losses.
pub const MIN_INFORMATION: f64 = 1e-12;

fn kl_term(p: f64, q: f64) -> f64 {
    if p > 0.0 {
        p * (p / q).ln()
    } else {
        0.0
    }
}

/// Marginal `p(y) = sum_i masses[i] * dists[i][y]`.
pub fn marginal(masses: &[f64], dists: &[TaskDistribution]) -> Vec<f64> {
    let width = dists.first().map_or(0, TaskDistribution::len);
    let mut py = vec![0.0; width];
    for (m, d) in masses.iter().zip(dists) {
        for (acc, p) in py.iter_mut().zip(d.probs()) {
            *acc += m * p;
        }
    }
    py
}

/// `I(X;Y)` in nats for a hard clustering with the given masses.
pub fn mutual_information(masses: &[f64], dists: &[TaskDistribution]) -> f64 {
    let py = marginal(masses, dists);
    mutual_information_with_marginal(masses, dists, &py)
}

/// Mutual-information sum evaluated against an externally supplied
/// marginal.
pub fn mutual_information_with_marginal(
    masses: &[f64],
    dists: &[TaskDistribution],
    py: &[f64],
) -> f64 {
    let mut total = 0.0;
    for (m, d) in masses.iter().zip(dists) {
        let inner: f64 = d.probs().iter().zip(py).map(|(&p, &q)| kl_term(p, q)).sum();
        total += m * inner;
    }
    total.max(0.0)
}

/// Information carried by one connected component under a uniform prior,
/// measured against the global marginal: `1/|X_c| * sum_{x in c} KL(p(y|x) || p(y))`.
/// Summing `|X_c|/|X|` times this over all components recovers `I(X;Y)`.
pub fn component_information(dists: &[TaskDistribution], global_marginal: &[f64]) -> f64 {
    if dists.is_empty() {
        return 0.0;
    }
    let masses = vec![1.0 / dists.len() as f64; dists.len()];
    mutual_information_with_marginal(&masses, dists, global_marginal)
}

/// Merge weight: combined mass times the mass-weighted Jensen-Shannon
/// divergence of the two conditionals.
pub fn merge_weight(
    mass_i: f64,
    dist_i: &TaskDistribution,
    mass_j: f64,
    dist_j: &TaskDistribution,
) -> f64 {
    weight_raw(mass_i, dist_i.probs(), mass_j, dist_j.probs())
}

fn weight_raw(mass_i: f64, pi: &[f64], mass_j: f64, pj: &[f64]) -> f64 {
    let total = mass_i + mass_j;
    let wi = mass_i / total;
    let wj = mass_j / total;
    let mut kl_i = 0.0;
    let mut kl_j = 0.0;
    for (&a, &b) in pi.iter().zip(pj) {
        let mean = wi * a + wj * b;
        kl_i += kl_term(a, mean);
        kl_j += kl_term(b, mean);
    }
    (total * (wi * kl_i + wj * kl_j)).max(0.0)
}

/// Mass-weighted mixture of two conditionals.
pub(crate) fn mix(mass_a: f64, pa: &[f64], mass_b: f64, pb: &[f64]) -> Vec<f64> {
    let total = mass_a + mass_b;
    pa.iter()
        .zip(pb)
        .map(|(&a, &b)| (mass_a * a + mass_b * b) / total)
        .collect()
}

/// Fractional information loss `d / I(X;Y)`, 0 when `I(X;Y)` vanishes.
pub fn merge_delta(d_ab: f64, info_xy: f64) -> f64 {
    if info_xy < MIN_INFORMATION {
        0.0
    } else {
        d_ab / info_xy
    }
}

/// Merges two clusters. The mixture is weighted by member counts, which is
/// the mass weighting under the uniform prior.
pub fn merge_clusters(a: &Cluster, b: &Cluster) -> Result<Cluster> {
    let mut members = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.members.len() && j < b.members.len() {
        match a.members[i].cmp(&b.members[j]) {
            Ordering::Less => {
                members.push(a.members[i]);
                i += 1;
            }
            Ordering::Greater => {
                members.push(b.members[j]);
                j += 1;
            }
            Ordering::Equal => return Err(Error::OverlappingClusters(a.members[i])),
        }
    }
    members.extend_from_slice(&a.members[i..]);
    members.extend_from_slice(&b.members[j..]);

    let (na, nb) = (a.len() as f64, b.len() as f64);
    let dist = TaskDistribution::from_raw(mix(na, a.dist.probs(), nb, b.dist.probs()));
    let embedding = merge_embedding(&[(&a.embedding, na), (&b.embedding, nb)])?;
    Ok(Cluster {
        members,
        mass: a.mass + b.mass,
        dist,
        embedding,
        bbox: a.bbox.hull(&b.bbox),
    })
}

/// One committed merge. `left < right` are the smallest member ids of the
/// two clusters; `weight` is in nats under the global uniform prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub left: u64,
    pub right: u64,
    pub weight: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    /// Clusters ordered by smallest member id.
    pub clusters: Vec<Cluster>,
    /// Primitive id to index into `clusters`.
    pub assignment: BTreeMap<u64, usize>,
    pub merges: Vec<MergeRecord>,
    pub info_initial: f64,
    pub info_final: f64,
}

impl ClusteringResult {
    /// Member sets, for partition comparisons.
    pub fn partition(&self) -> BTreeSet<Vec<u64>> {
        self.clusters.iter().map(|c| c.members.clone()).collect()
    }

    pub fn cluster_of(&self, id: u64) -> Option<&Cluster> {
        self.assignment.get(&id).map(|&i| &self.clusters[i])
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// A merge as produced by the engine, weighted with member counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RawMerge {
    pub left: u64,
    pub right: u64,
    pub weight: f64,
}

impl RawMerge {
    pub(crate) fn order(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then((self.left, self.right).cmp(&(other.left, other.right)))
    }

    pub(crate) fn record(&self, total: usize, info_xy: f64) -> MergeRecord {
        let weight = self.weight / total as f64;
        MergeRecord {
            left: self.left,
            right: self.right,
            weight,
            delta: merge_delta(weight, info_xy),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RawCluster {
    pub members: Vec<u64>,
    pub dist: Vec<f64>,
}

#[derive(Debug)]
struct Slot {
    members: Vec<u64>,
    dist: Vec<f64>,
    rep: u64,
    version: u32,
    alive: bool,
    neighbors: BTreeSet<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    weight: f64,
    key: (u64, u64),
    a: usize,
    b: usize,
    va: u32,
    vb: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then(self.key.cmp(&other.key))
            .then((self.a, self.b, self.va, self.vb).cmp(&(other.a, other.b, other.va, other.vb)))
    }
}

/// Greedy merge loop with a lazily invalidated min-heap of candidates.
/// Stale entries are detected through per-slot version counters.
pub(crate) struct MergeEngine {
    slots: Vec<Slot>,
    heap: BinaryHeap<Reverse<Candidate>>,
}

impl MergeEngine {
    /// `nodes` ascending; `edges` between entries of `nodes`.
    pub(crate) fn new(
        nodes: &[u64],
        dists: &BTreeMap<u64, TaskDistribution>,
        edges: impl IntoIterator<Item = (u64, u64)>,
    ) -> Result<Self> {
        let mut slot_of = BTreeMap::new();
        let mut slots = Vec::with_capacity(nodes.len());
        for (i, &id) in nodes.iter().enumerate() {
            let dist = dists.get(&id).ok_or(Error::MissingRelevance(id))?;
            slot_of.insert(id, i);
            slots.push(Slot {
                members: vec![id],
                dist: dist.probs().to_vec(),
                rep: id,
                version: 0,
                alive: true,
                neighbors: BTreeSet::new(),
            });
        }
        let mut engine = Self {
            slots,
            heap: BinaryHeap::new(),
        };
        for (a, b) in edges {
            let (&sa, &sb) = (
                slot_of.get(&a).ok_or(Error::UnknownNode(a))?,
                slot_of.get(&b).ok_or(Error::UnknownNode(b))?,
            );
            if sa != sb && engine.slots[sa].neighbors.insert(sb) {
                engine.slots[sb].neighbors.insert(sa);
                engine.push(sa, sb);
            }
        }
        Ok(engine)
    }

    fn push(&mut self, a: usize, b: usize) {
        let (sa, sb) = (&self.slots[a], &self.slots[b]);
        let weight = weight_raw(
            sa.members.len() as f64,
            &sa.dist,
            sb.members.len() as f64,
            &sb.dist,
        );
        let key = if sa.rep < sb.rep {
            (sa.rep, sb.rep)
        } else {
            (sb.rep, sa.rep)
        };
        self.heap.push(Reverse(Candidate {
            weight,
            key,
            a,
            b,
            va: sa.version,
            vb: sb.version,
        }));
    }

    fn is_live(&self, c: &Candidate) -> bool {
        let (sa, sb) = (&self.slots[c.a], &self.slots[c.b]);
        sa.alive && sb.alive && sa.version == c.va && sb.version == c.vb
    }

    /// Cheapest live candidate, discarding stale heap entries on the way.
    pub(crate) fn peek(&mut self) -> Option<RawMerge> {
        while let Some(Reverse(top)) = self.heap.peek() {
            if self.is_live(top) {
                return Some(RawMerge {
                    left: top.key.0,
                    right: top.key.1,
                    weight: top.weight,
                });
            }
            self.heap.pop();
        }
        None
    }

    /// Commits the candidate last returned by `peek`.
    pub(crate) fn commit(&mut self) -> Option<RawMerge> {
        let merge = self.peek()?;
        let Reverse(c) = self.heap.pop()?;
        // keep the slot holding the smaller representative
        let (keep, gone) = if self.slots[c.a].rep < self.slots[c.b].rep {
            (c.a, c.b)
        } else {
            (c.b, c.a)
        };
        let gone_slot = std::mem::replace(
            &mut self.slots[gone],
            Slot {
                members: Vec::new(),
                dist: Vec::new(),
                rep: u64::MAX,
                version: 0,
                alive: false,
                neighbors: BTreeSet::new(),
            },
        );
        let kept = &mut self.slots[keep];
        let (nk, ng) = (kept.members.len() as f64, gone_slot.members.len() as f64);
        kept.dist = mix(nk, &kept.dist, ng, &gone_slot.dist);
        kept.members.extend_from_slice(&gone_slot.members);
        kept.version += 1;
        let mut neighbors = std::mem::take(&mut kept.neighbors);
        neighbors.extend(gone_slot.neighbors.iter().copied());
        neighbors.remove(&keep);
        neighbors.remove(&gone);
        for &n in &gone_slot.neighbors {
            if n != keep {
                let ns = &mut self.slots[n].neighbors;
                ns.remove(&gone);
                ns.insert(keep);
            }
        }
        let list: Vec<usize> = neighbors.iter().copied().collect();
        self.slots[keep].neighbors = neighbors;
        for n in list {
            self.push(keep, n);
        }
        Some(merge)
    }

    /// Surviving clusters ordered by representative, members ascending.
    pub(crate) fn into_clusters(self) -> Vec<RawCluster> {
        let mut out: Vec<(u64, RawCluster)> = self
            .slots
            .into_iter()
            .filter(|s| s.alive)
            .map(|mut s| {
                s.members.sort_unstable();
                (
                    s.rep,
                    RawCluster {
                        members: s.members,
                        dist: s.dist,
                    },
                )
            })
            .collect();
        out.sort_by_key(|(rep, _)| *rep);
        out.into_iter().map(|(_, c)| c).collect()
    }
}

/// Replays a merge prefix from singletons, reproducing the engine's
/// arithmetic exactly.
pub(crate) fn replay(
    nodes: &[u64],
    dists: &BTreeMap<u64, TaskDistribution>,
    merges: &[RawMerge],
) -> Result<Vec<RawCluster>> {
    let mut live: BTreeMap<u64, RawCluster> = BTreeMap::new();
    for &id in nodes {
        let d = dists.get(&id).ok_or(Error::MissingRelevance(id))?;
        live.insert(
            id,
            RawCluster {
                members: vec![id],
                dist: d.probs().to_vec(),
            },
        );
    }
    for m in merges {
        let gone = live.remove(&m.right).ok_or(Error::UnknownNode(m.right))?;
        let kept = live.get_mut(&m.left).ok_or(Error::UnknownNode(m.left))?;
        let (nk, ng) = (kept.members.len() as f64, gone.members.len() as f64);
        kept.dist = mix(nk, &kept.dist, ng, &gone.dist);
        kept.members.extend_from_slice(&gone.members);
    }
    Ok(live
        .into_values()
        .map(|mut c| {
            c.members.sort_unstable();
            c
        })
        .collect())
}

/// Builds the public result from engine clusters. `raw` must be ordered by
/// smallest member id.
pub(crate) fn build_result(
    raw: Vec<RawCluster>,
    graph: &PrimitiveGraph,
    total: usize,
    merges: Vec<MergeRecord>,
    info_initial: f64,
) -> Result<ClusteringResult> {
    let mut clusters = Vec::with_capacity(raw.len());
    let mut assignment = BTreeMap::new();
    for (index, rc) in raw.into_iter().enumerate() {
        let prims: Vec<_> = rc
            .members
            .iter()
            .map(|id| graph.node(*id).ok_or(Error::UnknownNode(*id)))
            .collect::<Result<_>>()?;
        let weighted: Vec<(&EmbeddingVector, f64)> =
            prims.iter().map(|p| (&p.embedding, 1.0)).collect();
        let embedding = merge_embedding(&weighted)?;
        let bbox = Aabb3::hull_all(prims.iter().map(|p| &p.bbox)).ok_or(Error::Empty("cluster"))?;
        for &id in &rc.members {
            assignment.insert(id, index);
        }
        clusters.push(Cluster {
            mass: rc.members.len() as f64 / total as f64,
            members: rc.members,
            dist: TaskDistribution::from_raw(rc.dist),
            embedding,
            bbox,
        });
    }
    let masses: Vec<f64> = clusters.iter().map(|c| c.mass).collect();
    let dists: Vec<TaskDistribution> = clusters.iter().map(|c| c.dist.clone()).collect();
    let info_final = mutual_information(&masses, &dists);
    Ok(ClusteringResult {
        clusters,
        assignment,
        merges,
        info_initial,
        info_final,
    })
}

/// `I(X;Y)` of the unclustered primitives under the uniform prior, in id
/// order.
pub(crate) fn initial_information<'a>(
    dists: impl ExactSizeIterator<Item = &'a TaskDistribution>,
) -> f64 {
    let n = dists.len();
    if n == 0 {
        return 0.0;
    }
    let ds: Vec<TaskDistribution> = dists.cloned().collect();
    let masses = vec![1.0 / n as f64; n];
    mutual_information(&masses, &ds)
}

pub(crate) fn check_threshold(delta_bar: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta_bar) {
        return Err(Error::Config(format!(
            "delta_bar {delta_bar} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Batch agglomerative clustering of every node in `graph`.
///
/// Merges are committed while their fractional loss is strictly below
/// `delta_bar`; `0` therefore returns the primitives untouched. Ties in
/// weight go to the pair with the lexicographically smallest
/// `(min member id, min member id)` key.
pub fn agglomerative_ib(
    graph: &PrimitiveGraph,
    relevance: &BTreeMap<u64, TaskDistribution>,
    delta_bar: f64,
) -> Result<ClusteringResult> {
    check_threshold(delta_bar)?;
    if graph.is_empty() {
        return Ok(ClusteringResult::default());
    }
    let nodes: Vec<u64> = graph.ids().collect();
    let node_dists = nodes
        .iter()
        .map(|id| relevance.get(id).ok_or(Error::MissingRelevance(*id)))
        .collect::<Result<Vec<_>>>()?;
    let total = nodes.len();
    let info = initial_information(node_dists.into_iter());

    let mut engine = MergeEngine::new(&nodes, relevance, graph.edges())?;
    let mut merges = Vec::new();
    while let Some(candidate) = engine.peek() {
        let record = candidate.record(total, info);
        if record.delta >= delta_bar {
            break;
        }
        engine.commit();
        merges.push(record);
    }
    build_result(engine.into_clusters(), graph, total, merges, info)
}
