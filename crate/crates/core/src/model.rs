//! Domain types shared by every stage of the pipeline: unit embeddings,
//! axis-aligned boxes, primitives, task sets, task distributions and clusters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm tolerance under which an incoming vector is treated as already unit
/// length and stored verbatim, so that write/read cycles are bit-exact.
const UNIT_NORM_TOLERANCE: f64 = 1e-12;

/// Means whose norm falls below this are rejected as cancelled out.
const DEGENERATE_NORM: f64 = 1e-12;

/// An L2-normalized embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalizes `values` to unit length. Empty, non-finite and zero
    /// vectors are rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidEmbedding);
        }
        let norm = l2_norm(&values);
        if norm == 0.0 {
            return Err(Error::ZeroEmbedding);
        }
        if (norm - 1.0).abs() <= UNIT_NORM_TOLERANCE {
            return Ok(Self(values));
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    /// Dot product without the dimension check. Callers guarantee matching
    /// dimensions.
    pub(crate) fn dot_unchecked(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(e: EmbeddingVector) -> Self {
        e.0
    }
}

fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cosine similarity of two unit vectors, i.e. their dot product.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(a.dot_unchecked(b).clamp(-1.0, 1.0))
}

/// Weighted mean of unit vectors, re-normalized.
pub fn merge_embedding(members: &[(&EmbeddingVector, f64)]) -> Result<EmbeddingVector> {
    let (first, _) = members.first().ok_or(Error::Empty("merge_embedding"))?;
    let dim = first.dim();
    let mut acc = vec![0.0; dim];
    let mut total = 0.0;
    for (e, w) in members {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: e.dim(),
            });
        }
        if !(*w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidEmbedding);
        }
        for (a, v) in acc.iter_mut().zip(e.as_slice()) {
            *a += w * v;
        }
        total += w;
    }
    for a in &mut acc {
        *a /= total;
    }
    let norm = l2_norm(&acc);
    if norm < DEGENERATE_NORM {
        return Err(Error::DegenerateMean { norm });
    }
    EmbeddingVector::new(acc)
}

/// Axis-aligned 3D bounding box in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct Aabb3 {
    min: [f64; 3],
    max: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    min: [f64; 3],
    max: [f64; 3],
}

impl TryFrom<BoxRepr> for Aabb3 {
    type Error = Error;

    fn try_from(r: BoxRepr) -> Result<Self> {
        Aabb3::new(r.min, r.max)
    }
}

impl From<Aabb3> for BoxRepr {
    fn from(b: Aabb3) -> Self {
        BoxRepr {
            min: b.min,
            max: b.max,
        }
    }
}

impl Aabb3 {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        if min.iter().chain(&max).any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox("non-finite corner".into()));
        }
        if (0..3).any(|i| min[i] > max[i]) {
            return Err(Error::InvalidBox(format!(
                "min {min:?} exceeds max {max:?}"
            )));
        }
        Ok(Self { min, max })
    }

    /// Degenerate box at a single point.
    pub fn point(p: [f64; 3]) -> Result<Self> {
        Self::new(p, p)
    }

    pub fn min(&self) -> [f64; 3] {
        self.min
    }

    pub fn max(&self) -> [f64; 3] {
        self.max
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e[0] * e[1] * e[2]
    }

    pub fn diagonal(&self) -> f64 {
        let e = self.extent();
        (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()
    }

    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    /// Closed containment test.
    pub fn contains_point(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn contains_box(&self, other: &Aabb3) -> bool {
        (0..3).all(|i| self.min[i] <= other.min[i] && other.max[i] <= self.max[i])
    }

    pub fn intersection_volume(&self, other: &Aabb3) -> f64 {
        let mut v = 1.0;
        for i in 0..3 {
            let lo = self.min[i].max(other.min[i]);
            let hi = self.max[i].min(other.max[i]);
            if hi <= lo {
                return 0.0;
            }
            v *= hi - lo;
        }
        v
    }

    /// Componentwise min/max hull of two boxes.
    pub fn hull(&self, other: &Aabb3) -> Aabb3 {
        let mut out = *self;
        for i in 0..3 {
            out.min[i] = out.min[i].min(other.min[i]);
            out.max[i] = out.max[i].max(other.max[i]);
        }
        out
    }

    pub fn hull_all<'a>(boxes: impl IntoIterator<Item = &'a Aabb3>) -> Option<Aabb3> {
        let mut it = boxes.into_iter();
        let first = *it.next()?;
        Some(it.fold(first, |acc, b| acc.hull(b)))
    }
}

/// Intersection over union; 0 for disjoint boxes and for any pair whose
/// union has zero volume.
pub fn bbox_iou(a: &Aabb3, b: &Aabb3) -> f64 {
    let inter = a.intersection_volume(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// True iff the boxes share positive volume. Touching faces do not count.
pub fn bbox_overlaps(a: &Aabb3, b: &Aabb3) -> bool {
    (0..3).all(|i| a.min[i].max(b.min[i]) < a.max[i].min(b.max[i]))
}

/// One task-agnostic 3D segment or place node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub id: u64,
    pub embedding: EmbeddingVector,
    pub bbox: Aabb3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stamp: Option<f64>,
    #[serde(default = "default_support")]
    pub support: u32,
}

fn default_support() -> u32 {
    1
}

impl Primitive {
    pub fn new(id: u64, embedding: EmbeddingVector, bbox: Aabb3) -> Self {
        Self {
            id,
            embedding,
            bbox,
            stamp: None,
            support: 1,
        }
    }
}

/// The task list with its null-task score `alpha` and ranking depth `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    labels: Vec<String>,
    embeddings: Vec<EmbeddingVector>,
    alpha: f64,
    k: usize,
}

pub const DEFAULT_TOP_K: usize = 3;

impl TaskSet {
    pub fn new(
        labels: Vec<String>,
        embeddings: Vec<EmbeddingVector>,
        alpha: f64,
        k: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidTaskSet(
                "at least one task is required".into(),
            ));
        }
        if labels.len() != embeddings.len() {
            return Err(Error::InvalidTaskSet(format!(
                "{} labels but {} embeddings",
                labels.len(),
                embeddings.len()
            )));
        }
        let dim = embeddings[0].dim();
        if let Some(e) = embeddings.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: e.dim(),
            });
        }
        if !(-1.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidTaskSet(format!(
                "alpha {alpha} outside [-1, 1]"
            )));
        }
        if k == 0 || k > labels.len() + 1 {
            return Err(Error::InvalidTaskSet(format!(
                "k = {k} outside [1, {}]",
                labels.len() + 1
            )));
        }
        Ok(Self {
            labels,
            embeddings,
            alpha,
            k,
        })
    }

    /// Uses `k = min(3, m + 1)`.
    pub fn with_default_k(
        labels: Vec<String>,
        embeddings: Vec<EmbeddingVector>,
        alpha: f64,
    ) -> Result<Self> {
        let k = DEFAULT_TOP_K.min(labels.len() + 1);
        Self::new(labels, embeddings, alpha, k)
    }

    /// Number of real tasks `m` (the null task is not counted).
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings[0].dim()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn embeddings(&self) -> &[EmbeddingVector] {
        &self.embeddings
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Same tasks with a different null score, keeping `k`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.labels.clone(), self.embeddings.clone(), alpha, self.k)
    }

    /// Label for a distribution index (0 is the null task).
    pub fn label_of(&self, index: usize) -> &str {
        if index == 0 {
            "null"
        } else {
            &self.labels[index - 1]
        }
    }

    /// Highest cosine similarity to any real task, with its 0-based task index.
    pub fn best_task(&self, e: &EmbeddingVector) -> Result<(usize, f64)> {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, t) in self.embeddings.iter().enumerate() {
            let s = cosine_similarity(e, t)?;
            if s > best.1 {
                best = (i, s);
            }
        }
        Ok(best)
    }
}

/// `p(y|x)` over the null task (index 0) and the `m` real tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TaskDistribution(Vec<f64>);

const DISTRIBUTION_SUM_TOLERANCE: f64 = 1e-9;

impl TaskDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(
                "needs the null entry and at least one task".into(),
            ));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(
                "entries must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(Self(probs))
    }

    /// One-hot on the null task for `m` real tasks.
    pub fn null(m: usize) -> Self {
        let mut probs = vec![0.0; m + 1];
        probs[0] = 1.0;
        Self(probs)
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_null(&self) -> bool {
        self.0[0] == 1.0 && self.0[1..].iter().all(|&p| p == 0.0)
    }

    /// Index of the largest entry; ties go to the lower index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl TryFrom<Vec<f64>> for TaskDistribution {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TaskDistribution> for Vec<f64> {
    fn from(d: TaskDistribution) -> Self {
        d.0
    }
}

/// A group of primitives with its prior mass, fused task distribution,
/// fused embedding and hull box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Sorted member primitive ids.
    pub members: Vec<u64>,
    pub mass: f64,
    pub dist: TaskDistribution,
    pub embedding: EmbeddingVector,
    pub bbox: Aabb3,
}

impl Cluster {
    /// A one-primitive cluster with uniform mass `1 / total`.
    pub fn singleton(p: &Primitive, dist: TaskDistribution, total: usize) -> Self {
        Self {
            members: vec![p.id],
            mass: 1.0 / total as f64,
            dist,
            embedding: p.embedding.clone(),
            bbox: p.bbox,
        }
    }

    /// Smallest member id, used as the cluster's stable identity.
    pub fn representative(&self) -> u64 {
        self.members[0]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}
