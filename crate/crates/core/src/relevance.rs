//! Task-relevance conditionals `p(y|x)` built from cosine scores against the
//! task list, with a null task scored at `alpha`.
//!
//! For a primitive, the score vector holds `alpha` at index 0 and the task
//! cosine similarities after it. If no task reaches `alpha` the primitive is
//! pre-pruned to a one-hot null distribution. Otherwise the `k` highest
//! scores (the null entry competes like any task, ties go to the lower index)
//! are kept and the rank-`r` score is weighted by `k - r + 1` before
//! normalizing.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{Primitive, TaskDistribution, TaskSet};

/// Scores over the null task and the `m` real tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    /// `values[0]` is the null score; the rest are task similarities.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn alpha(&self) -> f64 {
        self.0[0]
    }

    /// Best real-task score.
    pub fn max_task_score(&self) -> f64 {
        self.0[1..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn build_theta(p: &Primitive, tasks: &TaskSet) -> Result<ThetaVector> {
    if p.embedding.dim() != tasks.dim() {
        return Err(Error::DimensionMismatch {
            expected: tasks.dim(),
            actual: p.embedding.dim(),
        });
    }
    let mut values = Vec::with_capacity(tasks.len() + 1);
    values.push(tasks.alpha());
    values.extend(
        tasks
            .embeddings()
            .iter()
            .map(|t| p.embedding.dot_unchecked(t)),
    );
    Ok(ThetaVector(values))
}

pub fn build_conditional(theta: &ThetaVector, tasks: &TaskSet) -> Result<TaskDistribution> {
    let m = tasks.len();
    if theta.values().len() != m + 1 {
        return Err(Error::DimensionMismatch {
            expected: m + 1,
            actual: theta.values().len(),
        });
    }
    let mut order: Vec<usize> = (0..=m).collect();
    conditional_into(theta.values(), tasks.k(), &mut order).map(TaskDistribution::from_raw)
}

/// Shared kernel; `order` is scratch space of length `theta.len()`.
fn conditional_into(theta: &[f64], k: usize, order: &mut [usize]) -> Result<Vec<f64>> {
    let alpha = theta[0];
    let max_task = theta[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs = vec![0.0; theta.len()];
    if max_task < alpha {
        probs[0] = 1.0;
        return Ok(probs);
    }
    for (i, o) in order.iter_mut().enumerate() {
        *o = i;
    }
    order.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]).then(a.cmp(&b)));
    let mut total = 0.0;
    for (rank, &j) in order.iter().take(k).enumerate() {
        // retained negative scores carry no relevance
        let w = ((k - rank) as f64 * theta[j]).max(0.0);
        probs[j] = w;
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::NoPositiveRelevance);
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// Conditionals for a whole primitive set plus the ids pruned to the null
/// task.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Relevance {
    pub dists: BTreeMap<u64, TaskDistribution>,
    pub pruned: BTreeSet<u64>,
}

impl Relevance {
    pub fn get(&self, id: u64) -> Option<&TaskDistribution> {
        self.dists.get(&id)
    }

    pub fn is_pruned(&self, id: u64) -> bool {
        self.pruned.contains(&id)
    }

    pub fn extend(&mut self, other: Relevance) {
        self.dists.extend(other.dists);
        self.pruned.extend(other.pruned);
    }
}

pub fn build_relevance_matrix(primitives: &[Primitive], tasks: &TaskSet) -> Result<Relevance> {
    let m = tasks.len();
    let dim = tasks.dim();
    // row-major task matrix keeps the inner loop on contiguous memory
    let matrix: Vec<f64> = tasks
        .embeddings()
        .iter()
        .flat_map(|e| e.as_slice().iter().copied())
        .collect();
    let mut theta = vec![0.0; m + 1];
    theta[0] = tasks.alpha();
    let mut order = vec![0usize; m + 1];
    let mut out = Relevance::default();
    for p in primitives {
        let f = p.embedding.as_slice();
        if f.len() != dim {
            return Err(Error::Primitive {
                id: p.id,
                source: Box::new(Error::DimensionMismatch {
                    expected: dim,
                    actual: f.len(),
                }),
            });
        }
        for (j, row) in matrix.chunks_exact(dim).enumerate() {
            theta[j + 1] = row.iter().zip(f).map(|(a, b)| a * b).sum();
        }
        let probs =
            conditional_into(&theta, tasks.k(), &mut order).map_err(|e| Error::Primitive {
                id: p.id,
                source: Box::new(e),
            })?;
        let dist = TaskDistribution::from_raw(probs);
        if dist.is_null() {
            out.pruned.insert(p.id);
        }
        if out.dists.insert(p.id, dist).is_some() {
            return Err(Error::DuplicateId(p.id));
        }
    }
    Ok(out)
}
