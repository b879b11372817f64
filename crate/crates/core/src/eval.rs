//! Open-set detection metrics: open-set recall and precision under strict
//! and relaxed centroid-containment criteria, F1, and mean IoU.
//!
//! Objects are ranked per task by cosine similarity (ties to the lower
//! object index) and matched one-to-one against that task's ground truth
//! in rank order. Among several admissible ground-truth boxes the one with
//! the highest IoU is taken, ties to the earlier entry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{bbox_iou, cosine_similarity, Aabb3, TaskSet};
use crate::scenegraph::SceneObject;

/// Fraction of a task's best score an object needs to count as a
/// detection for precision.
pub const PRECISION_SCORE_RATIO: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub id: u64,
    pub bbox: Aabb3,
    /// 0-based indices into the task list.
    pub tasks: Vec<usize>,
}

/// Outcome of comparing one estimated box with one ground-truth box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Detection {
    /// Each box contains the other's centroid.
    Strict,
    /// Exactly one containment holds.
    Relaxed,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Strict,
    Relaxed,
}

impl MatchMode {
    fn accepts(self, d: Detection) -> bool {
        match self {
            MatchMode::Strict => d == Detection::Strict,
            MatchMode::Relaxed => d != Detection::None,
        }
    }
}

pub fn detection_mode(est: &Aabb3, gt: &Aabb3) -> Detection {
    let a = est.contains_point(gt.center());
    let b = gt.contains_point(est.center());
    match (a, b) {
        (true, true) => Detection::Strict,
        (false, false) => Detection::None,
        _ => Detection::Relaxed,
    }
}

pub fn f1_score(recall: f64, precision: f64) -> f64 {
    if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * recall * precision / (recall + precision)
    }
}

/// Per-task scores and rankings shared by all metrics.
struct Scored<'a> {
    objects: &'a [SceneObject],
    gts: &'a [GroundTruthObject],
    /// `scores[o][t]`
    scores: Vec<Vec<f64>>,
    /// Ground-truth indices per task.
    gt_of_task: Vec<Vec<usize>>,
}

impl<'a> Scored<'a> {
    fn new(
        objects: &'a [SceneObject],
        gts: &'a [GroundTruthObject],
        tasks: &TaskSet,
    ) -> Result<Self> {
        let m = tasks.len();
        let mut gt_of_task = vec![Vec::new(); m];
        for (i, g) in gts.iter().enumerate() {
            if g.tasks.is_empty() {
                return Err(Error::Config(format!(
                    "ground truth {} lists no task",
                    g.id
                )));
            }
            for &t in &g.tasks {
                if t >= m {
                    return Err(Error::Config(format!(
                        "ground truth {} references task {t} but only {m} tasks exist",
                        g.id
                    )));
                }
                gt_of_task[t].push(i);
            }
        }
        let scores = objects
            .iter()
            .map(|o| {
                tasks
                    .embeddings()
                    .iter()
                    .map(|t| cosine_similarity(&o.embedding, t))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            objects,
            gts,
            scores,
            gt_of_task,
        })
    }

    fn tasks(&self) -> usize {
        self.gt_of_task.len()
    }

    fn ranked(&self, task: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.objects.len()).collect();
        idx.sort_by(|&a, &b| {
            self.scores[b][task]
                .total_cmp(&self.scores[a][task])
                .then(a.cmp(&b))
        });
        idx
    }

    /// Greedy one-to-one matching of `candidates` (in order) against the
    /// task's ground truth. Returns the matched gt index per candidate.
    fn match_greedy(
        &self,
        task: usize,
        candidates: &[usize],
        mode: MatchMode,
    ) -> Vec<Option<usize>> {
        let pool = &self.gt_of_task[task];
        let mut used = vec![false; pool.len()];
        candidates
            .iter()
            .map(|&o| {
                let est = &self.objects[o].bbox;
                let mut best: Option<(usize, f64)> = None;
                for (slot, &g) in pool.iter().enumerate() {
                    if used[slot] || !mode.accepts(detection_mode(est, &self.gts[g].bbox)) {
                        continue;
                    }
                    let iou = bbox_iou(est, &self.gts[g].bbox);
                    if best.is_none_or(|(_, b)| iou > b) {
                        best = Some((slot, iou));
                    }
                }
                best.map(|(slot, _)| {
                    used[slot] = true;
                    pool[slot]
                })
            })
            .collect()
    }

    fn top_n(&self, task: usize) -> Vec<usize> {
        let mut r = self.ranked(task);
        r.truncate(self.gt_of_task[task].len());
        r
    }

    fn argmax_task(&self, o: usize) -> usize {
        let s = &self.scores[o];
        let mut best = 0;
        for t in 1..s.len() {
            if s[t] > s[best] {
                best = t;
            }
        }
        best
    }

    fn best_score(&self, task: usize) -> f64 {
        self.scores
            .iter()
            .map(|s| s[task])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Objects counted as detections of `task` for precision, by score.
    fn precision_candidates(&self, task: usize) -> Vec<usize> {
        let cutoff = PRECISION_SCORE_RATIO * self.best_score(task);
        self.ranked(task)
            .into_iter()
            .filter(|&o| self.argmax_task(o) == task && self.scores[o][task] >= cutoff)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task: usize,
    pub label: String,
    pub ground_truth: usize,
    pub recall_hits: usize,
    pub detections: usize,
    pub precision_hits: usize,
    pub osr: f64,
    pub osp: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMetrics {
    pub mode: MatchMode,
    pub osr: f64,
    pub osp: f64,
    pub f1: f64,
    pub recall_hits: usize,
    pub ground_truth: usize,
    pub precision_hits: usize,
    pub detections: usize,
    pub per_task: Vec<TaskMetrics>,
}

/// Counts behind the two conditions of the precision denominator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionReadings {
    /// Objects whose most similar task has ground truth.
    pub argmax_pairs: usize,
    /// (object, task) pairs within the score ratio of the task's best.
    pub threshold_pairs: usize,
    /// Pairs meeting both conditions; the denominator actually used.
    pub qualifying_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strict: ModeMetrics,
    pub relaxed: ModeMetrics,
    pub mean_iou: f64,
    pub object_count: usize,
    pub precision_readings: PrecisionReadings,
    pub warnings: Vec<String>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mode_metrics(s: &Scored<'_>, tasks: &TaskSet, mode: MatchMode) -> ModeMetrics {
    let mut per_task = Vec::new();
    for t in 0..s.tasks() {
        let n = s.gt_of_task[t].len();
        if n == 0 {
            continue;
        }
        let recall_hits = s
            .match_greedy(t, &s.top_n(t), mode)
            .iter()
            .filter(|m| m.is_some())
            .count();
        let cands = s.precision_candidates(t);
        let precision_hits = s
            .match_greedy(t, &cands, mode)
            .iter()
            .filter(|m| m.is_some())
            .count();
        let osr = ratio(recall_hits, n);
        let osp = ratio(precision_hits, cands.len());
        per_task.push(TaskMetrics {
            task: t,
            label: tasks.labels()[t].clone(),
            ground_truth: n,
            recall_hits,
            detections: cands.len(),
            precision_hits,
            osr,
            osp,
            f1: f1_score(osr, osp),
        });
    }
    let sum = |f: fn(&TaskMetrics) -> usize| per_task.iter().map(f).sum::<usize>();
    let (rh, gt, ph, det) = (
        sum(|t| t.recall_hits),
        sum(|t| t.ground_truth),
        sum(|t| t.precision_hits),
        sum(|t| t.detections),
    );
    let osr = ratio(rh, gt);
    let osp = ratio(ph, det);
    ModeMetrics {
        mode,
        osr,
        osp,
        f1: f1_score(osr, osp),
        recall_hits: rh,
        ground_truth: gt,
        precision_hits: ph,
        detections: det,
        per_task,
    }
}

/// Correct top-`n_t` detections over all ground-truth objects.
pub fn open_set_recall(
    objects: &[SceneObject],
    gts: &[GroundTruthObject],
    tasks: &TaskSet,
    mode: MatchMode,
) -> Result<f64> {
    let s = Scored::new(objects, gts, tasks)?;
    Ok(mode_metrics(&s, tasks, mode).osr)
}

/// Correct detections over the detections whose most similar task is the
/// task in question and whose score is within 90% of that task's best.
pub fn open_set_precision(
    objects: &[SceneObject],
    gts: &[GroundTruthObject],
    tasks: &TaskSet,
    mode: MatchMode,
) -> Result<f64> {
    let s = Scored::new(objects, gts, tasks)?;
    Ok(mode_metrics(&s, tasks, mode).osp)
}

/// Average IoU of each task's top-`n_t` objects against their relaxed
/// greedy match (0 when unmatched).
pub fn mean_iou(
    objects: &[SceneObject],
    gts: &[GroundTruthObject],
    tasks: &TaskSet,
) -> Result<f64> {
    let s = Scored::new(objects, gts, tasks)?;
    Ok(mean_iou_scored(&s))
}

fn mean_iou_scored(s: &Scored<'_>) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for t in 0..s.tasks() {
        let top = s.top_n(t);
        for (&o, m) in top.iter().zip(s.match_greedy(t, &top, MatchMode::Relaxed)) {
            total += m.map_or(0.0, |g| bbox_iou(&s.objects[o].bbox, &s.gts[g].bbox));
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

pub fn evaluate(
    objects: &[SceneObject],
    gts: &[GroundTruthObject],
    tasks: &TaskSet,
) -> Result<MetricsReport> {
    let s = Scored::new(objects, gts, tasks)?;
    let mut warnings = Vec::new();
    for (t, pool) in s.gt_of_task.iter().enumerate() {
        if pool.is_empty() {
            warnings.push(format!(
                "task {t} ({}) has no ground truth and is excluded",
                tasks.labels()[t]
            ));
        }
    }
    let strict = mode_metrics(&s, tasks, MatchMode::Strict);
    let relaxed = mode_metrics(&s, tasks, MatchMode::Relaxed);
    if relaxed.detections == 0 {
        warnings.push("no qualifying detections; precision reported as 0".into());
    }
    let has_gt: Vec<bool> = s.gt_of_task.iter().map(|p| !p.is_empty()).collect();
    let argmax_pairs = (0..objects.len())
        .filter(|&o| has_gt[s.argmax_task(o)])
        .count();
    let threshold_pairs = (0..s.tasks())
        .filter(|&t| has_gt[t])
        .map(|t| {
            let cutoff = PRECISION_SCORE_RATIO * s.best_score(t);
            s.scores.iter().filter(|row| row[t] >= cutoff).count()
        })
        .sum();
    Ok(MetricsReport {
        mean_iou: mean_iou_scored(&s),
        object_count: objects.len(),
        precision_readings: PrecisionReadings {
            argmax_pairs,
            threshold_pairs,
            qualifying_pairs: relaxed.detections,
        },
        strict,
        relaxed,
        warnings,
    })
}
