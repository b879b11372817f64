//! Seeded synthetic scenes for examples, tests and benchmarks.
//!
//! Objects are placed uniformly in a cube and each gets a task; primitives
//! scatter around their object with embeddings near that task's embedding.
//! A fraction of primitives is background with a random embedding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{Aabb3, EmbeddingVector, Primitive, TaskSet};
use crate::tracker::SegmentObservation;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub primitives: usize,
    pub tasks: usize,
    pub dim: usize,
    pub objects: usize,
    /// Side length of the cube objects are placed in.
    pub world: f64,
    /// Half-width of the region primitives scatter in around their object.
    pub spread: f64,
    /// Mean primitive box side; sides vary uniformly by +-50%.
    pub box_size: f64,
    /// Magnitude of the random perturbation added to task embeddings.
    pub noise: f64,
    /// Fraction of primitives with unrelated embeddings.
    pub background: f64,
    pub alpha: f64,
    pub k: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            primitives: 60,
            tasks: 4,
            dim: 16,
            objects: 8,
            world: 10.0,
            spread: 0.8,
            box_size: 0.6,
            noise: 0.6,
            background: 0.2,
            alpha: 0.2,
            k: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub tasks: TaskSet,
    pub primitives: Vec<Primitive>,
    /// Task index of each primitive's object, `None` for background.
    pub truth: Vec<Option<usize>>,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> EmbeddingVector {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Ok(e) = EmbeddingVector::new(v) {
            return e;
        }
    }
}

/// `base` plus a random vector of length up to `noise`, re-normalized.
pub fn perturb<R: Rng>(rng: &mut R, base: &EmbeddingVector, noise: f64) -> EmbeddingVector {
    loop {
        let dir = random_unit(rng, base.dim());
        let scale = noise * rng.gen::<f64>();
        let v: Vec<f64> = base
            .as_slice()
            .iter()
            .zip(dir.as_slice())
            .map(|(b, d)| b + scale * d)
            .collect();
        if let Ok(e) = EmbeddingVector::new(v) {
            return e;
        }
    }
}

pub fn random_tasks<R: Rng>(
    rng: &mut R,
    m: usize,
    dim: usize,
    alpha: f64,
    k: usize,
) -> Result<TaskSet> {
    let labels = (0..m).map(|i| format!("task-{i}")).collect();
    let embeddings = (0..m).map(|_| random_unit(rng, dim)).collect();
    TaskSet::new(labels, embeddings, alpha, k.min(m + 1))
}

pub fn random_box<R: Rng>(rng: &mut R, center: [f64; 3], size: f64) -> Aabb3 {
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for i in 0..3 {
        let half = 0.5 * size * rng.gen_range(0.5..1.5);
        lo[i] = center[i] - half;
        hi[i] = center[i] + half;
    }
    Aabb3::new(lo, hi).expect("ordered corners")
}

pub fn instance(seed: u64, p: &SynthParams) -> Result<Instance> {
    let mut rng = rng(seed);
    let tasks = random_tasks(&mut rng, p.tasks, p.dim, p.alpha, p.k)?;
    let objects: Vec<([f64; 3], usize)> = (0..p.objects.max(1))
        .map(|_| {
            let c = [(); 3].map(|_| rng.gen_range(0.0..p.world));
            (c, rng.gen_range(0..p.tasks))
        })
        .collect();
    let mut primitives = Vec::with_capacity(p.primitives);
    let mut truth = Vec::with_capacity(p.primitives);
    for id in 0..p.primitives as u64 {
        let (c, task) = objects[rng.gen_range(0..objects.len())];
        let center = c.map(|x| x + rng.gen_range(-p.spread..=p.spread));
        let bbox = random_box(&mut rng, center, p.box_size);
        let (embedding, t) = if rng.gen::<f64>() < p.background {
            (random_unit(&mut rng, p.dim), None)
        } else {
            (
                perturb(&mut rng, &tasks.embeddings()[task], p.noise),
                Some(task),
            )
        };
        primitives.push(Primitive::new(id, embedding, bbox));
        truth.push(t);
    }
    Ok(Instance {
        tasks,
        primitives,
        truth,
    })
}

/// Observations of each primitive over a run of consecutive frames,
/// sorted by frame. Boxes repeat the primitive's box so successive
/// observations pass any IoU gate.
pub fn observation_stream(
    seed: u64,
    primitives: &[Primitive],
    frames: u64,
    views: u64,
    frame_period: f64,
    noise: f64,
) -> Vec<SegmentObservation> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for p in primitives {
        let start = rng.gen_range(0..frames.max(1));
        for f in start..(start + views.max(1)).min(frames.max(1)) {
            out.push(SegmentObservation {
                frame: f,
                stamp: f as f64 * frame_period,
                embedding: perturb(&mut rng, &p.embedding, noise),
                bbox: p.bbox,
            });
        }
    }
    out.sort_by_key(|o| o.frame);
    out
}
