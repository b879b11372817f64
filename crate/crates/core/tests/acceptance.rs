//! Acceptance criteria. Each criterion runs in sequence and prints one
//! PASS/FAIL line; the process exits non-zero if any criterion fails.

mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use taskib::config::RunConfig;
use taskib::eval::{evaluate, GroundTruthObject, MetricsReport};
use taskib::graph::PrimitiveGraph;
use taskib::ib::{agglomerative_ib, component_information, ClusteringResult};
use taskib::incremental::{component_delta, Adjacency, IncrementalClusterer};
use taskib::io;
use taskib::model::{Aabb3, EmbeddingVector, Primitive, TaskDistribution, TaskSet};
use taskib::pipeline;
use taskib::relevance::{build_conditional, build_relevance_matrix, build_theta};
use taskib::scenegraph::{PlaceNode, SceneObject};
use taskib::synth::{self, SynthParams};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($arg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

const DELTA_BARS: [f64; 4] = [0.001, 0.01, 0.1, 0.5];

/// One randomized clustering instance with its batch and streamed results.
struct Case {
    ids: Vec<u64>,
    dists: BTreeMap<u64, TaskDistribution>,
    edges: Vec<(u64, u64)>,
    delta_bar: f64,
    batch: ClusteringResult,
    streamed: ClusteringResult,
}

impl Case {
    fn dist_rows(&self) -> Vec<Vec<f64>> {
        self.ids
            .iter()
            .map(|i| self.dists[i].probs().to_vec())
            .collect()
    }
}

fn random_params<R: Rng>(rng: &mut R) -> SynthParams {
    SynthParams {
        primitives: rng.gen_range(1..=60),
        tasks: rng.gen_range(1..=8),
        dim: 8,
        objects: rng.gen_range(1..=10),
        world: rng.gen_range(3.0..12.0),
        spread: rng.gen_range(0.3..1.5),
        box_size: rng.gen_range(0.3..1.5),
        noise: rng.gen_range(0.2..1.2),
        background: 0.2,
        alpha: rng.gen_range(0.0..0.3),
        k: rng.gen_range(1..=4),
    }
}

fn stream<R: Rng>(
    rng: &mut R,
    kept: &[Primitive],
    dists: &BTreeMap<u64, TaskDistribution>,
    delta_bar: f64,
) -> Result<ClusteringResult, String> {
    let mut order = kept.to_vec();
    order.shuffle(rng);
    let mut inc = ok(IncrementalClusterer::new(delta_bar, Adjacency::BoxOverlap))?;
    let mut rest = order.as_slice();
    while !rest.is_empty() {
        let take = rng.gen_range(1..=rest.len().min(8));
        ok(inc.insert(rest[..take].to_vec(), dists))?;
        rest = &rest[take..];
    }
    ok(inc.finalize())
}

fn build_corpus() -> Result<Vec<Case>, String> {
    let mut rng = synth::rng(1);
    let mut cases = Vec::new();
    for i in 0..200u64 {
        let params = random_params(&mut rng);
        let inst = ok(synth::instance(1000 + i, &params))?;
        let rel = ok(build_relevance_matrix(&inst.primitives, &inst.tasks))?;
        let kept: Vec<Primitive> = inst
            .primitives
            .iter()
            .filter(|p| !rel.is_pruned(p.id))
            .cloned()
            .collect();
        let graph = ok(PrimitiveGraph::from_overlaps(kept.clone()))?;
        let delta_bar = DELTA_BARS[i as usize % DELTA_BARS.len()];
        let batch = ok(agglomerative_ib(&graph, &rel.dists, delta_bar))?;
        let streamed = stream(&mut rng, &kept, &rel.dists, delta_bar)?;
        let dists = kept
            .iter()
            .map(|p| (p.id, rel.dists[&p.id].clone()))
            .collect();
        cases.push(Case {
            ids: graph.ids().collect(),
            dists,
            edges: graph.edges().collect(),
            delta_bar,
            batch,
            streamed,
        });
    }
    Ok(cases)
}

fn criterion_1(corpus: &[Case], seconds: f64) -> Outcome {
    let mut identical_logs = 0;
    let mut merges = 0;
    for (i, c) in corpus.iter().enumerate() {
        ensure!(
            c.batch.partition() == c.streamed.partition(),
            "instance {i} (delta_bar {}): streamed partition differs from batch",
            c.delta_bar
        );
        if c.batch.merges == c.streamed.merges {
            identical_logs += 1;
        }
        merges += c.batch.merges.len();
    }
    ensure!(seconds < 60.0, "corpus took {seconds:.1} s");
    Ok(format!(
        "{} instances equal ({} with identical merge logs, {} merges), {:.2} s",
        corpus.len(),
        identical_logs,
        merges,
        seconds
    ))
}

/// Replays a merge log and checks each merge's weight against the exact
/// information lost.
fn check_merge_losses(
    c: &Case,
    result: &ClusteringResult,
    worst: &mut (f64, f64),
) -> Result<usize, String> {
    let n = c.ids.len();
    if n == 0 {
        return Ok(0);
    }
    let info0 = oracle::uniform_information(&c.dist_rows());
    let mut clusters: BTreeMap<u64, (Vec<u64>, Vec<f64>)> = c
        .ids
        .iter()
        .map(|&i| (i, (vec![i], c.dists[&i].probs().to_vec())))
        .collect();
    let info_of = |cl: &BTreeMap<u64, (Vec<u64>, Vec<f64>)>| {
        let masses: Vec<f64> = cl
            .values()
            .map(|(m, _)| m.len() as f64 / n as f64)
            .collect();
        let rows: Vec<Vec<f64>> = cl.values().map(|(_, d)| d.clone()).collect();
        oracle::mutual_information(&masses, &rows)
    };
    let mut before = info_of(&clusters);
    for m in &result.merges {
        let (ma, pa) = clusters.remove(&m.left).ok_or("merge of unknown cluster")?;
        let (mb, pb) = clusters
            .remove(&m.right)
            .ok_or("merge of unknown cluster")?;
        let (na, nb) = (ma.len() as f64, mb.len() as f64);
        let mixed: Vec<f64> = pa
            .iter()
            .zip(&pb)
            .map(|(a, b)| (na * a + nb * b) / (na + nb))
            .collect();
        let mut members = ma;
        members.extend(mb);
        members.sort_unstable();
        clusters.insert(members[0], (members, mixed));
        let after = info_of(&clusters);
        let loss_err = ((before - after) - m.weight).abs();
        let delta_err = (m.delta * info0 - m.weight).abs();
        worst.0 = worst.0.max(loss_err);
        worst.1 = worst.1.max(delta_err);
        ensure!(
            loss_err <= 1e-9,
            "merge ({}, {}): |dI - d| = {loss_err:e}",
            m.left,
            m.right
        );
        ensure!(
            delta_err <= 1e-9,
            "merge ({}, {}): |delta*I - d| = {delta_err:e}",
            m.left,
            m.right
        );
        before = after;
    }
    Ok(result.merges.len())
}

fn criterion_2(corpus: &[Case]) -> Outcome {
    let mut worst = (0.0, 0.0);
    let mut merges = 0;
    for c in corpus {
        merges += check_merge_losses(c, &c.batch, &mut worst)?;
        merges += check_merge_losses(c, &c.streamed, &mut worst)?;
    }
    Ok(format!(
        "{merges} merges, max |dI - d| = {:.1e}, max |delta*I - d| = {:.1e}",
        worst.0, worst.1
    ))
}

fn final_information(c: &Case, r: &ClusteringResult) -> f64 {
    let n = c.ids.len() as f64;
    let masses: Vec<f64> = r
        .clusters
        .iter()
        .map(|cl| cl.members.len() as f64 / n)
        .collect();
    let rows: Vec<Vec<f64>> = r
        .clusters
        .iter()
        .map(|cl| cl.dist.probs().to_vec())
        .collect();
    oracle::mutual_information(&masses, &rows)
}

fn criterion_3(corpus: &[Case]) -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, c) in corpus.iter().enumerate() {
        if c.ids.is_empty() {
            continue;
        }
        let info0 = oracle::uniform_information(&c.dist_rows());
        for r in [&c.batch, &c.streamed] {
            let sum: f64 = r.merges.iter().map(|m| m.weight).sum();
            let tol = 1e-9 * (1.0 + r.merges.len() as f64);
            let err = (info0 - final_information(c, r) - sum).abs();
            let reported = (r.info_initial - r.info_final - sum).abs();
            worst = worst.max(err).max(reported);
            ensure!(
                err <= tol,
                "instance {i}: telescoping error {err:e} > {tol:e}"
            );
            ensure!(
                reported <= tol,
                "instance {i}: reported info error {reported:e}"
            );
        }
    }
    Ok(format!("{} instances, max error {worst:.1e}", corpus.len()))
}

fn criterion_4(corpus: &[Case]) -> Outcome {
    let mut eligible = 0;
    for (i, c) in corpus.iter().enumerate() {
        let prims: Vec<Primitive> = c.ids.iter().map(|&id| dummy_primitive(id)).collect();
        let graph = ok(PrimitiveGraph::with_edges(prims, c.edges.clone()))?;
        let zero = ok(agglomerative_ib(&graph, &c.dists, 0.0))?;
        ensure!(
            zero.merges.is_empty(),
            "instance {i}: merges at delta_bar 0"
        );
        ensure!(
            zero.len() == c.ids.len(),
            "instance {i}: clusters != primitives at delta_bar 0"
        );

        // eligible when the unbounded merge sequence never loses all information in one step
        let full = oracle::naive_ib(&c.ids, &c.dists, &c.edges, f64::INFINITY);
        if full.merges.iter().any(|m| m.delta >= 1.0) {
            continue;
        }
        eligible += 1;
        let one = ok(agglomerative_ib(&graph, &c.dists, 1.0))?;
        let comps: BTreeSet<Vec<u64>> = oracle::components(&c.ids, &c.edges)
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect();
        ensure!(
            one.partition() == comps,
            "instance {i}: delta_bar 1 is not one cluster per component"
        );
    }
    ensure!(
        eligible * 2 >= corpus.len(),
        "only {eligible} eligible instances"
    );
    Ok(format!(
        "delta_bar 0: {} instances unmerged; delta_bar 1: {eligible} eligible instances fully merged",
        corpus.len()
    ))
}

fn dummy_primitive(id: u64) -> Primitive {
    Primitive::new(
        id,
        EmbeddingVector::new(vec![1.0]).unwrap(),
        Aabb3::new([0.0; 3], [1.0; 3]).unwrap(),
    )
}

fn random_dist<R: Rng>(rng: &mut R, width: usize) -> TaskDistribution {
    loop {
        let raw: Vec<f64> = (0..width)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen::<f64>()
                }
            })
            .collect();
        let s: f64 = raw.iter().sum();
        if s > 0.0 {
            return TaskDistribution::new(raw.iter().map(|x| x / s).collect()).unwrap();
        }
    }
}

fn criterion_5() -> Outcome {
    let mut runs = 0;
    let mut merges = 0;
    for seed in 0..50u64 {
        let mut rng = synth::rng(50_000 + seed);
        for n in 1..=12u64 {
            let width = rng.gen_range(2..=5);
            // a small pool of distributions produces exact ties
            let pool: Vec<TaskDistribution> = (0..rng.gen_range(1..=n as usize))
                .map(|_| random_dist(&mut rng, width))
                .collect();
            let ids: Vec<u64> = (0..n).map(|i| 3 * i + 1).collect();
            let dists: BTreeMap<u64, TaskDistribution> = ids
                .iter()
                .map(|&i| (i, pool[rng.gen_range(0..pool.len())].clone()))
                .collect();
            let p = rng.gen_range(0.1..0.8);
            let mut edges = Vec::new();
            for a in 0..ids.len() {
                for b in (a + 1)..ids.len() {
                    if rng.gen_bool(p) {
                        edges.push((ids[a], ids[b]));
                    }
                }
            }
            let prims: Vec<Primitive> = ids.iter().map(|&i| dummy_primitive(i)).collect();
            let graph = ok(PrimitiveGraph::with_edges(prims, edges.clone()))?;
            for delta_bar in [0.0, 0.05, 0.2, 0.5, 1.0] {
                let fast = ok(agglomerative_ib(&graph, &dists, delta_bar))?;
                let slow = oracle::naive_ib(&ids, &dists, &edges, delta_bar);
                ensure!(
                    fast.merges.len() == slow.merges.len(),
                    "seed {seed} n {n} delta_bar {delta_bar}: {} vs {} merges",
                    fast.merges.len(),
                    slow.merges.len()
                );
                for (f, s) in fast.merges.iter().zip(&slow.merges) {
                    ensure!(
                        f.left == s.left
                            && f.right == s.right
                            && f.weight.to_bits() == s.weight.to_bits()
                            && f.delta.to_bits() == s.delta.to_bits(),
                        "seed {seed} n {n} delta_bar {delta_bar}: {f:?} vs {s:?}"
                    );
                }
                ensure!(
                    fast.partition() == slow.partition,
                    "seed {seed} n {n}: partitions differ"
                );
                runs += 1;
                merges += fast.merges.len();
            }
        }
    }
    Ok(format!(
        "{runs} runs on N <= 12, {merges} merges bit-identical"
    ))
}

fn criterion_6() -> Outcome {
    let mut rng = synth::rng(6);
    let (mut pruned, mut null_in_top, mut errors, mut worst) = (0, 0, 0, 0.0f64);
    for trial in 0..1000 {
        let m = rng.gen_range(1..=8);
        let dim = 8;
        let k = rng.gen_range(1..=m + 1);
        // every tenth trial has a negative alpha and a primitive facing away from all tasks
        let negative = trial % 10 == 9;
        let alpha = if negative {
            -0.5
        } else {
            rng.gen_range(-0.1..0.6)
        };
        let tasks = ok(synth::random_tasks(&mut rng, m, dim, alpha, k))?;
        let tasks = ok(TaskSet::new(
            tasks.labels().to_vec(),
            tasks.embeddings().to_vec(),
            alpha,
            k,
        ))?;
        let away = || {
            let mut sum = vec![0.0; dim];
            for t in tasks.embeddings() {
                for (acc, v) in sum.iter_mut().zip(t.as_slice()) {
                    *acc -= v;
                }
            }
            EmbeddingVector::new(sum).ok()
        };
        let embedding = match trial % 3 {
            _ if negative && away().is_some() => away().unwrap(),
            0 => {
                let (t, noise) = (rng.gen_range(0..m), rng.gen_range(0.0..1.5));
                synth::perturb(&mut rng, &tasks.embeddings()[t], noise)
            }
            _ => synth::random_unit(&mut rng, dim),
        };
        let p = dummy_with(trial, embedding.clone());

        let f = embedding.as_slice();
        let mut theta = vec![alpha];
        for t in tasks.embeddings() {
            let dot: f64 = f.iter().zip(t.as_slice()).map(|(a, b)| a * b).sum();
            theta.push(dot.clamp(-1.0, 1.0));
        }
        let expected = oracle::conditional(&theta, k);

        let matrix = build_relevance_matrix(std::slice::from_ref(&p), &tasks);
        let single = build_theta(&p, &tasks).and_then(|th| build_conditional(&th, &tasks));
        match expected {
            None => {
                errors += 1;
                ensure!(
                    matrix.is_err() && single.is_err(),
                    "trial {trial}: expected no-positive-relevance error"
                );
            }
            Some(exp) => {
                let got_matrix = ok(matrix)?.dists[&p.id].probs().to_vec();
                let got_single = ok(single)?.probs().to_vec();
                for got in [&got_matrix, &got_single] {
                    for (g, e) in got.iter().zip(&exp) {
                        worst = worst.max((g - e).abs());
                        ensure!((g - e).abs() <= 1e-12, "trial {trial}: {got:?} vs {exp:?}");
                    }
                }
                if exp[0] == 1.0 {
                    pruned += 1;
                } else if exp[0] > 0.0 {
                    null_in_top += 1;
                }
            }
        }
    }
    ensure!(
        pruned > 0 && null_in_top > 0 && errors > 0,
        "cases not covered: pruned {pruned}, null in top-k {null_in_top}, errors {errors}"
    );
    Ok(format!(
        "1000 triples, max error {worst:.1e} ({pruned} pruned, {null_in_top} null in top-k, {errors} no-positive errors)"
    ))
}

fn dummy_with(id: u64, e: EmbeddingVector) -> Primitive {
    Primitive::new(id, e, Aabb3::new([0.0; 3], [1.0; 3]).unwrap())
}

fn bx(lo: [f64; 3], hi: [f64; 3]) -> Aabb3 {
    Aabb3::new(lo, hi).unwrap()
}

fn emb(v: &[f64]) -> EmbeddingVector {
    EmbeddingVector::new(v.to_vec()).unwrap()
}

fn obj(id: u64, e: &[f64], b: Aabb3, m: usize) -> SceneObject {
    SceneObject {
        id,
        members: vec![id],
        embedding: emb(e),
        bbox: b,
        dist: TaskDistribution::null(m),
        label: String::new(),
    }
}

fn gt(id: u64, b: Aabb3, tasks: &[usize]) -> GroundTruthObject {
    GroundTruthObject {
        id,
        bbox: b,
        tasks: tasks.to_vec(),
    }
}

fn tasks_of(es: &[&[f64]]) -> TaskSet {
    let labels = (0..es.len()).map(|i| format!("t{i}")).collect();
    TaskSet::new(labels, es.iter().map(|e| emb(e)).collect(), 0.2, 1).unwrap()
}

struct Expected {
    name: &'static str,
    /// (osR, osP, F1) in strict then relaxed mode.
    strict: [f64; 3],
    relaxed: [f64; 3],
    mean_iou: f64,
}

fn check_report(r: &MetricsReport, e: &Expected) -> Result<(), String> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let got = |m: &taskib::eval::ModeMetrics| [m.osr, m.osp, m.f1];
    for (mode, g, x) in [
        ("strict", got(&r.strict), e.strict),
        ("relaxed", got(&r.relaxed), e.relaxed),
    ] {
        ensure!(
            g.iter().zip(&x).all(|(a, b)| close(*a, *b)),
            "{}: {mode} got {g:?}, expected {x:?}",
            e.name
        );
    }
    ensure!(
        close(r.mean_iou, e.mean_iou),
        "{}: mean IoU {} vs {}",
        e.name,
        r.mean_iou,
        e.mean_iou
    );
    Ok(())
}

fn metrics_fixtures() -> Result<usize, String> {
    let one = tasks_of(&[&[1.0, 0.0, 0.0]]);
    let two = tasks_of(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
    let x = [1.0, 0.0, 0.0];
    let mut count = 0;
    let mut run =
        |objects: &[SceneObject], gts: &[GroundTruthObject], tasks: &TaskSet, e: Expected| {
            let r = ok(evaluate(objects, gts, tasks))?;
            check_report(&r, &e)?;
            count += 1;
            Ok::<MetricsReport, String>(r)
        };

    // mutual centroid containment; IoU 1/8 for the nested box and 1 for the exact one
    run(
        &[
            obj(0, &x, bx([0.5; 3], [1.5; 3]), 2),
            obj(
                1,
                &[0.0, 1.0, 0.0],
                bx([10.0, 0.0, 0.0], [12.0, 2.0, 2.0]),
                2,
            ),
        ],
        &[
            gt(0, bx([0.0; 3], [2.0; 3]), &[0]),
            gt(1, bx([10.0, 0.0, 0.0], [12.0, 2.0, 2.0]), &[1]),
        ],
        &two,
        Expected {
            name: "strict",
            strict: [1.0, 1.0, 1.0],
            relaxed: [1.0, 1.0, 1.0],
            mean_iou: (0.125 + 1.0) / 2.0,
        },
    )?;

    // the estimate contains the ground-truth centroid but not vice versa
    run(
        &[obj(0, &x, bx([0.0; 3], [10.0; 3]), 1)],
        &[gt(0, bx([0.0; 3], [1.0; 3]), &[0])],
        &one,
        Expected {
            name: "relaxed-only",
            strict: [0.0, 0.0, 0.0],
            relaxed: [1.0, 1.0, 1.0],
            mean_iou: 0.001,
        },
    )?;

    run(
        &[obj(0, &x, bx([5.0; 3], [6.0; 3]), 1)],
        &[gt(0, bx([0.0; 3], [1.0; 3]), &[0])],
        &one,
        Expected {
            name: "none",
            strict: [0.0; 3],
            relaxed: [0.0; 3],
            mean_iou: 0.0,
        },
    )?;

    // scores 1.0 (wrong box), 0.9 (right box, exactly at the cutoff) and
    // 0.89 (right box, below the cutoff): recall 1/2, precision 1/2
    let s19 = (1.0f64 - 0.81).sqrt();
    let s89 = (1.0f64 - 0.89 * 0.89).sqrt();
    let unit = |lo: f64| bx([lo, 0.0, 0.0], [lo + 1.0, 1.0, 1.0]);
    let one2 = tasks_of(&[&[1.0, 0.0]]);
    let r = run(
        &[
            obj(0, &[1.0, 0.0], bx([10.0; 3], [11.0; 3]), 1),
            obj(1, &[0.9, s19], unit(0.0), 1),
            obj(2, &[0.89, s89], unit(3.0), 1),
        ],
        &[gt(0, unit(0.0), &[0]), gt(1, unit(3.0), &[0])],
        &one2,
        Expected {
            name: "90% threshold edge",
            strict: [0.5, 0.5, 0.5],
            relaxed: [0.5, 0.5, 0.5],
            mean_iou: 0.5,
        },
    )?;
    ensure!(
        r.relaxed.detections == 2,
        "threshold edge: {} detections",
        r.relaxed.detections
    );

    // two estimates for one ground-truth box: the second stays unmatched
    run(
        &[
            obj(0, &x, bx([0.5; 3], [1.5; 3]), 1),
            obj(
                1,
                &[0.95, (1.0f64 - 0.95 * 0.95).sqrt(), 0.0],
                bx([0.4; 3], [1.6; 3]),
                1,
            ),
            obj(
                2,
                &[0.5, (0.75f64).sqrt(), 0.0],
                bx([10.0, 0.0, 0.0], [12.0, 2.0, 2.0]),
                1,
            ),
        ],
        &[
            gt(0, bx([0.0; 3], [2.0; 3]), &[0]),
            gt(1, bx([10.0, 0.0, 0.0], [12.0, 2.0, 2.0]), &[0]),
        ],
        &one,
        Expected {
            name: "one-to-one",
            strict: [0.5, 0.5, 0.5],
            relaxed: [0.5, 0.5, 0.5],
            mean_iou: 0.125 / 2.0,
        },
    )?;

    // centroids on each other's boundary; IoU 0.5 / 1.5
    run(
        &[obj(0, &x, bx([0.0; 3], [1.0; 3]), 1)],
        &[gt(0, bx([0.5, 0.0, 0.0], [1.5, 1.0, 1.0]), &[0])],
        &one,
        Expected {
            name: "half overlap",
            strict: [1.0, 1.0, 1.0],
            relaxed: [1.0, 1.0, 1.0],
            mean_iou: 1.0 / 3.0,
        },
    )?;

    let r = run(
        &[],
        &[gt(0, bx([0.0; 3], [1.0; 3]), &[0])],
        &one,
        Expected {
            name: "empty scene",
            strict: [0.0; 3],
            relaxed: [0.0; 3],
            mean_iou: 0.0,
        },
    )?;
    ensure!(!r.warnings.is_empty(), "empty scene: no warning");

    // the first object's argmax is task 0 (0.8 > 0.6) so it is no detection
    // for task 1, whose only detection is the misplaced second object
    let r = run(
        &[
            obj(0, &[0.8, 0.6, 0.0], bx([0.0; 3], [1.0; 3]), 2),
            obj(1, &[0.0, 1.0, 0.0], bx([20.0; 3], [21.0; 3]), 2),
        ],
        &[gt(0, bx([0.0; 3], [1.0; 3]), &[0, 1])],
        &two,
        Expected {
            name: "argmax task",
            strict: [0.5, 0.5, 0.5],
            relaxed: [0.5, 0.5, 0.5],
            mean_iou: 0.5,
        },
    )?;
    let pr = &r.precision_readings;
    ensure!(
        (pr.argmax_pairs, pr.threshold_pairs, pr.qualifying_pairs) == (2, 2, 2),
        "argmax task: readings {pr:?}"
    );
    Ok(count)
}

fn random_metrics_fixture<R: Rng>(
    rng: &mut R,
) -> (Vec<SceneObject>, Vec<GroundTruthObject>, TaskSet) {
    let m = rng.gen_range(1..=4);
    let tasks = synth::random_tasks(rng, m, 6, 0.2, 1).unwrap();
    let world = rng.gen_range(2.0..8.0);
    let (n_obj, n_gt) = (rng.gen_range(0..12), rng.gen_range(1..8));
    let centers: Vec<[f64; 3]> = (0..n_obj)
        .map(|_| [(); 3].map(|_| rng.gen_range(0.0..world)))
        .collect();
    let gcenters: Vec<[f64; 3]> = (0..n_gt)
        .map(|_| [(); 3].map(|_| rng.gen_range(0.0..world)))
        .collect();
    let objects = centers
        .iter()
        .enumerate()
        .map(|(i, &c)| SceneObject {
            id: i as u64,
            members: vec![i as u64],
            embedding: synth::random_unit(rng, 6),
            bbox: {
                let size = rng.gen_range(0.5..3.0);
                synth::random_box(rng, c, size)
            },
            dist: TaskDistribution::null(m),
            label: String::new(),
        })
        .collect();
    let gts = gcenters
        .iter()
        .enumerate()
        .map(|(i, &c)| GroundTruthObject {
            id: i as u64,
            bbox: {
                let size = rng.gen_range(0.5..3.0);
                synth::random_box(rng, c, size)
            },
            tasks: vec![rng.gen_range(0..m)],
        })
        .collect();
    (objects, gts, tasks)
}

fn criterion_7() -> Outcome {
    let fixtures = metrics_fixtures()?;
    let mut rng = synth::rng(7);
    let mut strictly_less = 0;
    for i in 0..100 {
        let (mut objects, gts, tasks) = random_metrics_fixture(&mut rng);
        let r = ok(evaluate(&objects, &gts, &tasks))?;
        ensure!(
            r.strict.osr <= r.relaxed.osr,
            "fixture {i}: strict osR > relaxed osR"
        );
        for (s, x) in r.strict.per_task.iter().zip(&r.relaxed.per_task) {
            ensure!(s.osr <= x.osr, "fixture {i}: per-task strict osR > relaxed");
        }
        for m in [&r.strict, &r.relaxed] {
            let f1 = if m.osr + m.osp == 0.0 {
                0.0
            } else {
                2.0 * m.osr * m.osp / (m.osr + m.osp)
            };
            ensure!((m.f1 - f1).abs() <= 1e-12, "fixture {i}: F1 inconsistent");
            ensure!(
                (0.0..=1.0).contains(&m.osr) && (0.0..=1.0).contains(&m.osp),
                "fixture {i}: rate outside [0, 1]"
            );
        }
        if r.strict.osr < r.relaxed.osr {
            strictly_less += 1;
        }
        objects.reverse();
        let p = ok(evaluate(&objects, &gts, &tasks))?;
        let same = |a: &MetricsReport, b: &MetricsReport| {
            a.strict.osr == b.strict.osr
                && a.strict.osp == b.strict.osp
                && a.relaxed.osr == b.relaxed.osr
                && a.relaxed.osp == b.relaxed.osp
        };
        // permutation only matters for exact score ties, which random embeddings avoid
        ensure!(same(&r, &p), "fixture {i}: metrics depend on object order");
    }
    Ok(format!(
        "{fixtures} hand-computed fixtures within 1e-12; strict <= relaxed on 100 random fixtures ({strictly_less} strictly)"
    ))
}

fn criterion_8() -> Outcome {
    let mut rng = synth::rng(8);
    let mut done = 0;
    let mut seed = 80_000;
    let mut worst: f64 = 0.0;
    let mut worst_delta: f64 = 0.0;
    while done < 100 {
        seed += 1;
        let mut params = random_params(&mut rng);
        params.primitives = rng.gen_range(4..=60);
        params.world = rng.gen_range(8.0..20.0);
        let inst = ok(synth::instance(seed, &params))?;
        let rel = ok(build_relevance_matrix(&inst.primitives, &inst.tasks))?;
        let kept: Vec<Primitive> = inst
            .primitives
            .into_iter()
            .filter(|p| !rel.is_pruned(p.id))
            .collect();
        let graph = ok(PrimitiveGraph::from_overlaps(kept.clone()))?;
        let ids: Vec<u64> = graph.ids().collect();
        let edges: Vec<(u64, u64)> = graph.edges().collect();
        let comps = oracle::components(&ids, &edges);
        if comps.len() < 2 {
            continue;
        }
        done += 1;
        let n = ids.len() as f64;
        let rows: Vec<Vec<f64>> = ids.iter().map(|i| rel.dists[i].probs().to_vec()).collect();
        let total = oracle::uniform_information(&rows);
        let py = oracle::marginal(&vec![1.0 / n; ids.len()], &rows);
        let mut sum = 0.0;
        for c in &comps {
            let ds: Vec<TaskDistribution> = c.iter().map(|i| rel.dists[i].clone()).collect();
            sum += c.len() as f64 / n * component_information(&ds, &py);
        }
        let err = (total - sum).abs();
        worst = worst.max(err);
        ensure!(err <= 1e-9, "seed {seed}: decomposition error {err:e}");

        let mut inc = ok(IncrementalClusterer::new(0.1, Adjacency::BoxOverlap))?;
        ok(inc.insert(kept, &rel.dists))?;
        ensure!(
            (inc.info_xy() - total).abs() <= 1e-9,
            "seed {seed}: incremental I(X;Y) off"
        );

        // per-component normalization reproduces the global fractional loss
        let batch = ok(agglomerative_ib(&graph, &rel.dists, 0.1))?;
        for m in &batch.merges {
            let size = comps.iter().find(|c| c.contains(&m.left)).unwrap().len();
            let local = m.weight * n / size as f64;
            let d = component_delta(local, size, ids.len(), total);
            worst_delta = worst_delta.max((d - m.delta).abs());
            ensure!(
                (d - m.delta).abs() <= 1e-9,
                "seed {seed}: component delta {d} vs {}",
                m.delta
            );
        }
    }
    Ok(format!(
        "100 multi-component instances, max error {worst:.1e} (component delta {worst_delta:.1e})"
    ))
}

fn criterion_9() -> Outcome {
    let params = SynthParams {
        primitives: 2000,
        tasks: 25,
        dim: 64,
        objects: 200,
        world: 40.0,
        spread: 0.9,
        box_size: 1.07,
        noise: 0.6,
        background: 0.1,
        alpha: 0.0,
        k: 3,
    };
    let inst = ok(synth::instance(9, &params))?;
    let start = Instant::now();
    let rel = ok(build_relevance_matrix(&inst.primitives, &inst.tasks))?;
    let kept: Vec<Primitive> = inst
        .primitives
        .iter()
        .filter(|p| !rel.is_pruned(p.id))
        .cloned()
        .collect();
    let graph = ok(PrimitiveGraph::from_overlaps(kept))?;
    let result = ok(agglomerative_ib(&graph, &rel.dists, 1.0))?;
    let batch_time = start.elapsed().as_secs_f64();
    let edges = graph.edge_count();
    ensure!(
        graph.len() >= 1900,
        "only {} unpruned primitives",
        graph.len()
    );
    ensure!(
        (5000..=7000).contains(&edges),
        "{edges} edges, wanted about 6000"
    );
    ensure!(batch_time < 2.0, "batch clustering took {batch_time:.3} s");

    // a 200-primitive chain plus unrelated clutter, then one insert that touches the chain
    let mut rng = synth::rng(90);
    let tasks = ok(synth::random_tasks(&mut rng, 25, 64, 0.0, 3))?;
    let mut prims = Vec::new();
    for i in 0..199u64 {
        let e = synth::perturb(&mut rng, &tasks.embeddings()[(i / 40) as usize], 0.5);
        let x = i as f64 * 0.5;
        prims.push(Primitive::new(i, e, bx([x, 0.0, 0.0], [x + 0.7, 1.0, 1.0])));
    }
    for i in 0..800u64 {
        let e = synth::random_unit(&mut rng, 64);
        let c = [
            rng.gen_range(0.0..100.0),
            rng.gen_range(10.0..100.0),
            rng.gen_range(0.0..100.0),
        ];
        prims.push(Primitive::new(
            1000 + i,
            e,
            synth::random_box(&mut rng, c, 0.7),
        ));
    }
    let rel = ok(build_relevance_matrix(&prims, &tasks))?;
    let kept: Vec<Primitive> = prims.into_iter().filter(|p| !rel.is_pruned(p.id)).collect();
    let mut inc = ok(IncrementalClusterer::new(0.1, Adjacency::BoxOverlap))?;
    ok(inc.insert(kept, &rel.dists))?;
    let e = synth::perturb(&mut rng, &tasks.embeddings()[0], 0.5);
    let new = Primitive::new(5000, e, bx([49.0, 0.0, 0.0], [50.0, 1.0, 1.0]));
    let new_rel = ok(build_relevance_matrix(std::slice::from_ref(&new), &tasks))?;
    ensure!(!new_rel.is_pruned(5000), "probe primitive was pruned");
    let start = Instant::now();
    let report = ok(inc.insert(vec![new], &new_rel.dists))?;
    let insert_time = start.elapsed().as_secs_f64();
    let size = inc.graph().component_size(5000).unwrap();
    ensure!(size >= 200, "probe component has {size} primitives");
    ensure!(
        insert_time < 0.05,
        "incremental insert took {:.1} ms",
        insert_time * 1e3
    );
    Ok(format!(
        "batch {} primitives / 25 tasks / {edges} edges in {:.3} s ({} merges); insert into {size}-primitive component in {:.2} ms ({} re-clustered)",
        graph.len(),
        batch_time,
        result.merges.len(),
        insert_time * 1e3,
        report.reclustered
    ))
}

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn criterion_10() -> Outcome {
    let places = ok(io::read_places(&fixture("path_places.jsonl")))?;
    let tasks = ok(ok(io::read_tasks(&fixture("tasks.json")))?.task_set())?;
    let images = ok(io::read_images(&fixture("path_images.jsonl"), tasks.dim()))?;
    let blocks: BTreeSet<Vec<u64>> = [vec![1, 2, 3], vec![4, 5, 6]].into();
    let regions_at = |delta_bar: f64| -> Result<BTreeSet<Vec<u64>>, String> {
        let cfg = RunConfig {
            delta_bar_regions: delta_bar,
            alpha_regions: 0.0,
            ..RunConfig::default()
        };
        let r = ok(pipeline::cmd_regions(&places, &images, &tasks, &cfg))?;
        Ok(r.regions.iter().map(|r| r.members.clone()).collect())
    };
    // With alpha 0 each block's places share a one-hot distribution, so the
    // in-block merges are free and the boundary merge loses everything that
    // is left: its delta is 1. Every delta_bar below 1 splits at the boundary.
    let singletons: BTreeSet<Vec<u64>> = (1..=6).map(|i| vec![i]).collect();
    ensure!(
        regions_at(0.0)? == singletons,
        "delta_bar 0 should keep every place"
    );
    for delta_bar in [1e-6, 0.001, 0.01, 0.1, 0.5, 0.9, 0.999] {
        ensure!(
            regions_at(delta_bar)? == blocks,
            "delta_bar {delta_bar}: not split at the boundary"
        );
    }
    // the unbounded reference run exposes the boundary merge's delta
    let features = ok(taskib::scenegraph::assign_place_features(
        &places,
        &images,
        RunConfig::default().place_feature_strategy,
    ))?;
    let prims = ok(taskib::scenegraph::place_primitives(&places, &features))?;
    let region_tasks = ok(pipeline::task_set_with(&tasks, 0.0, tasks.k()))?;
    let rel = ok(build_relevance_matrix(&prims, &region_tasks))?;
    let ids: Vec<u64> = places.iter().map(|p| p.id).collect();
    let edges = ok(taskib::scenegraph::place_edges(&places))?;
    let full = oracle::naive_ib(&ids, &rel.dists, &edges, f64::INFINITY);
    let last = full.merges.last().ok_or("no merges")?;
    ensure!(
        (last.left, last.right) == (1, 4),
        "last merge {last:?} is not the boundary merge"
    );
    ensure!(
        (last.delta - 1.0).abs() <= 1e-12,
        "boundary merge delta {}, expected 1",
        last.delta
    );
    ensure!(
        full.merges[..full.merges.len() - 1]
            .iter()
            .all(|m| m.delta == 0.0),
        "in-block merges are not free"
    );

    // random disconnected place graphs never produce cross-component regions
    let mut rng = synth::rng(10);
    let mut graphs = 0;
    for _ in 0..50 {
        let n = rng.gen_range(2..=30u64);
        let mut places: Vec<PlaceNode> = (0..n)
            .map(|i| PlaceNode {
                id: i,
                pos: [i as f64, 0.0, 0.0],
                neighbors: Vec::new(),
                visible: vec![i % 5],
            })
            .collect();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(0.15) {
                    places[i as usize].neighbors.push(j);
                }
            }
        }
        let images: Vec<_> = (0..5)
            .map(|id| taskib::scenegraph::ImageFeature {
                id,
                stamp: 0.0,
                pos: [0.0; 3],
                embedding: synth::random_unit(&mut rng, 3),
            })
            .collect();
        let edges = ok(taskib::scenegraph::place_edges(&places))?;
        let ids: Vec<u64> = (0..n).collect();
        let comps = oracle::components(&ids, &edges);
        if comps.len() < 2 {
            continue;
        }
        graphs += 1;
        for delta_bar in [0.5, 1.0] {
            let cfg = RunConfig {
                delta_bar_regions: delta_bar,
                ..RunConfig::default()
            };
            let r = ok(pipeline::cmd_regions(&places, &images, &tasks, &cfg))?;
            ensure!(
                r.regions.len() >= comps.len(),
                "fewer regions than components"
            );
            let covered: usize = r.regions.iter().map(|g| g.members.len()).sum();
            ensure!(
                covered == n as usize,
                "regions cover {covered} of {n} places"
            );
            for g in &r.regions {
                ensure!(
                    comps
                        .iter()
                        .any(|c| g.members.iter().all(|m| c.contains(m))),
                    "region {:?} spans components",
                    g.members
                );
            }
        }
    }
    ensure!(graphs >= 20, "only {graphs} disconnected graphs generated");
    Ok(format!(
        "6-node path splits for 0 < delta_bar < 1 (boundary delta 1); {graphs} disconnected graphs keep regions within components"
    ))
}

fn run(number: usize, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    };
    match outcome {
        Ok(detail) => {
            println!("criterion {number:>2} PASS  {title}: {detail}");
            true
        }
        Err(why) => {
            println!("criterion {number:>2} FAIL  {title}: {why}");
            false
        }
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let corpus = panic::catch_unwind(build_corpus)
        .unwrap_or_else(|_| Err("corpus generation panicked".into()));
    let corpus_time = start.elapsed().as_secs_f64();
    let corpus = &corpus;
    let with_corpus = |f: fn(&[Case]) -> Outcome| {
        move || corpus.as_ref().map_err(Clone::clone).and_then(|c| f(c))
    };

    let results = [
        run(1, "batch equals incremental", move || {
            corpus
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|c| criterion_1(c, corpus_time))
        }),
        run(2, "merge-loss identity", with_corpus(criterion_2)),
        run(3, "telescoping conservation", with_corpus(criterion_3)),
        run(4, "boundary thresholds", with_corpus(criterion_4)),
        run(5, "naive reference equality", criterion_5),
        run(6, "relevance reference", criterion_6),
        run(7, "metrics fixtures", criterion_7),
        run(8, "information decomposition", criterion_8),
        run(9, "performance envelope", criterion_9),
        run(10, "region fixtures", criterion_10),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
