//! Open-set metrics of a clustered synthetic scene against its generating
//! objects.

use taskib::config::RunConfig;
use taskib::eval::{evaluate, GroundTruthObject};
use taskib::model::Aabb3;
use taskib::pipeline::{cmd_cluster, metrics_table};
use taskib::synth::{instance, SynthParams};

fn main() -> taskib::Result<()> {
    let params = SynthParams {
        primitives: 200,
        objects: 12,
        world: 30.0,
        spread: 0.6,
        background: 0.0,
        ..SynthParams::default()
    };
    let scene = instance(31, &params)?;

    // ground truth: hull of the primitives of each task within each spatial blob
    let mut by_task: Vec<Vec<Aabb3>> = vec![Vec::new(); params.tasks];
    for (p, t) in scene.primitives.iter().zip(&scene.truth) {
        if let Some(t) = t {
            match by_task[*t].iter_mut().find(|b| {
                b.center()
                    .iter()
                    .zip(p.bbox.center())
                    .all(|(a, c)| (a - c).abs() < 2.0)
            }) {
                Some(b) => *b = b.hull(&p.bbox),
                None => by_task[*t].push(p.bbox),
            }
        }
    }
    let gts: Vec<GroundTruthObject> = by_task
        .iter()
        .enumerate()
        .flat_map(|(t, boxes)| boxes.iter().map(move |b| (t, *b)))
        .enumerate()
        .map(|(id, (t, bbox))| GroundTruthObject {
            id: id as u64,
            bbox,
            tasks: vec![t],
        })
        .collect();

    let cfg = RunConfig {
        delta_bar_objects: 0.05,
        alpha_objects: params.alpha,
        ..RunConfig::default()
    };
    let graph = cmd_cluster(&scene.primitives, &scene.tasks, &cfg)?;
    let report = evaluate(&graph.objects, &gts, &scene.tasks)?;
    print!("{}", metrics_table(&report));
    Ok(())
}
