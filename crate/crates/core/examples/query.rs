//! Ranks scene-graph objects against a query embedding.

use taskib::config::RunConfig;
use taskib::pipeline::{cmd_cluster, cmd_query};
use taskib::synth::{instance, perturb, rng, SynthParams};

fn main() -> taskib::Result<()> {
    let scene = instance(
        41,
        &SynthParams {
            primitives: 150,
            world: 25.0,
            ..SynthParams::default()
        },
    )?;
    let graph = cmd_cluster(
        &scene.primitives,
        &scene.tasks,
        &RunConfig {
            alpha_objects: 0.2,
            ..RunConfig::default()
        },
    )?;
    let query = perturb(&mut rng(42), &scene.tasks.embeddings()[0], 0.3);
    for r in cmd_query(&graph, &query, 3)? {
        let o = &graph.objects[r.index];
        println!(
            "object {:>3} score {:.3} label {} ({} primitives)",
            r.id,
            r.score,
            o.label,
            o.members.len()
        );
    }
    Ok(())
}
