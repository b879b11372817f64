//! Batch clustering of a synthetic scene at several thresholds.
//!
//! cargo run --example batch_clustering -- [seed]

use taskib::config::RunConfig;
use taskib::pipeline::cmd_cluster;
use taskib::synth::{instance, SynthParams};

fn main() -> taskib::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let params = SynthParams {
        primitives: 300,
        objects: 25,
        world: 20.0,
        ..SynthParams::default()
    };
    let scene = instance(seed, &params)?;
    println!(
        "{} primitives, {} tasks",
        scene.primitives.len(),
        scene.tasks.len()
    );
    for delta_bar in [0.0, 0.001, 0.01, 0.1, 1.0] {
        let cfg = RunConfig {
            delta_bar_objects: delta_bar,
            alpha_objects: params.alpha,
            ..RunConfig::default()
        };
        let graph = cmd_cluster(&scene.primitives, &scene.tasks, &cfg)?;
        println!(
            "delta_bar {delta_bar:<6} -> {:>4} objects",
            graph.objects.len()
        );
    }
    let cfg = RunConfig {
        delta_bar_objects: 0.01,
        alpha_objects: params.alpha,
        ..RunConfig::default()
    };
    let graph = cmd_cluster(&scene.primitives, &scene.tasks, &cfg)?;
    for o in graph.objects.iter().take(5) {
        println!(
            "object {:>3}: {:>2} primitives, label {}",
            o.id,
            o.members.len(),
            o.label
        );
    }
    Ok(())
}
