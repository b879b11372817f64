//! Associates per-frame observations into tracks, then clusters the
//! finished tracks through the streaming pipeline.

use taskib::config::RunConfig;
use taskib::pipeline::cmd_stream;
use taskib::synth::{instance, observation_stream, SynthParams};

fn main() -> taskib::Result<()> {
    let scene = instance(
        21,
        &SynthParams {
            primitives: 80,
            objects: 10,
            world: 30.0,
            ..SynthParams::default()
        },
    )?;
    let observations = observation_stream(22, &scene.primitives, 60, 4, 0.1, 0.05);
    let cfg = RunConfig {
        tau_seconds: 0.5,
        ..RunConfig::default()
    };
    let out = cmd_stream(&observations, &scene.tasks, &cfg)?;
    println!(
        "{} observations -> {} tracks -> {} objects",
        observations.len(),
        out.primitives.len(),
        out.scene.objects.len()
    );
    let worst = out.latency.iter().map(|r| r.seconds).fold(0.0, f64::max);
    println!(
        "{} inserts, slowest {:.3} ms",
        out.latency.len(),
        worst * 1e3
    );
    Ok(())
}
