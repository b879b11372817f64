//! Streams primitives into the incremental clusterer in small batches and
//! checks the result against batch clustering.

use rand::seq::SliceRandom;

use taskib::graph::PrimitiveGraph;
use taskib::ib::agglomerative_ib;
use taskib::incremental::{Adjacency, IncrementalClusterer};
use taskib::relevance::build_relevance_matrix;
use taskib::synth::{instance, rng, SynthParams};

fn main() -> taskib::Result<()> {
    let delta_bar = 0.01;
    let scene = instance(
        11,
        &SynthParams {
            primitives: 400,
            objects: 40,
            world: 25.0,
            ..SynthParams::default()
        },
    )?;
    let rel = build_relevance_matrix(&scene.primitives, &scene.tasks)?;
    let mut kept: Vec<_> = scene
        .primitives
        .into_iter()
        .filter(|p| !rel.is_pruned(p.id))
        .collect();
    kept.shuffle(&mut rng(5));

    let mut inc = IncrementalClusterer::new(delta_bar, Adjacency::BoxOverlap)?;
    for (frame, batch) in kept.chunks(25).enumerate() {
        let report = inc.insert(batch.to_vec(), &rel.dists)?;
        println!(
            "frame {frame:>2}: {:>3} primitives, {:>3} components, {} re-clustered, {} re-cut",
            report.total_primitives, report.components, report.reclustered, report.recut
        );
    }
    let streamed = inc.finalize()?;

    let graph = PrimitiveGraph::from_overlaps(kept)?;
    let batch = agglomerative_ib(&graph, &rel.dists, delta_bar)?;
    println!(
        "{} clusters streamed, {} batch, identical: {}",
        streamed.len(),
        batch.len(),
        streamed.partition() == batch.partition()
    );
    Ok(())
}
