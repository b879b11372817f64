//! Task-relevance distributions for a few embeddings, including a pruned one.

use taskib::model::{Aabb3, EmbeddingVector, Primitive, TaskSet};
use taskib::relevance::{build_conditional, build_relevance_matrix, build_theta};

fn main() -> taskib::Result<()> {
    let e = |v: &[f64]| EmbeddingVector::new(v.to_vec());
    let tasks = TaskSet::new(
        vec!["pick up the mug".into(), "water the plant".into()],
        vec![e(&[1.0, 0.0, 0.0])?, e(&[0.0, 1.0, 0.0])?],
        0.23,
        3,
    )?;
    let unit = Aabb3::new([0.0; 3], [1.0; 3])?;
    let prims = vec![
        Primitive::new(1, e(&[0.9, 0.3, 0.1])?, unit),
        Primitive::new(2, e(&[0.5, 0.5, 0.2])?, unit),
        Primitive::new(3, e(&[0.1, 0.1, 1.0])?, unit),
    ];
    for p in &prims {
        let theta = build_theta(p, &tasks)?;
        let dist = build_conditional(&theta, &tasks)?;
        println!(
            "primitive {}: theta {:.3?} -> p(y|x) {:.3?}",
            p.id,
            theta.values(),
            dist.probs()
        );
    }
    let rel = build_relevance_matrix(&prims, &tasks)?;
    println!("pruned: {:?}", rel.pruned);
    Ok(())
}
