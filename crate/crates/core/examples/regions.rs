//! Region clustering over a place graph: two rooms joined by a corridor.

use taskib::config::RunConfig;
use taskib::model::{EmbeddingVector, TaskSet};
use taskib::pipeline::cmd_regions;
use taskib::scenegraph::{ImageFeature, PlaceNode};

fn main() -> taskib::Result<()> {
    let e = |v: &[f64]| EmbeddingVector::new(v.to_vec());
    let tasks = TaskSet::new(
        vec!["cook dinner".into(), "read a book".into()],
        vec![e(&[1.0, 0.0, 0.0])?, e(&[0.0, 1.0, 0.0])?],
        0.0,
        3,
    )?;
    let images = vec![
        ImageFeature {
            id: 0,
            stamp: 0.0,
            pos: [0.0, 0.0, 1.0],
            embedding: e(&[0.9, 0.1, 0.2])?,
        },
        ImageFeature {
            id: 1,
            stamp: 1.0,
            pos: [5.0, 0.0, 1.0],
            embedding: e(&[0.5, 0.5, 0.3])?,
        },
        ImageFeature {
            id: 2,
            stamp: 2.0,
            pos: [10.0, 0.0, 1.0],
            embedding: e(&[0.1, 0.9, 0.2])?,
        },
    ];
    let places: Vec<PlaceNode> = (0..11u64)
        .map(|i| PlaceNode {
            id: i,
            pos: [i as f64, 0.0, 0.0],
            neighbors: if i < 10 { vec![i + 1] } else { vec![] },
            visible: vec![match i {
                0..=3 => 0,
                4..=6 => 1,
                _ => 2,
            }],
        })
        .collect();
    for delta_bar in [0.01, 0.3, 0.9] {
        let cfg = RunConfig {
            delta_bar_regions: delta_bar,
            ..RunConfig::default()
        };
        let out = cmd_regions(&places, &images, &tasks, &cfg)?;
        let summary: Vec<String> = out
            .regions
            .iter()
            .map(|r| format!("{:?} {}", r.members, r.label))
            .collect();
        println!("delta_bar {delta_bar}: {}", summary.join(" | "));
    }
    Ok(())
}
