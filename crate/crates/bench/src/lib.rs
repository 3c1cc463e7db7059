//! Workloads shared by the benchmarks.

use trainpoly::{fixtures, GraphMap, LabeledTransitionGraph, MarkedAbelianization};

/// The running example and a few seeded random train tracks, labeled.
pub fn labeled_workloads() -> Vec<(String, LabeledTransitionGraph)> {
    let mut maps: Vec<(String, GraphMap)> = vec![("running".into(), fixtures::running_example())];
    for seed in [3, 17, 42] {
        maps.push((format!("random-{seed}"), fixtures::random_train_track(seed, 8)));
    }
    maps.into_iter()
        .map(|(name, f)| {
            let m = MarkedAbelianization::new(&f, None, None).expect("random maps are markable");
            (name, LabeledTransitionGraph::build(&m))
        })
        .collect()
}
