//! Shared fixtures for the criterion benchmarks.

use gil_core::data::{generate_spring_dataset, GenerateConfig, Task};
use gil_core::graph::{Construction, GeometricGraph};
use gil_core::train::record_graph;
use gil_core::{Head, Model, ModelConfig};

/// KNN graphs built from consecutive states of one simulated spring system.
pub fn spring_graphs(particles: usize, count: usize, k: usize, seed: u64) -> Vec<GeometricGraph> {
    let ds = generate_spring_dataset(&GenerateConfig {
        particles,
        steps: count,
        task: Task::Newtonian,
        seed,
        ..Default::default()
    })
    .expect("simulation");
    ds.records
        .iter()
        .map(|r| record_graph(&r.to_graph_record(), Construction::Knn(k)).expect("graph"))
        .collect()
}

pub fn egnn(head: Head) -> Model {
    Model::new(ModelConfig::egnn(head, 2, 0)).expect("model")
}

pub fn attention(head: Head) -> Model {
    Model::new(ModelConfig::attention(head, 2, 0)).expect("model")
}
