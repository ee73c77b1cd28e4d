//! Synthetic spring-system dynamics and the JSON-lines dataset format.

mod dataset;
mod physics;

pub use dataset::{
    emit_dataset, generate_spring_dataset, load_dataset, load_graph_records, record_from_state,
    split_dataset, write_dataset, Dataset, DatasetMeta, DatasetRecord, GenerateConfig, GraphRecord,
    Split, Task, GENERATOR_VERSION,
};
pub use physics::{
    hamiltonian, simulate, spring_forces, spring_potential, Integrator, ParticleSystem,
};
