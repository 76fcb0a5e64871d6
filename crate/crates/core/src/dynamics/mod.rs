//! Benchmark systems, discretization and noisy trajectory datasets.

mod integrate;
mod io;
mod model;
mod trajectory;

pub use integrate::{rk4_step, zoh_discretize};
pub use io::{load_dataset, read_manifest, save_dataset, sequence_file, Manifest, SplitIndices, MANIFEST_FILE};
pub use model::{
    model_by_name, pendulum_drift, pendulum_model, spring_chain_matrix, springs_model, vdp_drift, vdp_model,
    Drift, Dynamics, ModelKind, Region, SystemModel, NOISE_VARIANCE,
};
pub use trajectory::{
    generate_dataset, generate_dataset_in, generate_many, generate_trajectory, Dataset, SplitRatio, Trajectory,
    MIN_SEQUENCES,
};
