//! Configuration files and field persistence.

pub mod config;
pub mod snapshot;

pub use config::{normalize, ConfigError, FieldSpec, RunConfig, SolverKind, OUTPUT_ENV};
pub use snapshot::{
    load_field, load_snapshot, load_trajectory, save_snapshot, save_trajectory, write_atomic,
    Snapshot,
};
