//! Time integration by proximal steps and by p-Laplacian continuation.

pub mod evolve;
pub mod ladder;
pub mod plap;
pub mod rof;
pub mod source;

pub use evolve::{
    evolve, evolve_plap, p_continuation, step_slice, Continuation, LadderLevel, Snapshots,
    SolveConfig, StepLog, Trajectory,
};
pub use ladder::{
    auto_level, data_ladder, identity_ladder, smoothing_pass, truncation_error, Ladder,
};
pub use plap::{plap_step, PlapOptions, PlapStep};
pub use rof::{duality_gap, rof_step, InnerMethod, InnerOptions, RofSolver, RofStep};
pub use source::Source;
