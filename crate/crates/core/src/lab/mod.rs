//! End-to-end experiments for the quantitative statements about the flow.
//! Every check is an inequality with explicit slack, reported row by row.

mod decay;
mod experiments;
mod report;

pub use decay::{
    decay_experiment, decay_exponents, decay_exponents_exact, DecayParams, ExactDecay,
};
pub use experiments::{
    boundedness_check, comparison_experiment, comparison_of_runs, contraction_experiment,
    contraction_of_runs, gn_check, gn_terms, l1_bound_check, regularity_cauchy_experiment,
    uniqueness_proxy, GnTerms,
};
pub use report::{ExperimentReport, InputDigest, Trend, MARGIN_SENTINEL};

use crate::field::ScalarField;
use crate::solver::{InnerOptions, LadderLevel, Snapshots, Source};

/// Relative slack on the stability inequalities.
pub const REL_SLACK: f64 = 1e-6;

/// Discretization constant in the `L^r` Cauchy tolerance `C·(h + τ)`.
pub const C_REG: f64 = 1e-3;

/// Constant in the uniqueness tolerance `C·(h + τ + (p_min − 1))`.
pub const C_UNI: f64 = 0.5;

/// Shared time discretization and tolerances of the experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct LabConfig {
    pub final_time: f64,
    pub tau: f64,
    pub inner: InnerOptions<f64>,
    pub ladder: LadderLevel,
    pub snapshots: Snapshots<f64>,
    pub tol_decay: f64,
    /// Earliest snapshot the decay bound is tested at.
    pub t_min: f64,
    pub contraction_abs_tol: f64,
    pub c_reg: f64,
    pub c_uni: f64,
    /// Allowed ratio growth between successive refinements.
    pub gn_growth: f64,
}

impl LabConfig {
    pub fn new(final_time: f64, tau: f64) -> Self {
        Self {
            final_time,
            tau,
            inner: InnerOptions::default(),
            ladder: LadderLevel::None,
            snapshots: Snapshots::EveryStep,
            tol_decay: 0.05,
            t_min: 0.0,
            contraction_abs_tol: 1e-9,
            c_reg: C_REG,
            c_uni: C_UNI,
            gn_growth: 1.2,
        }
    }

    pub fn with_inner(mut self, inner: InnerOptions<f64>) -> Self {
        self.inner = inner;
        self
    }

    pub fn with_ladder(mut self, ladder: LadderLevel) -> Self {
        self.ladder = ladder;
        self
    }
}

/// Initial datum and source of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub u0: ScalarField<f64>,
    pub f: Source<f64>,
}

impl ProblemData {
    pub fn new(u0: ScalarField<f64>, f: Source<f64>) -> Self {
        Self { u0, f }
    }

    pub fn homogeneous(u0: ScalarField<f64>) -> Self {
        let f = Source::zero(u0.grid());
        Self { u0, f }
    }

    pub(crate) fn digest(&self, d: InputDigest, tag: &str) -> InputDigest {
        d.field(&format!("{tag}.u0"), &self.u0)
            .source(&format!("{tag}.f"), &self.f)
    }
}
