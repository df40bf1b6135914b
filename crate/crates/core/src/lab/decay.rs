//! Long-time decay exponents and the dynamic decay check.

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::lab::report::{ExperimentReport, InputDigest, MARGIN_SENTINEL};
use crate::lab::LabConfig;
use crate::solver::{evolve, SolveConfig};

/// Constants of `‖u(t)‖_r ≤ C ‖u0‖_{r0}^{h0} / t^{h1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayParams {
    pub n: u32,
    pub r0: f64,
    pub r: f64,
    pub h0: f64,
    pub h1: f64,
    pub c: f64,
}

fn check_range(n: u32, r0: f64, r: f64) -> Result<()> {
    let ok = n >= 2 && 1.0 < r && r < r0 && r0 < 2.0 && (n as f64) > r0;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidRange(format!(
            "need N >= 2, 1 < r < r0 < 2, N > r0 (got N={n}, r0={r0}, r={r})"
        )))
    }
}

pub fn decay_exponents(n: u32, r0: f64, r: f64) -> Result<DecayParams> {
    check_range(n, r0, r)?;
    let nf = n as f64;
    let h0 = r0 * (nf - r) / (r * (nf - r0));
    let h1 = nf * (r0 - r) / (r * (nf - r0));
    let c = (nf * (r0 - r) / (nf - r0)).powf(h1);
    Ok(DecayParams {
        n,
        r0,
        r,
        h0,
        h1,
        c,
    })
}

/// Exact exponents over rationals; `c_base` is the base of `C = c_base^h1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactDecay {
    pub h0: Rational64,
    pub h1: Rational64,
    pub c_base: Rational64,
}

impl ExactDecay {
    pub fn c(&self) -> f64 {
        ratio_f64(self.c_base).powf(ratio_f64(self.h1))
    }
}

fn ratio_f64(q: Rational64) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

pub fn decay_exponents_exact(n: u32, r0: Rational64, r: Rational64) -> Result<ExactDecay> {
    check_range(n, ratio_f64(r0), ratio_f64(r))?;
    let one = Rational64::from_integer(1);
    let two = Rational64::from_integer(2);
    if !(one < r && r < r0 && r0 < two) {
        return Err(Error::InvalidRange("need 1 < r < r0 < 2".into()));
    }
    let nq = Rational64::from_integer(n as i64);
    Ok(ExactDecay {
        h0: r0 * (nq - r) / (r * (nq - r0)),
        h1: nq * (r0 - r) / (r * (nq - r0)),
        c_base: nq * (r0 - r) / (nq - r0),
    })
}

/// Runs the homogeneous flow from `u0` and compares `‖u(t)‖_r` against the
/// decay bound at every snapshot with `t >= max(config.t_min, 2τ)`.
pub fn decay_experiment(
    u0: &ScalarField<f64>,
    params: &DecayParams,
    config: &LabConfig,
) -> Result<ExperimentReport> {
    if params.n != 2 {
        return Err(Error::InvalidRange(format!(
            "decay experiment runs in dimension 2, got N={}",
            params.n
        )));
    }
    let fresh = decay_exponents(params.n, params.r0, params.r)?;
    if fresh != *params {
        return Err(Error::InvalidRange(
            "decay constants do not match their exponents".into(),
        ));
    }
    let digest = InputDigest::new("decay")
        .num("r0", params.r0)
        .num("r", params.r)
        .num("tol", config.tol_decay)
        .num("T", config.final_time)
        .num("tau", config.tau)
        .field("u0", u0)
        .finish();
    let mut report = ExperimentReport::new("decay", digest, &["t", "norm_r", "bound"]);
    let scale = params.c * u0.lr_norm(params.r0).powf(params.h0);
    if scale == 0.0 {
        report.check_row(vec![0.0], 0.0, MARGIN_SENTINEL);
        return Ok(report);
    }
    let traj = evolve(&config.solve(u0.clone(), None))?;
    let t_min = config.t_min.max(2.0 * config.tau);
    for (t, u) in traj.times().iter().zip(traj.states()) {
        if *t + 1e-12 < t_min {
            continue;
        }
        let bound = (1.0 + config.tol_decay) * scale / t.powf(params.h1);
        report.check_row(vec![*t], u.lr_norm(params.r), bound);
    }
    Ok(report)
}

impl LabConfig {
    pub(crate) fn solve(
        &self,
        u0: ScalarField<f64>,
        f: Option<&crate::solver::Source<f64>>,
    ) -> SolveConfig<f64> {
        let mut c = SolveConfig::new(u0, self.final_time, self.tau)
            .with_ladder(self.ladder)
            .with_inner(self.inner)
            .with_snapshots(self.snapshots.clone());
        if let Some(f) = f {
            c = c.with_source(f.clone());
        }
        c
    }
}
