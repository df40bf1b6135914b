//! Stability, regularity and uniqueness experiments.

use crate::calculus::{tv, TvOptions};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::lab::report::{ExperimentReport, InputDigest, Trend, MARGIN_SENTINEL};
use crate::lab::{LabConfig, ProblemData, REL_SLACK};
use crate::solver::{evolve, p_continuation, LadderLevel, PlapOptions, Source, Trajectory};

fn run(data: &ProblemData, config: &LabConfig) -> Result<Trajectory<f64>> {
    evolve(&config.solve(data.u0.clone(), Some(&data.f)))
}

fn base_digest(name: &str, config: &LabConfig) -> InputDigest {
    InputDigest::new(name)
        .num("T", config.final_time)
        .num("tau", config.tau)
        .num("gap_tol", config.inner.gap_tol)
}

fn check_ordered(
    u1: &ScalarField<f64>,
    f1: &Source<f64>,
    u2: &ScalarField<f64>,
    f2: &Source<f64>,
) -> Result<()> {
    if u1.sub(u2)?.max_value() > 0.0 || !f1.le(f2)? {
        return Err(Error::InvalidInputs(
            "comparison needs u0_1 <= u0_2 and f_1 <= f_2 cellwise".into(),
        ));
    }
    Ok(())
}

fn run_digest(name: &str, a: &Trajectory<f64>, b: &Trajectory<f64>) -> InputDigest {
    InputDigest::new(name)
        .num("tau", a.tau())
        .num("T", *a.times().last().expect("nonempty trajectory"))
        .field("1.u0", &a.ladder().u0)
        .source("1.f", &a.ladder().f)
        .field("2.u0", &b.ladder().u0)
        .source("2.f", &b.ladder().f)
}

/// Order preservation: `u0¹ ≤ u0²` and `f1 ≤ f2` give `u1 ≤ u2`.
pub fn comparison_experiment(
    data1: &ProblemData,
    data2: &ProblemData,
    config: &LabConfig,
) -> Result<ExperimentReport> {
    check_ordered(&data1.u0, &data1.f, &data2.u0, &data2.f)?;
    comparison_of_runs(&run(data1, config)?, &run(data2, config)?)
}

/// [`comparison_experiment`] on two finished runs over the same time grid;
/// the tolerance is `1e-6·(sup|u0| + T·sup|f|)` over both data.
pub fn comparison_of_runs(a: &Trajectory<f64>, b: &Trajectory<f64>) -> Result<ExperimentReport> {
    let (la, lb) = (a.ladder(), b.ladder());
    check_ordered(&la.u0, &la.f, &lb.u0, &lb.f)?;
    a.max_l1_distance(b)?;
    let digest = run_digest("comparison", a, b).finish();
    let mut report =
        ExperimentReport::new("comparison", digest, &["t", "max_positive_part", "tol"]);
    let final_time = *a.times().last().expect("nonempty trajectory");
    let scale =
        la.u0.sup_norm().max(lb.u0.sup_norm()) + final_time * la.f.sup_norm().max(lb.f.sup_norm());
    let tol = REL_SLACK * scale;
    for ((t, u1), u2) in a.times().iter().zip(a.states()).zip(b.states()) {
        let excess = u1.sub(u2)?.max_value().max(0.0);
        report.check_row(vec![*t], excess, tol);
    }
    Ok(report)
}

/// `max_t ‖u1(t) − u2(t)‖_1 ≤ ∫∫|f1 − f2| + ∫|u0¹ − u0²|` on the data the
/// two runs actually evolved.
pub fn contraction_experiment(
    data1: &ProblemData,
    data2: &ProblemData,
    config: &LabConfig,
) -> Result<ExperimentReport> {
    contraction_of_runs(
        &run(data1, config)?,
        &run(data2, config)?,
        config.contraction_abs_tol,
    )
}

/// [`contraction_experiment`] on two finished runs over the same time grid.
pub fn contraction_of_runs(
    a: &Trajectory<f64>,
    b: &Trajectory<f64>,
    abs_tol: f64,
) -> Result<ExperimentReport> {
    a.max_l1_distance(b)?;
    let digest = run_digest("contraction", a, b)
        .num("abs_tol", abs_tol)
        .finish();
    let mut report = ExperimentReport::new("contraction", digest, &["t", "l1_distance", "bound"]);
    let (la, lb) = (a.ladder(), b.ladder());
    let final_time = *a.times().last().expect("nonempty trajectory");
    let rhs = la.f.sub(&lb.f)?.l1_integral(final_time) + la.u0.sub(&lb.u0)?.l1_norm();
    let allowed = rhs * (1.0 + REL_SLACK) + abs_tol;
    for ((t, u1), u2) in a.times().iter().zip(a.states()).zip(b.states()) {
        report.check_row(vec![*t], u1.sub(u2)?.l1_norm(), allowed);
    }
    Ok(report)
}

/// `‖u(t)‖_1 ≤ ‖u0‖_1 + ∫_0^t ‖f‖_1` at every snapshot, `u0` being the
/// datum the trajectory started from.
pub fn l1_bound_check(traj: &Trajectory<f64>, f: &Source<f64>) -> Result<ExperimentReport> {
    traj.grid().check_same(f.grid())?;
    let u0 = &traj.ladder().u0;
    let digest = InputDigest::new("l1_bound")
        .field("u0", u0)
        .source("f", f)
        .num("tau", traj.tau())
        .finish();
    let mut report = ExperimentReport::new("l1_bound", digest, &["t", "l1_norm", "bound"]);
    let m0 = u0.l1_norm();
    for (t, u) in traj.times().iter().zip(traj.states()) {
        let bound = (m0 + f.l1_integral(*t)) * (1.0 + REL_SLACK);
        report.check_row(vec![*t], u.l1_norm(), bound);
    }
    Ok(report)
}

/// Ladder levels `n < m` on the same rough data:
/// `max_t ‖u_n − u_m‖_r ≤ ‖u_n(0) − u_m(0)‖_r + ∫_0^T ‖f_n − f_m‖_r`, with
/// relative slack plus `c_reg·(h + τ)`.
pub fn regularity_cauchy_experiment(
    data: &ProblemData,
    r: f64,
    n: u32,
    m: u32,
    config: &LabConfig,
) -> Result<ExperimentReport> {
    if !(r > 1.0 && r < 2.0) {
        return Err(Error::InvalidRange(format!("need 1 < r < 2, got {r}")));
    }
    if n == 0 || n > m {
        return Err(Error::InvalidRange(format!(
            "need ladder levels 1 <= n <= m, got ({n}, {m})"
        )));
    }
    let digest = data
        .digest(base_digest("regularity", config), "data")
        .num("r", r)
        .num("n", n as f64)
        .num("m", m as f64)
        .num("c_reg", config.c_reg)
        .finish();
    let mut report = ExperimentReport::new("regularity", digest, &["t", "lr_distance", "bound"]);
    let mut cfg = config.clone();
    cfg.ladder = LadderLevel::Level(n);
    let a = run(data, &cfg)?;
    cfg.ladder = LadderLevel::Level(m);
    let b = if n == m { a.clone() } else { run(data, &cfg)? };
    let (la, lb) = (a.ladder(), b.ladder());
    let rhs = la.u0.sub(&lb.u0)?.lr_norm(r) + la.f.sub(&lb.f)?.lr_integral(r, config.final_time);
    let h = data.u0.grid().h();
    let allowed = rhs * (1.0 + REL_SLACK) + config.c_reg * (h + config.tau);
    for ((t, u1), u2) in a.times().iter().zip(a.states()).zip(b.states()) {
        report.check_row(vec![*t], u1.sub(u2)?.lr_norm(r), allowed);
    }
    Ok(report)
}

/// The three integrals of the parabolic Gagliardo–Nirenberg inequality in
/// two dimensions, applied to `G_k u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnTerms {
    /// `∫_0^T ∫ |G_k u|^{3/2}`.
    pub lhs: f64,
    /// `sup_t ∫ |G_k u|`.
    pub sup_mass: f64,
    /// `∫_0^T (∫|D G_k u| + ∫_∂ |G_k u|)`.
    pub tv: f64,
}

impl GnTerms {
    /// `lhs / (sup_mass^{1/2} · tv)`; `None` when every term vanishes.
    pub fn ratio(&self) -> Option<f64> {
        if self.lhs == 0.0 {
            return None;
        }
        assert!(
            self.tv > 0.0 && self.sup_mass > 0.0,
            "nonzero G_k u with vanishing total variation"
        );
        Some(self.lhs / (self.sup_mass.sqrt() * self.tv))
    }
}

/// Time integrals use the states at the right end of each snapshot
/// interval.
pub fn gn_terms(traj: &Trajectory<f64>, k: f64) -> Result<GnTerms> {
    gn_terms_of(traj.times(), traj.states(), k)
}

fn gn_terms_of(times: &[f64], states: &[ScalarField<f64>], k: f64) -> Result<GnTerms> {
    if !(k >= 0.0) {
        return Err(Error::InvalidLevel(k));
    }
    let mut terms = GnTerms {
        lhs: 0.0,
        sup_mass: 0.0,
        tv: 0.0,
    };
    for (i, u) in states.iter().enumerate() {
        let g = u.map(|s| s - s.max(-k).min(k));
        terms.sup_mass = terms.sup_mass.max(g.l1_norm());
        if i == 0 {
            continue;
        }
        let dt = times[i] - times[i - 1];
        terms.lhs += dt * g.lr_norm(1.5).powf(1.5);
        terms.tv += dt * tv(&g, TvOptions::default());
    }
    Ok(terms)
}

/// Ratios over a refinement sequence, coarse to fine; fails when a ratio
/// grows by more than `config.gn_growth` from one level to the next.
pub fn gn_check(
    trajs: &[&Trajectory<f64>],
    k: f64,
    config: &LabConfig,
) -> Result<ExperimentReport> {
    let mut d = InputDigest::new("gn").num("k", k);
    for t in trajs {
        d = d.field("u0", &t.ladder().u0).num("tau", t.tau());
    }
    let mut report = ExperimentReport::new("gn", d.finish(), &["h", "ratio", "allowed"]);
    let mut ratios = Vec::new();
    let mut prev: Option<f64> = None;
    for t in trajs {
        let h = t.grid().h();
        match gn_terms(t, k)?.ratio() {
            None => report.check_row(vec![h], 0.0, MARGIN_SENTINEL),
            Some(q) => {
                let allowed = prev.map_or(MARGIN_SENTINEL, |p| config.gn_growth * p);
                report.check_row(vec![h], q, allowed);
                ratios.push(q);
                prev = Some(q);
            }
        }
    }
    if ratios.len() > 1 {
        report.trend = Some(Trend::new(ratios));
    }
    Ok(report)
}

/// `sup_t ‖u(t)‖_∞ ≤ ‖u0‖_∞ + T‖f‖_∞ + 1e-8`.
pub fn boundedness_check(traj: &Trajectory<f64>, f: &Source<f64>) -> Result<ExperimentReport> {
    traj.grid().check_same(f.grid())?;
    let u0 = &traj.ladder().u0;
    let digest = InputDigest::new("boundedness")
        .field("u0", u0)
        .source("f", f)
        .num("tau", traj.tau())
        .finish();
    let mut report = ExperimentReport::new("boundedness", digest, &["t", "sup_norm", "bound"]);
    let final_time = *traj.times().last().expect("nonempty trajectory");
    let bound = u0.sup_norm() + final_time * f.sup_norm() + 1e-8;
    for (t, u) in traj.times().iter().zip(traj.states()) {
        report.check_row(vec![*t], u.sup_norm(), bound);
    }
    Ok(report)
}

/// Distance between the proximal path and the p-Laplacian continuation
/// ending at `p_min = p_schedule.last()`, against `c_uni·(h + τ + p_min − 1)`.
pub fn uniqueness_proxy(
    data: &ProblemData,
    config: &LabConfig,
    p_schedule: &[f64],
    plap: PlapOptions<f64>,
) -> Result<ExperimentReport> {
    let p_min = *p_schedule
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty p schedule".into()))?;
    let mut d = data.digest(base_digest("uniqueness", config), "data");
    for p in p_schedule {
        d = d.num("p", *p);
    }
    let digest = d
        .num("eps_reg", plap.eps_reg)
        .num("c_uni", config.c_uni)
        .finish();
    let mut report = ExperimentReport::new("uniqueness", digest, &["t", "l1_distance", "tol"]);
    let solve = config.solve(data.u0.clone(), Some(&data.f));
    let rof = evolve(&solve)?;
    let cont = p_continuation(&solve, p_schedule, plap)?;
    // fails loudly if the two paths were sampled differently
    rof.max_l1_distance(&cont.trajectory)?;
    let h = data.u0.grid().h();
    let tol = config.c_uni * (h + config.tau + (p_min - 1.0));
    for ((t, a), b) in rof
        .times()
        .iter()
        .zip(rof.states())
        .zip(cont.trajectory.states())
    {
        report.check_row(vec![*t], a.sub(b)?.l1_norm(), tol);
    }
    Ok(report)
}
