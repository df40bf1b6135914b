//! Clause-by-clause residuals of the entropy formulation on discrete
//! trajectories, plus the energy and chain-rule identities.
//!
//! All time derivatives are backward differences over consecutive steps,
//! so every check needs a trajectory recorded at every step. Step `m`
//! (time `mτ`) pairs the states `u_m`, `u_{m−1}` with the dual `z_m` and
//! the source slice of `[(m−1)τ, mτ]`.

use crate::calculus::{
    boundary_flux, boundary_trace, divergence, interior_pairing, pairing, tv, TvOptions,
};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::scalar::Real;
use crate::solver::{evolve, step_slice, LadderLevel, SolveConfig, Source, Trajectory};
use crate::truncation::{clamp_level, primitive};

/// Slack on `|φ| > 0` faces when checking `[z_φ, ν] sign(φ) <= 0`, and on
/// the pairing identity of hand-made pairs.
pub const PAIR_TOL: f64 = 1e-8;

/// Constant of the entropy residual tolerance `C_TOL·(h + τ)`.
pub const C_TOL: f64 = 0.1;

fn check_level<T: Real>(k: T) -> Result<()> {
    if k > T::zero() && k.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidLevel(k.as_f64()))
    }
}

fn require_every_step<T: Real>(u: &Trajectory<T>) -> Result<()> {
    if u.len() >= 2 && u.is_every_step() {
        Ok(())
    } else {
        Err(Error::TimeGridMismatch(
            "residuals need a trajectory recorded at every step from t = 0".into(),
        ))
    }
}

fn same_time_grid<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<()> {
    a.grid().check_same(b.grid())?;
    let tol = T::lit(1e-9) * a.tau();
    if a.len() != b.len()
        || (a.tau() - b.tau()).abs() > tol
        || a.times()
            .iter()
            .zip(b.times())
            .any(|(x, y)| (*x - *y).abs() > tol)
    {
        return Err(Error::TimeGridMismatch(format!(
            "{} snapshots at tau {} vs {} at tau {}",
            a.len(),
            a.tau(),
            b.len(),
            b.tau()
        )));
    }
    Ok(())
}

fn integral_jk<T: Real>(k: T, u: &ScalarField<T>) -> T {
    u.values().iter().map(|&s| primitive(k, s)).sum::<T>() * u.grid().cell_area()
}

fn truncate<T: Real>(k: T, u: &ScalarField<T>) -> ScalarField<T> {
    u.map(|s| clamp_level(k, s))
}

/// A test function `φ` with its vector field `z_φ`, and the regular data
/// `(g, v0)` it solves.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPair<T> {
    pub phi: Trajectory<T>,
    pub g: Source<T>,
    pub v0: ScalarField<T>,
}

/// Solves the flow for bounded data `(g, v0)` on the time grid of
/// `template`, without ladder.
pub fn make_test_pair<T: Real>(
    g: &Source<T>,
    v0: &ScalarField<T>,
    template: &SolveConfig<T>,
) -> Result<TestPair<T>> {
    if !(g.sup_norm().is_finite() && v0.sup_norm().is_finite()) {
        return Err(Error::InvalidArgument(
            "test-pair data must be bounded".into(),
        ));
    }
    let mut cfg = template.clone();
    cfg.f = g.clone();
    cfg.u0 = v0.clone();
    cfg.ladder = LadderLevel::None;
    let phi = evolve(&cfg)?;
    Ok(TestPair {
        phi,
        g: g.clone(),
        v0: v0.clone(),
    })
}

impl<T: Real> TestPair<T> {
    /// Accepts a hand-made `(φ, z_φ)` only if, at every recorded time after
    /// the start, `z_φ` is in the unit ball (enforced by [`Trajectory`]),
    /// `(z_φ, Dφ) = |Dφ|` to [`PAIR_TOL`] relative, and the boundary
    /// normal component has the sign of `-φ`.
    pub fn from_parts(phi: Trajectory<T>, g: Source<T>, v0: ScalarField<T>) -> Result<Self> {
        require_every_step(&phi)?;
        let tol = T::lit(PAIR_TOL);
        for (m, (s, z)) in phi.states().iter().zip(phi.duals()).enumerate().skip(1) {
            let d = divergence(z)?;
            if !d.l2_norm().is_finite() {
                return Err(Error::InvalidInputs(format!(
                    "div z_phi not finite at step {m}"
                )));
            }
            let t = tv(s, TvOptions::default());
            let p = pairing(z, s)?;
            if (t - p).abs() > tol * t.max(T::one()) {
                return Err(Error::InvalidInputs(format!(
                    "pairing identity fails at step {m}: tv {t} vs pairing {p}"
                )));
            }
            for (f, zn) in boundary_trace(z).iter() {
                let v = s.get(f.i, f.j);
                if v != T::zero() && zn * v.signum() > tol {
                    return Err(Error::InvalidInputs(format!(
                        "boundary sign fails at step {m}, cell ({}, {})",
                        f.i, f.j
                    )));
                }
            }
        }
        Ok(Self { phi, g, v0 })
    }
}

/// Residual `LHS − RHS` of the entropy inequality per step:
///
/// ```text
/// (∫J_k(u−φ))' + ∫φ' T_k(u−φ) + (z_φ, DT_k(u−φ)) − ∫_∂ T_k(u−φ)[z_φ,ν] − ∫f T_k(u−φ)
/// ```
///
/// with the pairing over interior faces and the boundary integral over
/// ghost faces. Entry `m − 1` belongs to time `mτ`.
pub fn entropy_residual<T: Real>(
    u: &Trajectory<T>,
    f: &Source<T>,
    pair: &TestPair<T>,
    k: T,
) -> Result<Vec<T>> {
    check_level(k)?;
    require_every_step(u)?;
    same_time_grid(u, &pair.phi)?;
    let tau = u.tau();
    let us = u.states();
    let ps = pair.phi.states();
    let mut out = Vec::with_capacity(u.len() - 1);
    let mut j_prev = integral_jk(k, &us[0].sub(&ps[0])?);
    for m in 1..u.len() {
        let a = us[m].sub(&ps[m])?;
        let tk = truncate(k, &a);
        let j_now = integral_jk(k, &a);
        let dphi = ps[m].sub(&ps[m - 1])?.scale(T::one() / tau);
        let z = &pair.phi.duals()[m];
        let fm = step_slice(f, tau, m);
        let lhs = (j_now - j_prev) / tau + dphi.dot(&tk)? + interior_pairing(z, &tk)?
            - boundary_flux(z, &tk)?;
        out.push(lhs - fm.dot(&tk)?);
        j_prev = j_now;
    }
    Ok(out)
}

/// `|LHS − RHS|` of the energy identity
/// `(∫J_k(u))' + ∫|DT_k u| + ∫_∂|T_k u| = ∫T_k(u) f` per step.
pub fn energy_identity_residual<T: Real>(u: &Trajectory<T>, f: &Source<T>, k: T) -> Result<Vec<T>> {
    check_level(k)?;
    require_every_step(u)?;
    let tau = u.tau();
    let us = u.states();
    let mut out = Vec::with_capacity(u.len() - 1);
    let mut j_prev = integral_jk(k, &us[0]);
    for (m, s) in us.iter().enumerate().skip(1) {
        let tk = truncate(k, s);
        let j_now = integral_jk(k, s);
        let fm = step_slice(f, tau, m);
        let lhs = (j_now - j_prev) / tau + tv(&tk, TvOptions::default());
        out.push((lhs - fm.dot(&tk)?).abs());
        j_prev = j_now;
    }
    Ok(out)
}

/// `|Δ∫J_k(u)/τ − ∫T_k(u) u'|` per step, `u'` the backward difference.
pub fn chain_rule_residual<T: Real>(u: &Trajectory<T>, k: T) -> Result<Vec<T>> {
    check_level(k)?;
    require_every_step(u)?;
    let tau = u.tau();
    let us = u.states();
    let mut out = Vec::with_capacity(u.len() - 1);
    for m in 1..us.len() {
        let dj = (integral_jk(k, &us[m]) - integral_jk(k, &us[m - 1])) / tau;
        let du = us[m].sub(&us[m - 1])?.scale(T::one() / tau);
        out.push((dj - truncate(k, &us[m]).dot(&du)?).abs());
    }
    Ok(out)
}

pub fn mean<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        T::zero()
    } else {
        xs.iter().copied().sum::<T>() / T::from_usize_lossy(xs.len())
    }
}

/// Diagnostics of the vector field at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldDiagnostics<T> {
    pub time: T,
    /// `max(0, sup|z| − 1)`.
    pub zbound_excess: T,
    /// `tv(T_k u) − (z, DT_k u)`, boundary jumps included on both sides.
    pub pairing_gap: T,
    /// `‖u' − div z − f‖_1`.
    pub flux_residual_norm: T,
    /// `Σ_∂ h max(0, |u| − δ_b) |[z,ν] + sign(u)|`.
    pub boundary_violation: T,
}

/// Activation threshold of the boundary sign check on a grid of spacing `h`.
pub fn boundary_threshold<T: Real>(h: T) -> T {
    T::lit(10.0) * h
}

/// Per-step diagnostics of the dual fields of `u`.
pub fn vector_field_report<T: Real>(
    u: &Trajectory<T>,
    f: &Source<T>,
    k: T,
) -> Result<Vec<FieldDiagnostics<T>>> {
    check_level(k)?;
    require_every_step(u)?;
    let tau = u.tau();
    let h = u.grid().h();
    let delta = boundary_threshold(h);
    let us = u.states();
    let mut out = Vec::with_capacity(u.len() - 1);
    for m in 1..u.len() {
        let z = &u.duals()[m];
        let s = &us[m];
        let tk = truncate(k, s);
        let pairing_gap = tv(&tk, TvOptions::default()) - pairing(z, &tk)?;
        let du = s.sub(&us[m - 1])?.scale(T::one() / tau);
        let flux = du
            .sub(&divergence(z)?)?
            .sub(&step_slice(f, tau, m))?
            .l1_norm();
        let mut bv = T::zero();
        for (face, zn) in boundary_trace(z).iter() {
            let v = s.get(face.i, face.j);
            let act = v.abs() - delta;
            if act > T::zero() {
                bv += act * (zn + v.signum()).abs();
            }
        }
        out.push(FieldDiagnostics {
            time: u.times()[m],
            zbound_excess: (z.max_norm() - T::one()).max(T::zero()),
            pairing_gap,
            flux_residual_norm: flux,
            boundary_violation: bv * h,
        });
    }
    Ok(out)
}

/// One row per `(t, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow<T> {
    pub time: T,
    pub k: T,
    pub entropy_residual: T,
    pub energy_residual: T,
    pub chain_rule_residual: T,
    pub pairing_gap: T,
    pub flux_residual_norm: T,
    pub boundary_violation: T,
    pub zbound_excess: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport<T> {
    pub nx: usize,
    pub ny: usize,
    pub h: T,
    pub tau: T,
    pub rows: Vec<ReportRow<T>>,
}

pub const REPORT_HEADER: &str = "t,k,entropy_residual,energy_residual,chain_rule_residual,\
pairing_gap,flux_residual_norm,boundary_violation,zbound_excess";

impl<T: Real> EntropyReport<T> {
    pub fn rows_for(&self, k: T) -> impl Iterator<Item = &ReportRow<T>> {
        self.rows.iter().filter(move |r| r.k == k)
    }

    /// Time average of the pairing gap at level `k`.
    pub fn mean_pairing_gap(&self, k: T) -> T {
        let v: Vec<T> = self.rows_for(k).map(|r| r.pairing_gap).collect();
        mean(&v)
    }

    pub fn max_entropy_residual(&self) -> T {
        self.rows
            .iter()
            .fold(T::neg_infinity(), |m, r| m.max(r.entropy_residual))
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# nx={} ny={} h={} tau={}\n{REPORT_HEADER}\n",
            self.nx, self.ny, self.h, self.tau
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                r.time,
                r.k,
                r.entropy_residual,
                r.energy_residual,
                r.chain_rule_residual,
                r.pairing_gap,
                r.flux_residual_norm,
                r.boundary_violation,
                r.zbound_excess
            ));
        }
        s
    }
}

/// All residuals of `u` against `pair` at each level of `ks`.
pub fn entropy_report<T: Real>(
    u: &Trajectory<T>,
    f: &Source<T>,
    pair: &TestPair<T>,
    ks: &[T],
) -> Result<EntropyReport<T>> {
    let mut rows = Vec::new();
    for &k in ks {
        let ent = entropy_residual(u, f, pair, k)?;
        let en = energy_identity_residual(u, f, k)?;
        let ch = chain_rule_residual(u, k)?;
        let vf = vector_field_report(u, f, k)?;
        for i in 0..ent.len() {
            rows.push(ReportRow {
                time: vf[i].time,
                k,
                entropy_residual: ent[i],
                energy_residual: en[i],
                chain_rule_residual: ch[i],
                pairing_gap: vf[i].pairing_gap,
                flux_residual_norm: vf[i].flux_residual_norm,
                boundary_violation: vf[i].boundary_violation,
                zbound_excess: vf[i].zbound_excess,
            });
        }
    }
    Ok(EntropyReport {
        nx: u.grid().nx(),
        ny: u.grid().ny(),
        h: u.grid().h(),
        tau: u.tau(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_field, Shape};
    use crate::grid::Grid2D;

    fn disk_run(n: usize) -> Trajectory<f64> {
        let g = Grid2D::unit_square(n).unwrap();
        let u0 = make_field(&g, &Shape::disk(0.5, 0.5, 0.25, 1.0)).unwrap();
        evolve(&SolveConfig::new(u0, 0.04, 4e-3)).unwrap()
    }

    #[test]
    fn zero_trajectory_has_zero_residuals() {
        let g = Grid2D::<f64>::unit_square(8).unwrap();
        let cfg = SolveConfig::new(ScalarField::zeros(&g), 0.03, 0.01);
        let u = evolve(&cfg).unwrap();
        let pair = make_test_pair(&Source::zero(&g), &ScalarField::zeros(&g), &cfg).unwrap();
        let rep = entropy_report(&u, u.source(), &pair, &[0.5, 1.0]).unwrap();
        assert_eq!(rep.rows.len(), 6);
        for r in &rep.rows {
            assert_eq!(r.entropy_residual, 0.0);
            assert_eq!(r.energy_residual, 0.0);
            assert_eq!(r.pairing_gap, 0.0);
            assert_eq!(r.flux_residual_norm, 0.0);
            assert_eq!(r.boundary_violation, 0.0);
        }
    }

    #[test]
    fn self_test_vanishes() {
        let u = disk_run(24);
        let pair = TestPair {
            phi: u.clone(),
            g: u.source().clone(),
            v0: u.states()[0].clone(),
        };
        for k in [0.25, 1.0] {
            let r = entropy_residual(&u, u.source(), &pair, k).unwrap();
            assert!(r.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn flux_identity_and_unit_ball_on_solver_output() {
        let u = disk_run(24);
        for d in vector_field_report(&u, u.source(), 0.5).unwrap() {
            assert!(d.flux_residual_norm <= 1e-10);
            assert!(d.zbound_excess <= 1e-10);
            assert!(d.pairing_gap >= -1e-10);
        }
    }

    #[test]
    fn chain_rule_reduces_to_quadratic_branch() {
        let u = disk_run(16);
        let big = chain_rule_residual(&u, 10.0).unwrap();
        let tau = u.tau();
        for (m, r) in big.iter().enumerate() {
            let (a, b) = (&u.states()[m + 1], &u.states()[m]);
            let d = (0.5 * a.dot(a).unwrap() - 0.5 * b.dot(b).unwrap()) / tau
                - a.dot(&a.sub(b).unwrap().scale(1.0 / tau)).unwrap();
            assert!((r - d.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn idle_truncation_gives_identical_energy_series() {
        let u = disk_run(16);
        let a = energy_identity_residual(&u, u.source(), 1.5).unwrap();
        let b = energy_identity_residual(&u, u.source(), 3.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dissipation_terms_are_nonnegative() {
        let u = disk_run(16);
        for s in &u.states()[1..] {
            let t = tv(&truncate(0.5, s), TvOptions::default());
            assert!(t >= 0.0);
        }
    }

    #[test]
    fn mismatched_time_grids_are_rejected() {
        let u = disk_run(16);
        let g = u.grid().clone();
        let cfg = SolveConfig::new(ScalarField::zeros(&g), 0.04, 2e-3);
        let pair = make_test_pair(&Source::zero(&g), &ScalarField::zeros(&g), &cfg).unwrap();
        assert!(matches!(
            entropy_residual(&u, u.source(), &pair, 1.0),
            Err(Error::TimeGridMismatch(_))
        ));
    }

    #[test]
    fn hand_made_pairs_are_checked() {
        let u = disk_run(16);
        // a solver trajectory is only certified to the inner gap
        let bad = TestPair::from_parts(u.clone(), u.source().clone(), u.states()[0].clone());
        assert!(matches!(bad, Err(Error::InvalidInputs(_))));
        let g = u.grid().clone();
        let zero = evolve(&SolveConfig::new(ScalarField::zeros(&g), 0.04, 4e-3)).unwrap();
        assert!(TestPair::from_parts(zero, Source::zero(&g), ScalarField::zeros(&g)).is_ok());
    }
}
