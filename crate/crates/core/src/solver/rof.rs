//! One implicit Euler step of the total variation flow:
//!
//! ```text
//! u_next = argmin_v  tv(v) + (1 / 2τ) ‖v − w‖²,    w = u + τ f
//! ```
//!
//! solved on the dual side, `v = w + τ div z` with `|z| <= 1` per extended
//! cell, and stopped by the relative duality gap `tv(v) − (z, Dv)`.

use crate::calculus::{divergence, gradient};
use crate::error::{Error, Result};
use crate::field::{ScalarField, Staggering, VectorField};
use crate::grid::Grid2D;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerMethod {
    /// Nesterov-accelerated projected ascent with adaptive restart.
    #[default]
    Accelerated,
    /// Plain projected ascent.
    Projected,
}

impl InnerMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            InnerMethod::Accelerated => "accelerated",
            InnerMethod::Projected => "projected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions<T> {
    pub max_iters: usize,
    /// Stop once `gap / max(1, primal) <= gap_tol`.
    pub gap_tol: T,
    /// Ascent step; `h² / (8τ)` when unset.
    pub dual_step: Option<T>,
    pub method: InnerMethod,
    /// Iterations between two gap evaluations.
    pub check_every: usize,
}

impl<T: Real> Default for InnerOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            gap_tol: T::lit(1e-6),
            dual_step: None,
            method: InnerMethod::Accelerated,
            check_every: 10,
        }
    }
}

impl<T: Real> InnerOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol > T::zero()) {
            return Err(Error::InvalidArgument("inner gap_tol must be > 0".into()));
        }
        if self.max_iters == 0 || self.check_every == 0 {
            return Err(Error::InvalidArgument(
                "inner max_iters and check_every must be >= 1".into(),
            ));
        }
        if let Some(s) = self.dual_step {
            if !(s > T::zero() && s.is_finite()) {
                return Err(Error::InvalidArgument("inner dual_step must be > 0".into()));
            }
        }
        Ok(())
    }

    /// Step size used on a grid of spacing `h` with time step `tau`.
    pub fn step_for(&self, h: T, tau: T) -> T {
        self.dual_step.unwrap_or(h * h / (T::lit(8.0) * tau))
    }
}

/// Outcome of one proximal step. When `converged` is false the fields hold
/// the last iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct RofStep<T> {
    pub u_next: ScalarField<T>,
    /// Optimal dual field, unit-ball flagged, on the extended layout.
    pub z: VectorField<T>,
    /// Relative duality gap of `(u_next, z)`.
    pub gap: T,
    pub iters: usize,
    pub converged: bool,
}

/// Absolute and relative duality gap of the pair `(z, v)` for the step
/// with data `w`. Requires `|z| <= 1`; the absolute gap is then a sum of
/// nonnegative terms `h² (|∇v| − z·∇v)`.
pub fn duality_gap<T: Real>(
    z: &VectorField<T>,
    v: &ScalarField<T>,
    w: &ScalarField<T>,
    tau: T,
) -> Result<(T, T)> {
    z.grid().check_same(v.grid())?;
    v.grid().check_same(w.grid())?;
    let gv = gradient(v);
    let mut gap = T::zero();
    let mut tv = T::zero();
    for e in 0..gv.xs().len() {
        let (gx, gy) = (gv.xs()[e], gv.ys()[e]);
        let n = (gx * gx + gy * gy).sqrt();
        tv += n;
        gap += n - (z.xs()[e] * gx + z.ys()[e] * gy);
    }
    let h2 = v.grid().cell_area();
    let fid = v.sub(w)?.values().iter().map(|&d| d * d).sum::<T>();
    let primal = tv * h2 + fid * h2 / (T::lit(2.0) * tau);
    let gap = gap * h2;
    Ok((gap, gap / primal.max(T::one())))
}

/// Flat-array kernel. Cells live in a zero-padded `(nx + 2) × (ny + 2)`
/// array so that extended entry `(a, b)` and padded cell `(a, b)` share an
/// index shape and every forward difference is branch free.
struct Kernel<T> {
    nx: usize,
    ny: usize,
    h: T,
    inv_h: T,
    inside: Option<Vec<bool>>,
    w: Vec<T>,
}

impl<T: Real> Kernel<T> {
    fn new(w: &ScalarField<T>) -> Self {
        let g = w.grid();
        let (nx, ny) = (g.nx(), g.ny());
        let pw = nx + 2;
        let mut wp = vec![T::zero(); pw * (ny + 2)];
        for j in 0..ny {
            for i in 0..nx {
                wp[(j + 1) * pw + i + 1] = w.get(i, j);
            }
        }
        Self {
            nx,
            ny,
            h: g.h(),
            inv_h: T::one() / g.h(),
            inside: g.mask().map(<[bool]>::to_vec),
            w: wp,
        }
    }

    /// `v = w + τ div z` on inside cells.
    fn primal(&self, zx: &[T], zy: &[T], tau: T, v: &mut [T]) {
        let (ew, pw) = (self.nx + 1, self.nx + 2);
        let c = tau * self.inv_h;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let p = (j + 1) * pw + i + 1;
                if let Some(m) = &self.inside {
                    if !m[j * self.nx + i] {
                        continue;
                    }
                }
                let e = (j + 1) * ew + i + 1;
                v[p] = self.w[p] + c * (zx[e] - zx[e - 1] + zy[e] - zy[e - ew]);
            }
        }
    }

    /// `dst = P(src + s ∇v)` with `P` the per-entry projection on the unit disk.
    fn ascent(&self, v: &[T], s: T, src: (&[T], &[T]), dst: (&mut [T], &mut [T])) {
        let (ew, pw) = (self.nx + 1, self.nx + 2);
        let c = s * self.inv_h;
        let (sx, sy) = src;
        let (dx, dy) = dst;
        for b in 0..=self.ny {
            let (erow, prow) = (b * ew, b * pw);
            for a in 0..=self.nx {
                let (e, p) = (erow + a, prow + a);
                let x = sx[e] + c * (v[p + 1] - v[p]);
                let y = sy[e] + c * (v[p + pw] - v[p]);
                let n2 = x * x + y * y;
                if n2 > T::one() {
                    let r = T::one() / n2.sqrt();
                    dx[e] = x * r;
                    dy[e] = y * r;
                } else {
                    dx[e] = x;
                    dy[e] = y;
                }
            }
        }
    }

    /// Relative duality gap of `(z, v)`.
    fn gap(&self, zx: &[T], zy: &[T], v: &[T], tau: T) -> T {
        let (ew, pw) = (self.nx + 1, self.nx + 2);
        let mut gap = T::zero();
        let mut tv = T::zero();
        for b in 0..=self.ny {
            for a in 0..=self.nx {
                let (e, p) = (b * ew + a, b * pw + a);
                let gx = (v[p + 1] - v[p]) * self.inv_h;
                let gy = (v[p + pw] - v[p]) * self.inv_h;
                let n = (gx * gx + gy * gy).sqrt();
                tv += n;
                gap += n - (zx[e] * gx + zy[e] * gy);
            }
        }
        let fid = v
            .iter()
            .zip(&self.w)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>();
        let h2 = self.h * self.h;
        let primal = tv * h2 + fid * h2 / (T::lit(2.0) * tau);
        gap * h2 / primal.max(T::one())
    }
}

/// Proximal stepper that keeps its dual field between calls, so consecutive
/// steps of one trajectory start from the previous optimum.
#[derive(Debug, Clone)]
pub struct RofSolver<T> {
    grid: Grid2D<T>,
    opts: InnerOptions<T>,
    zx: Vec<T>,
    zy: Vec<T>,
}

impl<T: Real> RofSolver<T> {
    pub fn new(grid: &Grid2D<T>, opts: InnerOptions<T>) -> Result<Self> {
        opts.validate()?;
        let n = (grid.nx() + 1) * (grid.ny() + 1);
        Ok(Self {
            grid: grid.clone(),
            opts,
            zx: vec![T::zero(); n],
            zy: vec![T::zero(); n],
        })
    }

    pub fn options(&self) -> &InnerOptions<T> {
        &self.opts
    }

    /// Forgets the warm-start dual field.
    pub fn reset(&mut self) {
        self.zx.iter_mut().for_each(|v| *v = T::zero());
        self.zy.iter_mut().for_each(|v| *v = T::zero());
    }

    /// One step from `u` with source slice `f`.
    pub fn step(&mut self, u: &ScalarField<T>, f: &ScalarField<T>, tau: T) -> Result<RofStep<T>> {
        let w = u.axpy(tau, f)?;
        self.prox(&w, tau)
    }

    /// The proximal map of `τ tv` at `w`.
    pub fn prox(&mut self, w: &ScalarField<T>, tau: T) -> Result<RofStep<T>> {
        self.grid.check_same(w.grid())?;
        if !(tau > T::zero() && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tau must be > 0, got {tau}"
            )));
        }
        let k = Kernel::new(w);
        let s = self.opts.step_for(k.h, tau);
        let len = self.zx.len();
        let mut v = vec![T::zero(); (k.nx + 2) * (k.ny + 2)];
        let mut iters = 0;

        k.primal(&self.zx, &self.zy, tau, &mut v);
        let mut gap = k.gap(&self.zx, &self.zy, &v, tau);
        if gap > self.opts.gap_tol {
            match self.opts.method {
                InnerMethod::Projected => {
                    let mut nx_ = vec![T::zero(); len];
                    let mut ny_ = vec![T::zero(); len];
                    while iters < self.opts.max_iters {
                        k.ascent(&v, s, (&self.zx, &self.zy), (&mut nx_, &mut ny_));
                        std::mem::swap(&mut self.zx, &mut nx_);
                        std::mem::swap(&mut self.zy, &mut ny_);
                        iters += 1;
                        k.primal(&self.zx, &self.zy, tau, &mut v);
                        if iters % self.opts.check_every == 0 {
                            gap = k.gap(&self.zx, &self.zy, &v, tau);
                            if gap <= self.opts.gap_tol {
                                break;
                            }
                        }
                    }
                }
                InnerMethod::Accelerated => {
                    let mut yx = self.zx.clone();
                    let mut yy = self.zy.clone();
                    let mut nx_ = vec![T::zero(); len];
                    let mut ny_ = vec![T::zero(); len];
                    let mut t = T::one();
                    let mut vy = v.clone();
                    while iters < self.opts.max_iters {
                        k.ascent(&vy, s, (&yx, &yy), (&mut nx_, &mut ny_));
                        iters += 1;
                        let t_next =
                            (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) * T::lit(0.5);
                        // restart when the step points against the momentum
                        let mut dot = T::zero();
                        for e in 0..len {
                            dot += (yx[e] - nx_[e]) * (nx_[e] - self.zx[e])
                                + (yy[e] - ny_[e]) * (ny_[e] - self.zy[e]);
                        }
                        let beta = if dot > T::zero() {
                            t = T::one();
                            T::zero()
                        } else {
                            let b = (t - T::one()) / t_next;
                            t = t_next;
                            b
                        };
                        for e in 0..len {
                            yx[e] = nx_[e] + beta * (nx_[e] - self.zx[e]);
                            yy[e] = ny_[e] + beta * (ny_[e] - self.zy[e]);
                        }
                        std::mem::swap(&mut self.zx, &mut nx_);
                        std::mem::swap(&mut self.zy, &mut ny_);
                        k.primal(&yx, &yy, tau, &mut vy);
                        if iters % self.opts.check_every == 0 {
                            k.primal(&self.zx, &self.zy, tau, &mut v);
                            gap = k.gap(&self.zx, &self.zy, &v, tau);
                            if gap <= self.opts.gap_tol {
                                break;
                            }
                        }
                    }
                }
            }
        }

        let z = VectorField::from_components(
            &self.grid,
            Staggering::Extended,
            self.zx.clone(),
            self.zy.clone(),
        )?
        .flag_unit_ball();
        let u_next = w.axpy(tau, &divergence(&z)?)?;
        let (_, gap) = duality_gap(&z, &u_next, w, tau)?;
        Ok(RofStep {
            u_next,
            z,
            gap,
            iters,
            converged: gap <= self.opts.gap_tol,
        })
    }
}

/// One cold-started step: `argmin_v tv(v) + ‖v − (u + τ f)‖² / 2τ`.
pub fn rof_step<T: Real>(
    u: &ScalarField<T>,
    f: &ScalarField<T>,
    tau: T,
    inner: InnerOptions<T>,
) -> Result<RofStep<T>> {
    RofSolver::new(u.grid(), inner)?.step(u, f, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{tv, TvOptions};
    use crate::field::{make_field, Shape};

    fn tight() -> InnerOptions<f64> {
        InnerOptions {
            gap_tol: 1e-10,
            max_iters: 200_000,
            ..InnerOptions::default()
        }
    }

    #[test]
    fn zero_data_is_fixed() {
        let g = Grid2D::unit_square(8).unwrap();
        let z = ScalarField::zeros(&g);
        let r = rof_step(&z, &z, 0.01, InnerOptions::default()).unwrap();
        assert_eq!(r.iters, 0);
        assert_eq!(r.gap, 0.0);
        assert!(r.converged);
        assert!(r.u_next.values().iter().all(|&v| v == 0.0));
        assert_eq!(r.z.max_norm(), 0.0);
    }

    #[test]
    fn both_methods_reach_the_same_minimizer() {
        let g = Grid2D::unit_square(16).unwrap();
        let u = make_field(&g, &Shape::random(3)).unwrap();
        let f = ScalarField::zeros(&g);
        let a = rof_step(&u, &f, 0.01, tight()).unwrap();
        let p = rof_step(
            &u,
            &f,
            0.01,
            InnerOptions {
                method: InnerMethod::Projected,
                ..tight()
            },
        )
        .unwrap();
        assert!(a.converged && p.converged);
        let d = a.u_next.sub(&p.u_next).unwrap().l2_norm();
        assert!(d < 1e-5, "distance {d}");
    }

    #[test]
    fn certificate_and_flux_identity() {
        let g = Grid2D::unit_square(24).unwrap();
        let u = make_field(&g, &Shape::disk(0.5, 0.5, 0.25, 1.0)).unwrap();
        let f = make_field(&g, &Shape::random(1)).unwrap();
        let tau = 2e-3;
        let r = rof_step(&u, &f, tau, InnerOptions::default()).unwrap();
        assert!(r.converged && r.gap <= 1e-6);
        assert!(r.z.max_norm() <= 1.0 + 1e-10);
        let w = u.axpy(tau, &f).unwrap();
        let div = divergence(&r.z).unwrap();
        let resid = r.u_next.sub(&w).unwrap().axpy(-tau, &div).unwrap();
        assert!(resid.sup_norm() <= 1e-12);
        assert!(r.u_next.sup_norm() <= w.sup_norm() + 1e-10);
    }

    #[test]
    fn dissipates_tv_and_l2() {
        let g = Grid2D::unit_square(16).unwrap();
        let u = make_field(&g, &Shape::random(5)).unwrap();
        let r = rof_step(&u, &ScalarField::zeros(&g), 0.005, tight()).unwrap();
        let o = TvOptions::default();
        assert!(tv(&r.u_next, o) <= tv(&u, o));
        assert!(r.u_next.l2_norm() <= u.l2_norm());
    }

    #[test]
    fn warm_start_is_cheaper() {
        let g = Grid2D::unit_square(32).unwrap();
        let u = make_field(&g, &Shape::disk(0.5, 0.5, 0.25, 1.0)).unwrap();
        let f = ScalarField::zeros(&g);
        let mut s = RofSolver::new(&g, InnerOptions::default()).unwrap();
        let first = s.step(&u, &f, 2e-3).unwrap();
        let second = s.step(&first.u_next, &f, 2e-3).unwrap();
        assert!(second.iters < first.iters);
    }

    #[test]
    fn reports_non_convergence() {
        let g = Grid2D::unit_square(16).unwrap();
        let u = make_field(&g, &Shape::random(2)).unwrap();
        let r = rof_step(
            &u,
            &ScalarField::zeros(&g),
            0.01,
            InnerOptions {
                max_iters: 3,
                ..InnerOptions::default()
            },
        )
        .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iters, 3);
        assert!(r.gap > 1e-6);
    }

    #[test]
    fn rejects_bad_options() {
        let g = Grid2D::unit_square(4).unwrap();
        let z = ScalarField::zeros(&g);
        let bad = InnerOptions {
            gap_tol: 0.0,
            ..InnerOptions::default()
        };
        assert!(rof_step(&z, &z, 0.1, bad).is_err());
        assert!(rof_step(&z, &z, -0.1, InnerOptions::default()).is_err());
    }

    #[test]
    fn single_precision_runs() {
        let g = Grid2D::<f32>::unit_square(16).unwrap();
        let u = make_field(&g, &Shape::disk(0.5, 0.5, 0.25, 1.0)).unwrap();
        let r = rof_step(
            &u,
            &ScalarField::zeros(&g),
            0.01f32,
            InnerOptions {
                gap_tol: 1e-4,
                ..InnerOptions::default()
            },
        )
        .unwrap();
        assert!(r.converged);
        assert!(r.z.max_norm() <= 1.0 + 1e-6);
    }

    #[test]
    fn isotropic_step_is_not_order_preserving_at_staircase_corners() {
        // forward differences with opposite signs make the per-cell norm
        // fail submodularity; the lower disk leaks more into the corner cell
        let g = Grid2D::<f64>::unit_square(16).unwrap();
        let low = make_field(&g, &Shape::disk(0.5, 0.5, 0.25, 1.0)).unwrap();
        let high = make_field(&g, &Shape::disk(0.5, 0.5, 0.25, 2.0)).unwrap();
        let zero = ScalarField::zeros(&g);
        let opts = InnerOptions {
            gap_tol: 1e-9,
            max_iters: 200_000,
            ..InnerOptions::default()
        };
        let a = rof_step(&low, &zero, 0.01, opts).unwrap();
        let b = rof_step(&high, &zero, 0.01, opts).unwrap();
        let excess = a.u_next.get(4, 11) - b.u_next.get(4, 11);
        assert!(excess > 1e-3, "{excess}");
        assert_eq!(low.get(4, 11), 0.0);
    }
}
