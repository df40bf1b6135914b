//! Semi-implicit steps of the regularized p-Laplacian flow
//!
//! ```text
//! (u_next − u) / τ = div(a ∇u_next) + f,    a = (|∇u|² + ε²)^{(p−2)/2}
//! ```
//!
//! with the diffusivity lagged at `u`. The linear system is symmetric
//! positive definite and solved by Jacobi-preconditioned conjugate gradients.

use crate::calculus::gradient;
use crate::error::{Error, Result};
use crate::field::{ScalarField, Staggering, VectorField};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlapOptions<T> {
    /// Regularization `ε` in the diffusivity.
    pub eps_reg: T,
    /// Relative residual target of the linear solve.
    pub cg_tol: T,
    pub cg_max_iters: usize,
}

impl<T: Real> Default for PlapOptions<T> {
    fn default() -> Self {
        Self {
            eps_reg: T::lit(1e-3),
            cg_tol: T::lit(1e-8),
            cg_max_iters: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlapStep<T> {
    pub u_next: ScalarField<T>,
    pub cg_iters: usize,
    pub residual: T,
}

/// `a` on the extended layout, one value per entry of `∇u`.
pub fn diffusivity<T: Real>(u: &ScalarField<T>, p: T, eps_reg: T) -> Vec<T> {
    let gu = gradient(u);
    let expo = (p - T::lit(2.0)) * T::lit(0.5);
    let e2 = eps_reg * eps_reg;
    gu.xs()
        .iter()
        .zip(gu.ys())
        .map(|(&x, &y)| (x * x + y * y + e2).powf(expo))
        .collect()
}

/// `∇u / sqrt(|∇u|² + ε²)`: the regularized unit-ball flux direction.
pub fn regularized_direction<T: Real>(u: &ScalarField<T>, eps_reg: T) -> VectorField<T> {
    let gu = gradient(u);
    let e2 = eps_reg * eps_reg;
    let (xs, ys) = gu
        .xs()
        .iter()
        .zip(gu.ys())
        .map(|(&x, &y)| {
            let n = (x * x + y * y + e2).sqrt();
            (x / n, y / n)
        })
        .unzip();
    VectorField::from_components(u.grid(), Staggering::Extended, xs, ys)
        .expect("finite")
        .flag_unit_ball()
}

/// `x ↦ x − τ div(a ∇x)` on padded arrays.
struct Operator<'a, T> {
    nx: usize,
    ny: usize,
    c: T,
    a: &'a [T],
    inside: Option<&'a [bool]>,
}

impl<T: Real> Operator<'_, T> {
    fn is_in(&self, i: usize, j: usize) -> bool {
        self.inside.is_none_or(|m| m[j * self.nx + i])
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        let (ew, pw) = (self.nx + 1, self.nx + 2);
        let a = self.a;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let p = (j + 1) * pw + i + 1;
                if !self.is_in(i, j) {
                    out[p] = T::zero();
                    continue;
                }
                let e = (j + 1) * ew + i + 1;
                let xc = x[p];
                let flux = a[e] * (x[p + 1] - xc) - a[e - 1] * (xc - x[p - 1])
                    + a[e] * (x[p + pw] - xc)
                    - a[e - ew] * (xc - x[p - pw]);
                out[p] = xc - self.c * flux;
            }
        }
    }

    fn diagonal(&self) -> Vec<T> {
        let (ew, pw) = (self.nx + 1, self.nx + 2);
        let mut d = vec![T::one(); pw * (self.ny + 2)];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let e = (j + 1) * ew + i + 1;
                d[(j + 1) * pw + i + 1] =
                    T::one() + self.c * (T::lit(2.0) * self.a[e] + self.a[e - 1] + self.a[e - ew]);
            }
        }
        d
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// One lagged-diffusivity step.
pub fn plap_step<T: Real>(
    u: &ScalarField<T>,
    f: &ScalarField<T>,
    tau: T,
    p: T,
    opts: PlapOptions<T>,
) -> Result<PlapStep<T>> {
    plap_step_at(u, f, tau, p, opts, 0)
}

pub(crate) fn plap_step_at<T: Real>(
    u: &ScalarField<T>,
    f: &ScalarField<T>,
    tau: T,
    p: T,
    opts: PlapOptions<T>,
    step: usize,
) -> Result<PlapStep<T>> {
    if !(p > T::one() && p <= T::lit(2.0)) {
        return Err(Error::InvalidArgument(format!("need 1 < p <= 2, got {p}")));
    }
    if !(opts.eps_reg > T::zero()) || !(opts.cg_tol > T::zero()) {
        return Err(Error::InvalidArgument(
            "eps_reg and cg_tol must be > 0".into(),
        ));
    }
    if !(tau > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "tau must be > 0, got {tau}"
        )));
    }
    u.grid().check_same(f.grid())?;
    let g = u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let pw = nx + 2;
    let n = pw * (ny + 2);
    let a = diffusivity(u, p, opts.eps_reg);
    let op = Operator {
        nx,
        ny,
        c: tau / g.cell_area(),
        a: &a,
        inside: g.mask(),
    };
    let pad = |s: &ScalarField<T>| {
        let mut out = vec![T::zero(); n];
        for j in 0..ny {
            for i in 0..nx {
                out[(j + 1) * pw + i + 1] = s.get(i, j);
            }
        }
        out
    };
    let rhs = pad(&u.axpy(tau, f)?);
    let diag = op.diagonal();
    let norm_b = dot(&rhs, &rhs).sqrt();

    let mut x = pad(u);
    let mut ax = vec![T::zero(); n];
    op.apply(&x, &mut ax);
    let mut r: Vec<T> = rhs.iter().zip(&ax).map(|(&b, &q)| b - q).collect();
    let mut zv: Vec<T> = r.iter().zip(&diag).map(|(&ri, &di)| ri / di).collect();
    let mut d = zv.clone();
    let mut rz = dot(&r, &zv);
    let mut iters = 0;
    let mut res = if norm_b > T::zero() {
        dot(&r, &r).sqrt() / norm_b
    } else {
        T::zero()
    };
    while res > opts.cg_tol {
        if iters >= opts.cg_max_iters {
            return Err(Error::LinearSolveStagnation {
                step,
                residual: res.as_f64(),
                iters,
            });
        }
        op.apply(&d, &mut ax);
        let dad = dot(&d, &ax);
        if !(dad > T::zero()) {
            return Err(Error::LinearSolveStagnation {
                step,
                residual: res.as_f64(),
                iters,
            });
        }
        let alpha = rz / dad;
        for k in 0..n {
            x[k] += alpha * d[k];
            r[k] -= alpha * ax[k];
        }
        for k in 0..n {
            zv[k] = r[k] / diag[k];
        }
        let rz_next = dot(&r, &zv);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            d[k] = zv[k] + beta * d[k];
        }
        iters += 1;
        res = dot(&r, &r).sqrt() / norm_b;
    }

    let mut vals = vec![T::zero(); g.len()];
    for j in 0..ny {
        for i in 0..nx {
            if g.is_inside(i as isize, j as isize) {
                vals[g.idx(i, j)] = x[(j + 1) * pw + i + 1];
            }
        }
    }
    Ok(PlapStep {
        u_next: ScalarField::from_values(g, vals)?,
        cg_iters: iters,
        residual: res,
    })
}
