//! The approximating data `(f_n, u0_n)`: bounded, and for `u0_n` smoothed by
//! one Jacobi pass so it has a bounded discrete gradient.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::scalar::Real;
use crate::solver::source::Source;
use crate::truncation::clamp_level;

/// Data actually fed to the time stepper.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder<T> {
    /// `None` when the raw data were used unchanged.
    pub level: Option<u32>,
    pub f: Source<T>,
    pub u0: ScalarField<T>,
}

/// One Jacobi pass: half the cell value plus an eighth of each 4-neighbor,
/// ghosts counting as zero. Averaging weights are nonnegative and sum to
/// one, so the pass never increases `‖·‖_1` or `‖·‖_∞`.
pub fn smoothing_pass<T: Real>(u: &ScalarField<T>) -> ScalarField<T> {
    let g = u.grid();
    let (half, eighth) = (T::lit(0.5), T::lit(0.125));
    let mut out = vec![T::zero(); g.len()];
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let (ii, jj) = (i as isize, j as isize);
            if !g.is_inside(ii, jj) {
                continue;
            }
            let nb = u.get_or_ghost(ii + 1, jj)
                + u.get_or_ghost(ii - 1, jj)
                + u.get_or_ghost(ii, jj + 1)
                + u.get_or_ghost(ii, jj - 1);
            out[g.idx(i, j)] = half * u.get(i, j) + eighth * nb;
        }
    }
    ScalarField::from_values(g, out).expect("finite average")
}

/// `f_n = T_n f` and `u0_n = S(T_n u0)` with `S` the [`smoothing_pass`].
pub fn data_ladder<T: Real>(f: &Source<T>, u0: &ScalarField<T>, n: u32) -> Result<Ladder<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("ladder level must be >= 1".into()));
    }
    f.grid().check_same(u0.grid())?;
    let k = T::from_u32(n).expect("level fits");
    Ok(Ladder {
        level: Some(n),
        f: f.map(|s| clamp_level(k, s)),
        u0: smoothing_pass(&u0.map(|s| clamp_level(k, s))),
    })
}

/// The raw data, unchanged.
pub fn identity_ladder<T: Real>(f: &Source<T>, u0: &ScalarField<T>) -> Ladder<T> {
    Ladder {
        level: None,
        f: f.clone(),
        u0: u0.clone(),
    }
}

/// Truncation part of the ladder error: `∫_0^T ‖T_n f − f‖_1 + ‖T_n u0 − u0‖_1`.
pub fn truncation_error<T: Real>(f: &Source<T>, u0: &ScalarField<T>, n: u32, final_time: T) -> T {
    let k = T::from_u32(n).expect("level fits");
    let gf = f.map(|s| s - clamp_level(k, s)).l1_integral(final_time);
    let gu = u0.map(|s| s - clamp_level(k, s)).l1_norm();
    gf + gu
}

/// Smallest power of two `n` whose truncation error is at most `1e-3` of
/// the data mass `∫_0^T ‖f‖_1 + ‖u0‖_1`.
pub fn auto_level<T: Real>(f: &Source<T>, u0: &ScalarField<T>, final_time: T) -> u32 {
    let mass = f.l1_integral(final_time) + u0.l1_norm();
    let budget = T::lit(1e-3) * mass;
    let mut n = 1u32;
    while n < (1 << 30) && truncation_error(f, u0, n, final_time) > budget {
        n *= 2;
    }
    n
}
