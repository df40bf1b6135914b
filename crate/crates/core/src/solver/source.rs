//! Sources that are piecewise constant in time.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid2D;
use crate::scalar::Real;

/// `f(t) = slices[m]` for `t` in `[starts[m], starts[m + 1])`, the last
/// slice extending to infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct Source<T> {
    starts: Vec<T>,
    slices: Vec<ScalarField<T>>,
}

impl<T: Real> Source<T> {
    pub fn zero(grid: &Grid2D<T>) -> Self {
        Self::constant(ScalarField::zeros(grid))
    }

    pub fn constant(field: ScalarField<T>) -> Self {
        Self {
            starts: vec![T::zero()],
            slices: vec![field],
        }
    }

    /// `starts` must begin at zero and increase strictly.
    pub fn piecewise(starts: Vec<T>, slices: Vec<ScalarField<T>>) -> Result<Self> {
        if starts.is_empty() || starts.len() != slices.len() {
            return Err(Error::InvalidArgument(
                "source needs one start time per slice".into(),
            ));
        }
        if starts[0] != T::zero() || starts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "source start times must begin at 0 and increase".into(),
            ));
        }
        for s in &slices[1..] {
            s.grid().check_same(slices[0].grid())?;
        }
        Ok(Self { starts, slices })
    }

    pub fn grid(&self) -> &Grid2D<T> {
        self.slices[0].grid()
    }

    pub fn starts(&self) -> &[T] {
        &self.starts
    }

    pub fn slices(&self) -> &[ScalarField<T>] {
        &self.slices
    }

    pub fn is_zero(&self) -> bool {
        self.slices
            .iter()
            .all(|s| s.values().iter().all(|v| *v == T::zero()))
    }

    fn end_of(&self, m: usize) -> T {
        self.starts.get(m + 1).copied().unwrap_or(T::infinity())
    }

    /// The slice active at time `t`.
    pub fn at(&self, t: T) -> &ScalarField<T> {
        let m = self.starts.partition_point(|&s| s <= t).max(1) - 1;
        &self.slices[m]
    }

    /// Time average of `f` over `[t0, t1]`; the point value when `t0 == t1`.
    pub fn average(&self, t0: T, t1: T) -> ScalarField<T> {
        if !(t1 > t0) {
            return self.at(t0).clone();
        }
        let mut acc = ScalarField::zeros(self.grid());
        for (m, s) in self.slices.iter().enumerate() {
            let a = self.starts[m].max(t0);
            let b = self.end_of(m).min(t1);
            if b > a {
                acc = acc.axpy((b - a) / (t1 - t0), s).expect("same grid");
            }
        }
        acc
    }

    /// `∫_0^T g(f(t)) dt` for a per-slice functional `g`.
    fn time_integral(&self, final_time: T, g: impl Fn(&ScalarField<T>) -> T) -> T {
        let mut total = T::zero();
        for (m, s) in self.slices.iter().enumerate() {
            let a = self.starts[m];
            let b = self.end_of(m).min(final_time);
            if b > a {
                total += (b - a) * g(s);
            }
        }
        total
    }

    /// `∫_0^T ‖f(t)‖_1 dt`.
    pub fn l1_integral(&self, final_time: T) -> T {
        self.time_integral(final_time, |s| s.l1_norm())
    }

    /// `∫_0^T ‖f(t)‖_r dt`.
    pub fn lr_integral(&self, r: T, final_time: T) -> T {
        self.time_integral(final_time, |s| s.lr_norm(r))
    }

    pub fn sup_norm(&self) -> T {
        self.slices
            .iter()
            .fold(T::zero(), |m, s| m.max(s.sup_norm()))
    }

    /// Applies `g` cellwise to every slice.
    pub fn map(&self, g: impl Fn(T) -> T) -> Self {
        Self {
            starts: self.starts.clone(),
            slices: self.slices.iter().map(|s| s.map(&g)).collect(),
        }
    }

    /// `self - other` on the union of both break sets.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.grid().check_same(other.grid())?;
        let mut starts: Vec<T> = self.starts.iter().chain(&other.starts).copied().collect();
        starts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        starts.dedup();
        let slices = starts
            .iter()
            .map(|&t| self.at(t).sub(other.at(t)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { starts, slices })
    }

    /// `f1 <= f2` cellwise at every time.
    pub fn le(&self, other: &Self) -> Result<bool> {
        let d = self.sub(other)?;
        Ok(d.slices.iter().all(|s| s.max_value() <= T::zero()))
    }
}
