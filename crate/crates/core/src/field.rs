//! Cell-centered scalar fields and ghost-extended vector fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::scalar::Real;

/// Real values on the cells of a grid. Values on masked-out cells are held
/// at zero, so the ghost-cell convention needs no special casing.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    grid: Grid2D<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: &Grid2D<T>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![T::zero(); grid.len()],
        }
    }

    pub fn constant(grid: &Grid2D<T>, c: T) -> Self {
        Self::from_fn(grid, |_, _| c)
    }

    /// Row-major values for the full rectangle. Non-finite entries and
    /// nonzero values on masked-out cells are rejected.
    pub fn from_values(grid: &Grid2D<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx(),
                grid.ny()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite value at index {pos}"
            )));
        }
        if let Some(mask) = grid.mask() {
            if let Some(pos) = (0..values.len()).find(|&c| !mask[c] && values[c] != T::zero()) {
                return Err(Error::InvalidField(format!(
                    "nonzero value on masked-out cell {pos}"
                )));
            }
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f(x, y)` at cell centers of inside cells.
    pub fn from_fn(grid: &Grid2D<T>, mut f: impl FnMut(T, T) -> T) -> Self {
        let mut values = vec![T::zero(); grid.len()];
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                if grid.is_inside(i as isize, j as isize) {
                    let (x, y) = grid.cell_center(i, j);
                    values[grid.idx(i, j)] = f(x, y);
                }
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.grid.idx(i, j)]
    }

    /// Value with the zero-ghost convention outside the domain.
    #[inline]
    pub fn get_or_ghost(&self, i: isize, j: isize) -> T {
        if i < 0 || j < 0 || i as usize >= self.grid.nx() || j as usize >= self.grid.ny() {
            T::zero()
        } else {
            self.values[j as usize * self.grid.nx() + i as usize]
        }
    }

    /// Applies `f` cellwise on inside cells; masked cells stay zero.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let mask = self.grid.mask();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(c, &v)| match mask {
                Some(m) if !m[c] => T::zero(),
                _ => f(v),
            })
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let mask = self.grid.mask();
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(c, (&a, &b))| match mask {
                Some(m) if !m[c] => T::zero(),
                _ => f(a, b),
            })
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: T, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| c * v)
    }

    /// `∫ v dx` as `Σ h² v`.
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.cell_area()
    }

    /// `∫ a b dx`.
    pub fn dot(&self, other: &Self) -> Result<T> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum::<T>()
            * self.grid.cell_area())
    }

    pub fn l1_norm(&self) -> T {
        self.values.iter().map(|v| v.abs()).sum::<T>() * self.grid.cell_area()
    }

    pub fn l2_norm(&self) -> T {
        (self.values.iter().map(|&v| v * v).sum::<T>() * self.grid.cell_area()).sqrt()
    }

    /// `(∫ |v|^r)^{1/r}` for `r >= 1`.
    pub fn lr_norm(&self, r: T) -> T {
        (self.values.iter().map(|v| v.abs().powf(r)).sum::<T>() * self.grid.cell_area())
            .powf(T::one() / r)
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    /// Number of cells carrying a nonzero value.
    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|v| **v != T::zero()).count()
    }

    pub fn to_f64(&self) -> ScalarField<f64> {
        let g = &self.grid;
        let mut grid = Grid2D::new(g.nx(), g.ny(), g.h().as_f64()).expect("valid grid");
        if let Some(m) = g.mask() {
            grid = grid.with_mask(m.to_vec()).expect("valid mask");
        }
        ScalarField {
            grid,
            values: self.values.iter().map(|v| v.as_f64()).collect(),
        }
    }
}

/// Where the two components of a [`VectorField`] live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Staggering {
    /// One 2-vector per cell of the grid extended by one ghost layer on the
    /// west and south sides: `(nx + 1) × (ny + 1)` entries. Entry `(a, b)`
    /// holds the forward differences of ghost-extended cell `(a - 1, b - 1)`,
    /// so its x component lives on the east face and its y component on the
    /// north face of that cell. This is the layout produced by
    /// [`gradient`](crate::calculus::gradient).
    Extended,
    /// One 2-vector per cell, `nx × ny` entries.
    Cell,
}

impl Staggering {
    pub fn as_str(self) -> &'static str {
        match self {
            Staggering::Extended => "extended",
            Staggering::Cell => "cell",
        }
    }

    pub fn dims(self, nx: usize, ny: usize) -> (usize, usize) {
        match self {
            Staggering::Extended => (nx + 1, ny + 1),
            Staggering::Cell => (nx, ny),
        }
    }
}

/// A field of 2-vectors, stored as two component arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    grid: Grid2D<T>,
    staggering: Staggering,
    xs: Vec<T>,
    ys: Vec<T>,
    unit_ball: bool,
}

/// Slack allowed on `|z| <= 1` for unit-ball flagged fields.
pub const UNIT_BALL_SLACK: f64 = 1e-10;

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: &Grid2D<T>, staggering: Staggering) -> Self {
        let (w, h) = staggering.dims(grid.nx(), grid.ny());
        Self {
            grid: grid.clone(),
            staggering,
            xs: vec![T::zero(); w * h],
            ys: vec![T::zero(); w * h],
            unit_ball: false,
        }
    }

    pub fn from_components(
        grid: &Grid2D<T>,
        staggering: Staggering,
        xs: Vec<T>,
        ys: Vec<T>,
    ) -> Result<Self> {
        let (w, h) = staggering.dims(grid.nx(), grid.ny());
        if xs.len() != w * h || ys.len() != w * h {
            return Err(Error::InvalidField(format!(
                "vector field needs {} entries per component for {} staggering",
                w * h,
                staggering.as_str()
            )));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("non-finite vector component".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            staggering,
            xs,
            ys,
            unit_ball: false,
        })
    }

    /// Flags the field as lying in the unit ball after checking every
    /// entry against `1 + UNIT_BALL_SLACK`, widened to a few ulps of `T`.
    pub fn into_unit_ball(mut self) -> Result<Self> {
        let m = self.max_norm().as_f64();
        if m > 1.0 + UNIT_BALL_SLACK.max(4.0 * T::epsilon().as_f64()) {
            return Err(Error::InvalidField(format!(
                "unit-ball field has entry of norm {m}"
            )));
        }
        self.unit_ball = true;
        Ok(self)
    }

    pub(crate) fn flag_unit_ball(mut self) -> Self {
        self.unit_ball = true;
        self
    }

    pub fn is_unit_ball(&self) -> bool {
        self.unit_ball
    }

    pub fn grid(&self) -> &Grid2D<T> {
        &self.grid
    }

    pub fn staggering(&self) -> Staggering {
        self.staggering
    }

    pub fn dims(&self) -> (usize, usize) {
        self.staggering.dims(self.grid.nx(), self.grid.ny())
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn ys(&self) -> &[T] {
        &self.ys
    }

    /// Components at entry `(a, b)` of the staggered layout.
    #[inline]
    pub fn at(&self, a: usize, b: usize) -> (T, T) {
        let k = b * self.dims().0 + a;
        (self.xs[k], self.ys[k])
    }

    /// Largest Euclidean norm over all entries (the discrete `‖z‖_∞`).
    pub fn max_norm(&self) -> T {
        self.xs
            .iter()
            .zip(&self.ys)
            .fold(T::zero(), |m, (&x, &y)| m.max((x * x + y * y).sqrt()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        if self.staggering != other.staggering {
            return Err(Error::InvalidStaggering {
                expected: self.staggering.as_str(),
                found: other.staggering.as_str(),
            });
        }
        Ok(Self {
            grid: self.grid.clone(),
            staggering: self.staggering,
            xs: self
                .xs
                .iter()
                .zip(&other.xs)
                .map(|(&a, &b)| a - b)
                .collect(),
            ys: self
                .ys
                .iter()
                .zip(&other.ys)
                .map(|(&a, &b)| a - b)
                .collect(),
            unit_ball: false,
        })
    }

    pub(crate) fn require(&self, staggering: Staggering) -> Result<()> {
        if self.staggering == staggering {
            Ok(())
        } else {
            Err(Error::InvalidStaggering {
                expected: staggering.as_str(),
                found: self.staggering.as_str(),
            })
        }
    }
}

/// Built-in initial data and sources.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape<T> {
    /// `height` on cells whose center is within `radius` of `center`.
    Disk {
        center: (T, T),
        radius: T,
        height: T,
    },
    /// Axis-aligned square of side `side` centered at `center`.
    Square {
        center: (T, T),
        side: T,
        height: T,
    },
    /// `height` for `x < position`, zero beyond.
    Step {
        position: T,
        height: T,
    },
    Constant(T),
    /// Uniform values in `[-amplitude, amplitude]`.
    Random {
        seed: u64,
        amplitude: T,
    },
    /// `amplitude · |x - center|^{-exponent}`, an unbounded datum whose
    /// integrability depends on `exponent`.
    Spike {
        center: (T, T),
        exponent: T,
        amplitude: T,
    },
}

impl<T: Real> Shape<T> {
    pub fn disk(cx: T, cy: T, radius: T, height: T) -> Self {
        Shape::Disk {
            center: (cx, cy),
            radius,
            height,
        }
    }

    pub fn random(seed: u64) -> Self {
        Shape::Random {
            seed,
            amplitude: T::one(),
        }
    }
}

fn point_in_domain<T: Real>(grid: &Grid2D<T>, (x, y): (T, T)) -> bool {
    x >= T::zero() && y >= T::zero() && x <= grid.width() && y <= grid.height()
}

/// Samples a built-in shape on `grid`.
pub fn make_field<T: Real>(grid: &Grid2D<T>, shape: &Shape<T>) -> Result<ScalarField<T>> {
    let bad = |msg: String| Err(Error::InvalidShape(msg));
    match *shape {
        Shape::Disk {
            center,
            radius,
            height,
        } => {
            if !point_in_domain(grid, center) || !(radius > T::zero()) || !height.is_finite() {
                return bad(format!(
                    "disk center ({}, {}) radius {radius} outside domain",
                    center.0, center.1
                ));
            }
            let r2 = radius * radius;
            Ok(ScalarField::from_fn(grid, |x, y| {
                let (dx, dy) = (x - center.0, y - center.1);
                if dx * dx + dy * dy < r2 {
                    height
                } else {
                    T::zero()
                }
            }))
        }
        Shape::Square {
            center,
            side,
            height,
        } => {
            if !point_in_domain(grid, center) || !(side > T::zero()) || !height.is_finite() {
                return bad("square outside domain".into());
            }
            let half = side * T::lit(0.5);
            Ok(ScalarField::from_fn(grid, |x, y| {
                if (x - center.0).abs() < half && (y - center.1).abs() < half {
                    height
                } else {
                    T::zero()
                }
            }))
        }
        Shape::Step { position, height } => {
            if !(position >= T::zero() && position <= grid.width()) || !height.is_finite() {
                return bad(format!("step position {position} outside [0, width]"));
            }
            Ok(ScalarField::from_fn(grid, |x, _| {
                if x < position {
                    height
                } else {
                    T::zero()
                }
            }))
        }
        Shape::Constant(c) => {
            if !c.is_finite() {
                return bad("non-finite constant".into());
            }
            Ok(ScalarField::constant(grid, c))
        }
        Shape::Random { seed, amplitude } => {
            if !amplitude.is_finite() {
                return bad("non-finite amplitude".into());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(ScalarField::from_fn(grid, |_, _| {
                T::lit(rng.gen_range(-1.0..=1.0)) * amplitude
            }))
        }
        Shape::Spike {
            center,
            exponent,
            amplitude,
        } => {
            if !point_in_domain(grid, center) || !(exponent > T::zero()) || !amplitude.is_finite() {
                return bad("spike parameters invalid".into());
            }
            let floor = grid.h() * T::lit(1e-3);
            Ok(ScalarField::from_fn(grid, |x, y| {
                let (dx, dy) = (x - center.0, y - center.1);
                amplitude * (dx * dx + dy * dy).sqrt().max(floor).powf(-exponent)
            }))
        }
    }
}
