//! Total variation flow on a 2-D grid with Dirichlet boundary and `L¹`
//! data.
//!
//! The crate is layered bottom-up:
//!
//! - [`grid`], [`field`] and [`truncation`]: mesh, cell fields, and the
//!   truncations `T_k`, `G_k`, `J_k`.
//! - [`calculus`]: forward-difference gradient with zero ghost cells, its
//!   exact negative adjoint, total variation, pairings and boundary traces.
//! - [`solver`]: implicit Euler steps solved as proximal (ROF) problems on
//!   the dual side, the approximating data ladder, and a p-Laplacian path.
//! - [`verify`]: residuals of the entropy inequality, the energy identity
//!   and the chain rule along a trajectory.
//! - [`lab`]: end-to-end experiments for stability, regularity, decay and
//!   uniqueness.
//! - [`io`]: `key = value` run files and the `TVF1` snapshot format.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the
//! experiment and file layers work in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calculus;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod lab;
pub mod scalar;
pub mod solver;
pub mod truncation;
pub mod verify;

pub use error::{Error, Result};
pub use field::{make_field, Shape, Staggering};
pub use scalar::Real;

pub type Grid = grid::Grid2D<f64>;
pub type Grid32 = grid::Grid2D<f32>;
pub type Field = field::ScalarField<f64>;
pub type Field32 = field::ScalarField<f32>;
pub type Flux = field::VectorField<f64>;
pub type Flux32 = field::VectorField<f32>;
pub type Trajectory = solver::Trajectory<f64>;
pub type SolveConfig = solver::SolveConfig<f64>;
pub type Source = solver::Source<f64>;
pub type Truncation = truncation::TruncationFamily<f64>;
/// Exact-arithmetic scalar for the truncation identities and exponents.
pub type Rational = num_rational::Rational64;
