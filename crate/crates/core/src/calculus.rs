//! Discrete gradient and divergence, total variation with the Dirichlet
//! boundary term, and the discrete pairing `(z, Dv)` with its Green formula.
//!
//! The gradient uses forward differences on the grid extended by one ghost
//! layer to the west and south, so every face of every inside cell carries
//! exactly one component (see [`Staggering::Extended`]). Ghost values are
//! zero, which makes the boundary jump `-u/h` part of the gradient and the
//! boundary term of the BV norm part of `tv`.

use crate::error::{Error, Result};
use crate::field::{ScalarField, Staggering, VectorField};
use crate::grid::{BoundaryFace, Grid2D, Normal};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TvNorm {
    /// Euclidean norm of the two forward differences of each cell.
    #[default]
    Isotropic,
    /// Sum of absolute jumps over faces; exact perimeters on axis-aligned sets.
    Anisotropic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TvOptions {
    pub norm: TvNorm,
    /// Count jumps across the boundary of the domain.
    pub include_boundary: bool,
}

impl Default for TvOptions {
    fn default() -> Self {
        Self {
            norm: TvNorm::Isotropic,
            include_boundary: true,
        }
    }
}

impl TvOptions {
    pub fn anisotropic() -> Self {
        Self {
            norm: TvNorm::Anisotropic,
            ..Self::default()
        }
    }
}

/// Whether the x component at extended entry `(a, b)` sits on a face with
/// inside cells on both sides; likewise for y.
#[inline]
fn x_face_interior<T: Real>(g: &Grid2D<T>, a: usize, b: usize) -> bool {
    let (a, b) = (a as isize, b as isize);
    g.is_inside(a - 1, b - 1) && g.is_inside(a, b - 1)
}

#[inline]
fn y_face_interior<T: Real>(g: &Grid2D<T>, a: usize, b: usize) -> bool {
    let (a, b) = (a as isize, b as isize);
    g.is_inside(a - 1, b - 1) && g.is_inside(a - 1, b)
}

/// Forward differences with zero ghost cells, on [`Staggering::Extended`].
pub fn gradient<T: Real>(u: &ScalarField<T>) -> VectorField<T> {
    let g = u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let w = nx + 1;
    let inv_h = T::one() / g.h();
    let mut xs = vec![T::zero(); w * (ny + 1)];
    let mut ys = vec![T::zero(); w * (ny + 1)];
    for b in 0..=ny {
        for a in 0..=nx {
            let (ci, cj) = (a as isize - 1, b as isize - 1);
            let c = u.get_or_ghost(ci, cj);
            xs[b * w + a] = (u.get_or_ghost(ci + 1, cj) - c) * inv_h;
            ys[b * w + a] = (u.get_or_ghost(ci, cj + 1) - c) * inv_h;
        }
    }
    VectorField::from_components(g, Staggering::Extended, xs, ys).expect("finite gradient")
}

/// Negative adjoint of [`gradient`]: `Σ h² ∇u·p = -Σ h² u div p` exactly.
pub fn divergence<T: Real>(p: &VectorField<T>) -> Result<ScalarField<T>> {
    p.require(Staggering::Extended)?;
    let g = p.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let w = nx + 1;
    let inv_h = T::one() / g.h();
    let (px, py) = (p.xs(), p.ys());
    let mut out = vec![T::zero(); g.len()];
    for j in 0..ny {
        for i in 0..nx {
            if !g.is_inside(i as isize, j as isize) {
                continue;
            }
            let e = (j + 1) * w + i + 1;
            out[g.idx(i, j)] = (px[e] - px[e - 1] + py[e] - py[e - w]) * inv_h;
        }
    }
    ScalarField::from_values(g, out)
}

/// Discrete total variation `∫|Du| + ∫_∂ |u|` (boundary term optional).
pub fn tv<T: Real>(u: &ScalarField<T>, opts: TvOptions) -> T {
    let gr = gradient(u);
    let g = u.grid();
    let mut sum = T::zero();
    for b in 0..=g.ny() {
        for a in 0..=g.nx() {
            let (mut gx, mut gy) = gr.at(a, b);
            if !opts.include_boundary {
                if !x_face_interior(g, a, b) {
                    gx = T::zero();
                }
                if !y_face_interior(g, a, b) {
                    gy = T::zero();
                }
            }
            sum += match opts.norm {
                TvNorm::Isotropic => (gx * gx + gy * gy).sqrt(),
                TvNorm::Anisotropic => gx.abs() + gy.abs(),
            };
        }
    }
    sum * g.cell_area()
}

/// Total mass `Σ h² z·∇v` of the discrete pairing `(z, Dv)`, boundary
/// faces included. Since ghosts are zero this equals `-∫ v div z`.
pub fn pairing<T: Real>(z: &VectorField<T>, v: &ScalarField<T>) -> Result<T> {
    z.require(Staggering::Extended)?;
    z.grid().check_same(v.grid())?;
    let gv = gradient(v);
    let s: T = z
        .xs()
        .iter()
        .zip(gv.xs())
        .chain(z.ys().iter().zip(gv.ys()))
        .map(|(&a, &b)| a * b)
        .sum();
    Ok(s * v.grid().cell_area())
}

/// The pairing restricted to faces with inside cells on both sides: the
/// `(z, Dv)(Ω)` of Green's formula, without the boundary jumps.
pub fn interior_pairing<T: Real>(z: &VectorField<T>, v: &ScalarField<T>) -> Result<T> {
    z.require(Staggering::Extended)?;
    let g = v.grid();
    g.check_same(z.grid())?;
    let gv = gradient(v);
    let mut s = T::zero();
    for b in 0..=g.ny() {
        for a in 0..=g.nx() {
            let (zx, zy) = z.at(a, b);
            let (gx, gy) = gv.at(a, b);
            if x_face_interior(g, a, b) {
                s += zx * gx;
            }
            if y_face_interior(g, a, b) {
                s += zy * gy;
            }
        }
    }
    Ok(s * g.cell_area())
}

/// Normal component `[z, ν]` on each boundary face.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace<T> {
    faces: Vec<BoundaryFace>,
    values: Vec<T>,
}

impl<T: Real> BoundaryTrace<T> {
    pub fn faces(&self) -> &[BoundaryFace] {
        &self.faces
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BoundaryFace, T)> {
        self.faces.iter().zip(self.values.iter().copied())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Outward normal component of `z` on every boundary face, in the order of
/// [`Grid2D::boundary_faces`]. On the extended layout this is the component
/// living on the face itself; on the cell layout it is the inside cell's
/// vector projected on the normal.
pub fn boundary_trace<T: Real>(z: &VectorField<T>) -> BoundaryTrace<T> {
    let g = z.grid();
    let faces = g.boundary_faces();
    let values = faces
        .iter()
        .map(|f| match z.staggering() {
            Staggering::Extended => {
                let (a, b) = (f.i + 1, f.j + 1);
                match f.normal {
                    Normal::East => z.at(a, b).0,
                    Normal::West => -z.at(a - 1, b).0,
                    Normal::North => z.at(a, b).1,
                    Normal::South => -z.at(a, b - 1).1,
                }
            }
            Staggering::Cell => {
                let (zx, zy) = z.at(f.i, f.j);
                match f.normal {
                    Normal::East => zx,
                    Normal::West => -zx,
                    Normal::North => zy,
                    Normal::South => -zy,
                }
            }
        })
        .collect();
    BoundaryTrace { faces, values }
}

/// `∫_∂ v [z, ν]` as `Σ_faces h v [z, ν]`.
pub fn boundary_flux<T: Real>(z: &VectorField<T>, v: &ScalarField<T>) -> Result<T> {
    z.grid().check_same(v.grid())?;
    let tr = boundary_trace(z);
    let s: T = tr.iter().map(|(f, zn)| v.get(f.i, f.j) * zn).sum();
    Ok(s * v.grid().h())
}

/// `∫_∂ |u|` as `Σ_faces h |u|` over the inside cell of each boundary face.
pub fn boundary_integral<T: Real>(u: &ScalarField<T>) -> T {
    let g = u.grid();
    let s: T = g
        .boundary_faces()
        .iter()
        .map(|f| u.get(f.i, f.j).abs())
        .sum();
    s * g.h()
}

/// Cellwise `∇v / |∇v|` where the gradient is nonzero, zero elsewhere.
pub fn normalized_gradient<T: Real>(v: &ScalarField<T>) -> VectorField<T> {
    let gv = gradient(v);
    let (xs, ys): (Vec<T>, Vec<T>) = gv
        .xs()
        .iter()
        .zip(gv.ys())
        .map(|(&x, &y)| {
            let n = (x * x + y * y).sqrt();
            if n > T::zero() {
                (x / n, y / n)
            } else {
                (T::zero(), T::zero())
            }
        })
        .unzip();
    VectorField::from_components(v.grid(), Staggering::Extended, xs, ys)
        .expect("finite")
        .flag_unit_ball()
}

/// Fails unless `z` lives on the layout produced by [`gradient`].
pub fn check_dual_layout<T: Real>(z: &VectorField<T>) -> Result<()> {
    if z.staggering() == Staggering::Extended {
        Ok(())
    } else {
        Err(Error::InvalidStaggering {
            expected: Staggering::Extended.as_str(),
            found: z.staggering().as_str(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_field, Shape};
    use crate::truncation::{gk, trunc};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(g: &Grid2D<f64>, rng: &mut ChaCha8Rng) -> ScalarField<f64> {
        ScalarField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_vector(g: &Grid2D<f64>, rng: &mut ChaCha8Rng) -> VectorField<f64> {
        let n = (g.nx() + 1) * (g.ny() + 1);
        let xs = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ys = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        VectorField::from_components(g, Staggering::Extended, xs, ys).unwrap()
    }

    fn l2(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn gradient_of_constant_is_boundary_jump() {
        let g = Grid2D::unit_square(8).unwrap();
        let u = ScalarField::constant(&g, 3.0);
        let gr = gradient(&u);
        let h = g.h();
        for b in 0..=8 {
            for a in 0..=8 {
                let (gx, gy) = gr.at(a, b);
                let expect_x = if b == 0 {
                    0.0
                } else if a == 0 {
                    3.0 / h
                } else if a == 8 {
                    -3.0 / h
                } else {
                    0.0
                };
                assert_eq!(gx, expect_x, "x at ({a},{b})");
                let expect_y = if a == 0 {
                    0.0
                } else if b == 0 {
                    3.0 / h
                } else if b == 8 {
                    -3.0 / h
                } else {
                    0.0
                };
                assert_eq!(gy, expect_y, "y at ({a},{b})");
            }
        }
    }

    #[test]
    fn ramp_gradient_is_one_inside() {
        let g = Grid2D::<f64>::unit_square(16).unwrap();
        let h = g.h();
        let u = ScalarField::from_fn(&g, |x, _| x);
        let gr = gradient(&u);
        for b in 1..=16 {
            for a in 1..16 {
                assert!((gr.at(a, b).0 - 1.0).abs() < 1e-12);
            }
        }
        // ghost jump on the east side
        assert!((gr.at(16, 3).0 + (15.5 * h) / h).abs() < 1e-9);
    }

    #[test]
    fn adjointness_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let nx = rng.gen_range(2..12);
            let ny = rng.gen_range(2..12);
            let g = Grid2D::new(nx, ny, rng.gen_range(0.01..1.0)).unwrap();
            let u = random_field(&g, &mut rng);
            let p = random_vector(&g, &mut rng);
            let lhs = pairing(&p, &u).unwrap();
            let rhs = -divergence(&p).unwrap().dot(&u).unwrap();
            let h2 = g.cell_area();
            let scale = l2(u.values()) * (l2(p.xs()).hypot(l2(p.ys()))) * h2 / g.h();
            assert!(
                (lhs - rhs).abs() <= 1e-12 * scale.max(1e-300),
                "trial {trial}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn adjointness_with_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut mask = vec![true; 36];
        for c in [0, 1, 6, 35, 29] {
            mask[c] = false;
        }
        let g = Grid2D::new(6, 6, 0.2).unwrap().with_mask(mask).unwrap();
        let u = random_field(&g, &mut rng);
        let p = random_vector(&g, &mut rng);
        let lhs = pairing(&p, &u).unwrap();
        let rhs = -divergence(&p).unwrap().dot(&u).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        let green = divergence(&p).unwrap().dot(&u).unwrap() + interior_pairing(&p, &u).unwrap()
            - boundary_flux(&p, &u).unwrap();
        assert!(green.abs() < 1e-12);
    }

    #[test]
    fn green_formula_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let g = Grid2D::new(rng.gen_range(2..10), rng.gen_range(2..10), 0.1).unwrap();
            let z = random_vector(&g, &mut rng);
            let v = random_field(&g, &mut rng);
            let div_term = divergence(&z).unwrap().dot(&v).unwrap();
            let inner = interior_pairing(&z, &v).unwrap();
            let flux = boundary_flux(&z, &v).unwrap();
            assert!((div_term + inner - flux).abs() < 1e-12);
            // the full pairing already contains the boundary jumps
            assert!((pairing(&z, &v).unwrap() - (inner - flux)).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_rejects_cell_layout() {
        let g = Grid2D::<f64>::unit_square(4).unwrap();
        let p = VectorField::zeros(&g, Staggering::Cell);
        assert!(matches!(
            divergence(&p),
            Err(Error::InvalidStaggering { .. })
        ));
        let v = ScalarField::zeros(&g);
        assert!(pairing(&p, &v).is_err());
    }

    #[test]
    fn constant_dual_has_zero_interior_divergence() {
        let g = Grid2D::<f64>::unit_square(32).unwrap();
        let n = 33 * 33;
        let p = VectorField::from_components(&g, Staggering::Extended, vec![0.3; n], vec![-0.7; n])
            .unwrap();
        let d = divergence(&p).unwrap();
        assert!(d.values().iter().all(|v| v.abs() < 1e-12));
        // telescoping: the total equals the net outward flux
        let flux: f64 = boundary_trace(&p).values().iter().sum::<f64>() * g.h();
        assert!((d.integral() - flux).abs() < 1e-12);
    }

    #[test]
    fn tv_examples() {
        let g = Grid2D::unit_square(32).unwrap();
        assert_eq!(tv(&ScalarField::zeros(&g), TvOptions::default()), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(&g, &mut rng);
        for opts in [TvOptions::default(), TvOptions::anisotropic()] {
            let t = tv(&u, opts);
            assert!((tv(&u.scale(-3.0), opts) - 3.0 * t).abs() < 1e-10 * t);
        }
        // square of side L = 8h, strictly interior: 4L exactly
        let l = 8.0 / 32.0;
        let sq = make_field(
            &g,
            &Shape::Square {
                center: (0.5, 0.5),
                side: l,
                height: 1.0,
            },
        )
        .unwrap();
        assert_eq!(sq.support_size(), 64);
        assert!((tv(&sq, TvOptions::anisotropic()) - 4.0 * l).abs() < 1e-14);
    }

    #[test]
    fn tv_includes_boundary_term() {
        let g = Grid2D::<f64>::unit_square(10).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        assert!((tv(&one, TvOptions::anisotropic()) - 4.0).abs() < 1e-12);
        assert!((boundary_integral(&one) - 4.0).abs() < 1e-12);
        let no_bd = TvOptions {
            norm: TvNorm::Anisotropic,
            include_boundary: false,
        };
        assert_eq!(tv(&one, no_bd), 0.0);
        let disk = make_field(&g, &Shape::disk(0.5, 0.5, 0.2, 1.0)).unwrap();
        assert_eq!(boundary_integral(&disk), 0.0);
    }

    #[test]
    fn pairing_bounded_by_tv() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Grid2D::unit_square(12).unwrap();
        for _ in 0..50 {
            let v = random_field(&g, &mut rng);
            let z = random_vector(&g, &mut rng);
            let (xs, ys): (Vec<f64>, Vec<f64>) = z
                .xs()
                .iter()
                .zip(z.ys())
                .map(|(&x, &y)| {
                    let n = (x * x + y * y).sqrt().max(1.0);
                    (x / n, y / n)
                })
                .unzip();
            let z = VectorField::from_components(&g, Staggering::Extended, xs, ys)
                .unwrap()
                .into_unit_ball()
                .unwrap();
            let p = pairing(&z, &v).unwrap();
            assert!(p.abs() <= tv(&v, TvOptions::default()) + 1e-12);
        }
        // equality case
        let v = ScalarField::from_fn(&g, |x, y| 1.0 + x + 2.0 * y);
        let z = normalized_gradient(&v);
        let t = tv(&v, TvOptions::default());
        assert!((pairing(&z, &v).unwrap() - t).abs() < 1e-12 * t);
    }

    #[test]
    fn boundary_trace_of_constant_field() {
        let g = Grid2D::new(4, 3, 0.25).unwrap();
        for stag in [Staggering::Extended, Staggering::Cell] {
            let (w, h) = stag.dims(4, 3);
            let z =
                VectorField::from_components(&g, stag, vec![1.0; w * h], vec![0.0; w * h]).unwrap();
            let tr = boundary_trace(&z);
            assert_eq!(tr.len(), 14);
            for (f, v) in tr.iter() {
                let expect = match f.normal {
                    Normal::East => 1.0,
                    Normal::West => -1.0,
                    _ => 0.0,
                };
                assert_eq!(v, expect);
            }
        }
    }

    #[test]
    fn truncation_contracts_tv_and_splits_anisotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = Grid2D::unit_square(16).unwrap();
        for _ in 0..20 {
            let u = random_field(&g, &mut rng).scale(3.0);
            for k in [0.1, 0.5, 1.0, 2.5] {
                let tk = u.map(|s| trunc(k, s).unwrap());
                let gku = u.map(|s| gk(k, s).unwrap());
                for opts in [TvOptions::default(), TvOptions::anisotropic()] {
                    assert!(tv(&tk, opts) <= tv(&u, opts) + 1e-12);
                }
                let a = TvOptions::anisotropic();
                let split = tv(&tk, a) + tv(&gku, a);
                assert!((split - tv(&u, a)).abs() <= 1e-10);
            }
        }
    }
}
