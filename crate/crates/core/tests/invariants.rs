use proptest::prelude::*;

use tvflow::calculus::{boundary_flux, divergence, gradient, interior_pairing};
use tvflow::field::{make_field, ScalarField, Shape, Staggering, VectorField};
use tvflow::grid::Grid2D;
use tvflow::io::{load_trajectory, save_trajectory};
use tvflow::lab::{boundedness_check, l1_bound_check};
use tvflow::solver::{evolve, rof_step, InnerOptions, SolveConfig, Source};

fn grid_and_values() -> impl Strategy<Value = (usize, usize, f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..12, 2usize..12, 0.01f64..1.0).prop_flat_map(|(nx, ny, h)| {
        let e = (nx + 1) * (ny + 1);
        (
            Just(nx),
            Just(ny),
            Just(h),
            prop::collection::vec(-5.0f64..5.0, nx * ny),
            prop::collection::vec(-1.0f64..1.0, e),
            prop::collection::vec(-1.0f64..1.0, e),
        )
    })
}

fn tight() -> InnerOptions<f64> {
    InnerOptions {
        gap_tol: 1e-9,
        max_iters: 200_000,
        ..InnerOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn green_formula_on_any_rectangle((nx, ny, h, u, px, py) in grid_and_values()) {
        let g = Grid2D::new(nx, ny, h).unwrap();
        let u = ScalarField::from_values(&g, u).unwrap();
        let p = VectorField::from_components(&g, Staggering::Extended, px, py).unwrap();
        let area = g.cell_area();
        let d = divergence(&p).unwrap();
        let du = gradient(&u);
        let div_term = area * u.values().iter().zip(d.values()).map(|(a, b)| a * b).sum::<f64>();
        let grad_term = area
            * (du.xs().iter().zip(p.xs()).map(|(a, b)| a * b).sum::<f64>()
                + du.ys().iter().zip(p.ys()).map(|(a, b)| a * b).sum::<f64>());
        let scale = 1.0 + div_term.abs() + grad_term.abs();
        prop_assert!((div_term + grad_term).abs() <= 1e-12 * scale);
        let ip = interior_pairing(&p, &u).unwrap();
        let bf = boundary_flux(&p, &u).unwrap();
        prop_assert!((div_term + ip - bf).abs() <= 1e-12 * (1.0 + ip.abs() + bf.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn proximal_step_certificate(seed in 0u64..1000, tau in 1e-3f64..5e-2, amp in 0.1f64..3.0) {
        let g = Grid2D::<f64>::unit_square(12).unwrap();
        let u = make_field(&g, &Shape::Random { seed, amplitude: amp }).unwrap();
        let f = make_field(&g, &Shape::Random { seed: seed + 1, amplitude: 1.0 }).unwrap();
        let s = rof_step(&u, &f, tau, tight()).unwrap();
        prop_assert!(s.converged);
        prop_assert!(s.z.max_norm() <= 1.0 + 1e-10);
        let w = u.axpy(tau, &f).unwrap();
        let rebuilt = w.axpy(tau, &divergence(&s.z).unwrap()).unwrap();
        prop_assert!(rebuilt.sub(&s.u_next).unwrap().sup_norm() <= 1e-12 * w.sup_norm().max(1.0));
        prop_assert!(s.u_next.sup_norm() <= w.sup_norm() + 1e-8);
    }

    #[test]
    fn trajectories_respect_mass_and_sup_bounds(
        seed in 0u64..1000,
        cx in 0.3f64..0.7,
        r in 0.1f64..0.3,
        height in -2.0f64..2.0,
        src in -1.0f64..1.0,
    ) {
        let g = Grid2D::<f64>::unit_square(12).unwrap();
        let u0 = make_field(&g, &Shape::disk(cx, 0.5, r, height))
            .unwrap()
            .add(&make_field(&g, &Shape::Random { seed, amplitude: 0.2 }).unwrap())
            .unwrap();
        let f = Source::constant(make_field(&g, &Shape::Step { position: cx, height: src }).unwrap());
        let cfg = SolveConfig::new(u0, 0.05, 0.01).with_source(f).with_inner(tight());
        let traj = evolve(&cfg).unwrap();
        prop_assert!(l1_bound_check(&traj, traj.source()).unwrap().pass);
        prop_assert!(boundedness_check(&traj, traj.source()).unwrap().pass);
    }
}

#[test]
fn single_and_double_precision_agree_on_the_disk() {
    let g64 = Grid2D::<f64>::unit_square(16).unwrap();
    let g32 = Grid2D::<f32>::unit_square(16).unwrap();
    let a = evolve(&SolveConfig::new(
        make_field(&g64, &Shape::disk(0.5, 0.5, 0.25, 1.0)).unwrap(),
        0.04,
        0.01,
    ))
    .unwrap();
    let b = evolve(
        &SolveConfig::new(
            make_field(&g32, &Shape::disk(0.5, 0.5, 0.25, 1.0)).unwrap(),
            0.04,
            0.01,
        )
        .with_inner(InnerOptions {
            gap_tol: 1e-4,
            ..InnerOptions::default()
        }),
    )
    .unwrap();
    let diff = a
        .final_state()
        .sub(&b.final_state().to_f64())
        .unwrap()
        .sup_norm();
    assert!(diff < 1e-2, "f32/f64 disagree by {diff}");
}

#[test]
fn stored_trajectory_reproduces_the_run() {
    let g = Grid2D::<f64>::unit_square(10).unwrap();
    let u0 = make_field(&g, &Shape::disk(0.4, 0.6, 0.3, -1.5)).unwrap();
    let f = Source::constant(make_field(&g, &Shape::Constant(0.5)).unwrap());
    let traj = evolve(&SolveConfig::new(u0, 0.03, 0.01).with_source(f.clone())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_trajectory(dir.path(), &traj).unwrap();
    let back = load_trajectory(dir.path(), &f).unwrap();
    assert_eq!(back.times(), traj.times());
    assert_eq!(back.states(), traj.states());
    assert_eq!(back.duals(), traj.duals());
}
