//! Time marching: implicit Euler with proximal steps, and the p-Laplacian
//! continuation path.

use crate::error::{Error, Result};
use crate::field::{ScalarField, Staggering, VectorField};
use crate::grid::Grid2D;
use crate::scalar::Real;
use crate::solver::ladder::{auto_level, data_ladder, identity_ladder, Ladder};
use crate::solver::plap::{plap_step_at, regularized_direction, PlapOptions};
use crate::solver::rof::{InnerOptions, RofSolver};
use crate::solver::source::Source;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LadderLevel {
    /// Use the data as given.
    #[default]
    None,
    Level(u32),
    /// Smallest power of two meeting the ladder error budget.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Snapshots<T> {
    /// Every step, including `t = 0`.
    #[default]
    EveryStep,
    /// The first step time at or after each requested time.
    Times(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig<T> {
    pub grid: Grid2D<T>,
    pub final_time: T,
    pub tau: T,
    pub f: Source<T>,
    pub u0: ScalarField<T>,
    pub ladder: LadderLevel,
    pub inner: InnerOptions<T>,
    pub snapshots: Snapshots<T>,
}

impl<T: Real> SolveConfig<T> {
    /// Homogeneous problem from `u0`, raw data, every step recorded.
    pub fn new(u0: ScalarField<T>, final_time: T, tau: T) -> Self {
        Self {
            grid: u0.grid().clone(),
            final_time,
            tau,
            f: Source::zero(u0.grid()),
            u0,
            ladder: LadderLevel::None,
            inner: InnerOptions::default(),
            snapshots: Snapshots::EveryStep,
        }
    }

    pub fn with_source(mut self, f: Source<T>) -> Self {
        self.f = f;
        self
    }

    pub fn with_ladder(mut self, ladder: LadderLevel) -> Self {
        self.ladder = ladder;
        self
    }

    pub fn with_inner(mut self, inner: InnerOptions<T>) -> Self {
        self.inner = inner;
        self
    }

    pub fn with_snapshots(mut self, snapshots: Snapshots<T>) -> Self {
        self.snapshots = snapshots;
        self
    }

    /// Number of steps; `final_time` must be a multiple of `tau`.
    pub fn steps(&self) -> Result<usize> {
        let m = (self.final_time / self.tau).round();
        if (m * self.tau - self.final_time).abs() > T::lit(1e-6) * self.tau {
            return Err(Error::InvalidArgument(format!(
                "final_time {} is not a multiple of tau {}",
                self.final_time, self.tau
            )));
        }
        Ok(m.to_usize().expect("step count"))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.final_time > T::zero() && self.final_time.is_finite()) {
            return Err(Error::InvalidArgument("final_time must be > 0".into()));
        }
        if !(self.tau > T::zero() && self.tau < self.final_time) {
            return Err(Error::InvalidArgument("need 0 < tau < final_time".into()));
        }
        self.grid.check_same(self.u0.grid())?;
        self.grid.check_same(self.f.grid())?;
        self.inner.validate()?;
        if let LadderLevel::Level(0) = self.ladder {
            return Err(Error::InvalidArgument("ladder level must be >= 1".into()));
        }
        if let Snapshots::Times(ts) = &self.snapshots {
            if ts
                .iter()
                .any(|&t| !(t >= T::zero() && t <= self.final_time))
            {
                return Err(Error::InvalidArgument(
                    "snapshot times must lie in [0, final_time]".into(),
                ));
            }
        }
        self.steps().map(|_| ())
    }

    /// The data the stepper actually uses.
    pub fn resolve_ladder(&self) -> Result<Ladder<T>> {
        match self.ladder {
            LadderLevel::None => Ok(identity_ladder(&self.f, &self.u0)),
            LadderLevel::Level(n) => data_ladder(&self.f, &self.u0, n),
            LadderLevel::Auto => data_ladder(
                &self.f,
                &self.u0,
                auto_level(&self.f, &self.u0, self.final_time),
            ),
        }
    }

    fn recorded_steps(&self, steps: usize) -> Vec<bool> {
        match &self.snapshots {
            Snapshots::EveryStep => vec![true; steps + 1],
            Snapshots::Times(ts) => {
                let mut keep = vec![false; steps + 1];
                for &t in ts {
                    let m = (t / self.tau - T::lit(1e-9)).ceil().max(T::zero());
                    keep[m.to_usize().expect("index").min(steps)] = true;
                }
                keep
            }
        }
    }
}

/// Source slice used by step `m` (over `[(m−1)τ, mτ]`).
pub fn step_slice<T: Real>(f: &Source<T>, tau: T, m: usize) -> ScalarField<T> {
    let t1 = T::from_usize_lossy(m) * tau;
    f.average(t1 - tau, t1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog<T> {
    pub step: usize,
    pub time: T,
    /// Inner iterations (dual ascent or conjugate gradients).
    pub iters: usize,
    /// Final relative duality gap, or relative residual for the p path.
    pub gap: T,
}

/// States and dual fields at the recorded times, with the data that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    grid: Grid2D<T>,
    tau: T,
    times: Vec<T>,
    states: Vec<ScalarField<T>>,
    duals: Vec<VectorField<T>>,
    ladder: Ladder<T>,
    step_log: Vec<StepLog<T>>,
}

impl<T: Real> Trajectory<T> {
    /// Checks the trajectory invariants: increasing times, matching counts,
    /// shared grid, unit-ball extended duals.
    pub fn new(
        tau: T,
        times: Vec<T>,
        states: Vec<ScalarField<T>>,
        duals: Vec<VectorField<T>>,
        ladder: Ladder<T>,
        step_log: Vec<StepLog<T>>,
    ) -> Result<Self> {
        let grid = ladder.u0.grid().clone();
        if times.len() != states.len() || times.len() != duals.len() {
            return Err(Error::InvalidArgument(
                "trajectory needs one state and one dual per time".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "trajectory times must increase strictly".into(),
            ));
        }
        for (s, z) in states.iter().zip(&duals) {
            grid.check_same(s.grid())?;
            grid.check_same(z.grid())?;
            if z.staggering() != Staggering::Extended {
                return Err(Error::InvalidStaggering {
                    expected: Staggering::Extended.as_str(),
                    found: z.staggering().as_str(),
                });
            }
        }
        let duals = duals
            .into_iter()
            .map(|z| z.into_unit_ball())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            tau,
            times,
            states,
            duals,
            ladder,
            step_log,
        })
    }

    pub fn grid(&self) -> &Grid2D<T> {
        &self.grid
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn states(&self) -> &[ScalarField<T>] {
        &self.states
    }

    pub fn duals(&self) -> &[VectorField<T>] {
        &self.duals
    }

    pub fn ladder(&self) -> &Ladder<T> {
        &self.ladder
    }

    /// The source actually used (`f_n`).
    pub fn source(&self) -> &Source<T> {
        &self.ladder.f
    }

    pub fn step_log(&self) -> &[StepLog<T>] {
        &self.step_log
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &ScalarField<T> {
        self.states.last().expect("nonempty trajectory")
    }

    /// Whether the snapshots are exactly `0, τ, 2τ, …`.
    pub fn is_every_step(&self) -> bool {
        self.times.iter().enumerate().all(|(m, &t)| {
            (t - T::from_usize_lossy(m) * self.tau).abs() <= T::lit(1e-9) * self.tau.max(t)
        })
    }

    /// Piecewise-constant reconstruction: the first state at or after `t`.
    pub fn state_at(&self, t: T) -> &ScalarField<T> {
        let m = self
            .times
            .partition_point(|&s| s < t - T::lit(1e-12) * self.tau)
            .min(self.len() - 1);
        &self.states[m]
    }

    /// `max_t ‖u(t) − v(t)‖_1` over shared snapshot times.
    pub fn max_l1_distance(&self, other: &Self) -> Result<T> {
        if self.len() != other.len()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(a, b)| (*a - *b).abs() > T::lit(1e-9) * self.tau)
        {
            return Err(Error::TimeGridMismatch(
                "trajectories sampled at different times".into(),
            ));
        }
        let mut worst = T::zero();
        for (a, b) in self.states.iter().zip(&other.states) {
            worst = worst.max(a.sub(b)?.l1_norm());
        }
        Ok(worst)
    }
}

/// Marches the proximal steps from the ladder data.
pub fn evolve<T: Real>(config: &SolveConfig<T>) -> Result<Trajectory<T>> {
    config.validate()?;
    let steps = config.steps()?;
    let ladder = config.resolve_ladder()?;
    let keep = config.recorded_steps(steps);
    let mut solver = RofSolver::new(&config.grid, config.inner)?;
    let zero_dual = VectorField::zeros(&config.grid, Staggering::Extended);

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut duals = Vec::new();
    let mut log = Vec::with_capacity(steps);
    if keep[0] {
        times.push(T::zero());
        states.push(ladder.u0.clone());
        duals.push(zero_dual);
    }
    let mut u = ladder.u0.clone();
    for m in 1..=steps {
        let t = T::from_usize_lossy(m) * config.tau;
        let f = step_slice(&ladder.f, config.tau, m);
        let r = solver.step(&u, &f, config.tau)?;
        if !r.converged {
            return Err(Error::InnerNoConvergence {
                step: m,
                time: t.as_f64(),
                gap: r.gap.as_f64(),
                iters: r.iters,
            });
        }
        log.push(StepLog {
            step: m,
            time: t,
            iters: r.iters,
            gap: r.gap,
        });
        if keep[m] {
            times.push(t);
            states.push(r.u_next.clone());
            duals.push(r.z);
        }
        u = r.u_next;
    }
    Trajectory::new(config.tau, times, states, duals, ladder, log)
}

/// Marches semi-implicit p-Laplacian steps at a fixed exponent. The stored
/// duals are the regularized directions `∇u / sqrt(|∇u|² + ε²)`.
pub fn evolve_plap<T: Real>(
    config: &SolveConfig<T>,
    p: T,
    opts: PlapOptions<T>,
) -> Result<Trajectory<T>> {
    config.validate()?;
    let steps = config.steps()?;
    let ladder = config.resolve_ladder()?;
    let keep = config.recorded_steps(steps);
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut duals = Vec::new();
    let mut log = Vec::with_capacity(steps);
    if keep[0] {
        times.push(T::zero());
        states.push(ladder.u0.clone());
        duals.push(regularized_direction(&ladder.u0, opts.eps_reg));
    }
    let mut u = ladder.u0.clone();
    for m in 1..=steps {
        let t = T::from_usize_lossy(m) * config.tau;
        let f = step_slice(&ladder.f, config.tau, m);
        let s = plap_step_at(&u, &f, config.tau, p, opts, m)?;
        log.push(StepLog {
            step: m,
            time: t,
            iters: s.cg_iters,
            gap: s.residual,
        });
        if keep[m] {
            times.push(t);
            states.push(s.u_next.clone());
            duals.push(regularized_direction(&s.u_next, opts.eps_reg));
        }
        u = s.u_next;
    }
    Trajectory::new(config.tau, times, states, duals, ladder, log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Continuation<T> {
    /// Trajectory at the last exponent of the schedule.
    pub trajectory: Trajectory<T>,
    /// `(p_i, max_t ‖u_{p_i}(t) − u_{p_{i−1}}(t)‖_1)` for `i >= 1`.
    pub distances: Vec<(T, T)>,
}

/// Runs [`evolve_plap`] along a strictly decreasing schedule in `(1, 2]`.
pub fn p_continuation<T: Real>(
    config: &SolveConfig<T>,
    schedule: &[T],
    opts: PlapOptions<T>,
) -> Result<Continuation<T>> {
    if schedule.is_empty()
        || schedule
            .iter()
            .any(|&p| !(p > T::one() && p <= T::lit(2.0)))
        || schedule.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(Error::InvalidArgument(
            "p schedule must be nonempty, strictly decreasing, within (1, 2]".into(),
        ));
    }
    let mut prev: Option<Trajectory<T>> = None;
    let mut distances = Vec::new();
    for &p in schedule {
        let traj = evolve_plap(config, p, opts)?;
        if let Some(q) = &prev {
            distances.push((p, traj.max_l1_distance(q)?));
        }
        prev = Some(traj);
    }
    Ok(Continuation {
        trajectory: prev.expect("nonempty schedule"),
        distances,
    })
}
