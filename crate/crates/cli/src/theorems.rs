//! The `theorems` subcommand: experiments from one run file, run on a
//! small worker pool and reported in request order.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use tvflow::grid::Grid2D;
use tvflow::io::config::EXPERIMENTS;
use tvflow::io::{write_atomic, FieldSpec, RunConfig};
use tvflow::lab::{
    boundedness_check, comparison_experiment, contraction_experiment, decay_experiment,
    decay_exponents, gn_check, l1_bound_check, regularity_cauchy_experiment, uniqueness_proxy,
    ExperimentReport, LabConfig, ProblemData,
};
use tvflow::solver::{evolve, Source, Trajectory};

use crate::{lab_config, read_config, stage, usage, Failure, Outcome};

const REGULARITY_R: f64 = 1.5;
const REGULARITY_LEVELS: (u32, u32) = (4, 8);
const DECAY_TRIPLE: (u32, f64, f64) = (2, 1.5, 1.2);

struct Context {
    cfg: RunConfig,
    base: PathBuf,
    lab: LabConfig,
    first: ProblemData,
    second: ProblemData,
}

impl Context {
    fn evolve_first(&self) -> tvflow::Result<Trajectory<f64>> {
        evolve(&self.cfg.to_solve_config(&self.base)?)
    }

    fn realize_on(
        &self,
        spec: Option<&FieldSpec>,
        grid: &Grid2D<f64>,
    ) -> tvflow::Result<Source<f64>> {
        Ok(match spec {
            None => Source::zero(grid),
            Some(s) => Source::constant(s.realize(grid, &self.base)?),
        })
    }

    /// The run on its own grid and, for synthetic data, once refined.
    fn gn_levels(&self) -> tvflow::Result<Vec<Trajectory<f64>>> {
        let mut out = vec![self.evolve_first()?];
        let synthetic = |s: Option<&FieldSpec>| !matches!(s, Some(FieldSpec::File(_)));
        if synthetic(Some(&self.cfg.u0)) && synthetic(self.cfg.f.as_ref()) {
            let coarse = self.cfg.grid()?;
            let grid = Grid2D::new(2 * coarse.nx(), 2 * coarse.ny(), coarse.h() / 2.0)?;
            let u0 = self.cfg.u0.realize(&grid, &self.base)?;
            let f = self.realize_on(self.cfg.f.as_ref(), &grid)?;
            let fine = LabConfig {
                tau: self.lab.tau / 2.0,
                ..self.lab.clone()
            };
            let solve = tvflow::solver::SolveConfig::new(u0, fine.final_time, fine.tau)
                .with_source(f)
                .with_inner(fine.inner)
                .with_ladder(fine.ladder);
            out.push(evolve(&solve)?);
        }
        Ok(out)
    }

    fn run(&self, name: &str) -> tvflow::Result<ExperimentReport> {
        match name {
            "comparison" => comparison_experiment(&self.first, &self.second, &self.lab),
            "contraction" => contraction_experiment(&self.first, &self.second, &self.lab),
            "l1_bound" => l1_bound_check(&self.evolve_first()?, &self.first.f),
            "boundedness" => boundedness_check(&self.evolve_first()?, &self.first.f),
            "regularity" => {
                let (n, m) = REGULARITY_LEVELS;
                regularity_cauchy_experiment(&self.first, REGULARITY_R, n, m, &self.lab)
            }
            "gn" => {
                let trajs = self.gn_levels()?;
                let refs: Vec<&Trajectory<f64>> = trajs.iter().collect();
                gn_check(&refs, self.cfg.k_levels()[0], &self.lab)
            }
            "decay" => {
                let (n, r0, r) = DECAY_TRIPLE;
                decay_experiment(&self.first.u0, &decay_exponents(n, r0, r)?, &self.lab)
            }
            "uniqueness" => uniqueness_proxy(
                &self.first,
                &self.lab,
                &self.cfg.p_schedule(),
                self.cfg.plap(),
            ),
            other => unreachable!("unchecked experiment {other}"),
        }
    }
}

fn stage_name(name: &str) -> &'static str {
    EXPERIMENTS
        .iter()
        .find(|e| **e == name)
        .copied()
        .unwrap_or("theorems")
}

pub(crate) fn run(config: &Path, only: Option<Vec<String>>, output: Option<PathBuf>) -> Outcome {
    let (cfg, base) = read_config(config)?;
    let names: Vec<String> = match only.or_else(|| cfg.experiments.clone()) {
        Some(v) => v,
        None => EXPERIMENTS.iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = names.iter().find(|n| !EXPERIMENTS.contains(&n.as_str())) {
        return Err(Failure::Usage(format!(
            "unknown experiment {bad:?} (known: {})",
            EXPERIMENTS.join(",")
        )));
    }
    let solve = usage(cfg.to_solve_config(&base))?;
    let (u0_2, f_2) = usage(cfg.second_data(&base))?;
    let ctx = Context {
        lab: lab_config(&cfg),
        first: ProblemData::new(solve.u0, solve.f),
        second: ProblemData::new(u0_2, f_2),
        cfg,
        base,
    };
    let dir = output.unwrap_or_else(|| ctx.cfg.output_dir());
    stage("write", std::fs::create_dir_all(&dir).map_err(Into::into))?;

    let slots: Vec<Mutex<Option<tvflow::Result<ExperimentReport>>>> =
        names.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = ctx.cfg.threads().clamp(1, names.len().max(1));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= names.len() {
                    break;
                }
                let r = ctx.run(&names[i]);
                *slots[i].lock().expect("slot") = Some(r);
            });
        }
    });

    let mut all_pass = true;
    let mut first_error = None;
    for (name, slot) in names.iter().zip(slots) {
        match slot.into_inner().expect("slot").expect("filled") {
            Ok(report) => {
                println!("{}", report.summary_line());
                all_pass &= report.pass;
                let path = dir.join(format!("{name}.csv"));
                stage("write", write_atomic(&path, report.to_csv().as_bytes()))?;
            }
            Err(e) => {
                println!("ERROR {name}: {e}");
                first_error.get_or_insert(Failure::Stage(stage_name(name), e));
            }
        }
    }
    match first_error {
        Some(f) => Err(f),
        None if all_pass => Ok(()),
        None => Err(Failure::Checks),
    }
}
