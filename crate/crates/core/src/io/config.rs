//! `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment. Required keys are
//! `nx`, `ny`, `final_time`, `tau` and `u0`; everything else has a default.
//! Field-valued keys (`u0`, `f`, `u0_2`, `f_2`, `pair_u0`, `pair_f`) take a
//! shape description or a file reference:
//!
//! ```text
//! disk <cx> <cy> <radius> <height>
//! square <cx> <cy> <side> <height>
//! step <position> <height>
//! constant <value>
//! random <seed> <amplitude>
//! spike <cx> <cy> <exponent> <amplitude>
//! file:<path>
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::error::Result;
use crate::field::{make_field, ScalarField, Shape};
use crate::grid::Grid2D;
use crate::solver::{
    InnerMethod, InnerOptions, LadderLevel, PlapOptions, Snapshots, SolveConfig, Source,
};

/// Environment variable overriding the `output` key.
pub const OUTPUT_ENV: &str = "TVFLOW_OUT";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("range violation: {key}: need {constraint}")]
    Range { key: String, constraint: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("{key}: {msg}")]
    Value { key: String, msg: String },
}

/// Canonical key order; also the order [`RunConfig::serialize`] writes.
pub const KEYS: &[&str] = &[
    "nx",
    "ny",
    "h",
    "final_time",
    "tau",
    "u0",
    "f",
    "ladder",
    "solver",
    "inner_method",
    "inner_gap_tol",
    "inner_max_iters",
    "inner_check_every",
    "p_schedule",
    "eps_reg",
    "snapshots",
    "output",
    "seed",
    "threads",
    "experiments",
    "u0_2",
    "f_2",
    "k_levels",
    "pair_u0",
    "pair_f",
];

const REQUIRED: &[&str] = &["nx", "ny", "final_time", "tau", "u0"];

/// Experiment names accepted by `experiments`.
pub const EXPERIMENTS: &[&str] = &[
    "comparison",
    "contraction",
    "l1_bound",
    "boundedness",
    "regularity",
    "gn",
    "decay",
    "uniqueness",
];

/// A field description as written in the file.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Shape(Shape<f64>),
    File(PathBuf),
}

impl FieldSpec {
    /// Samples the shape or loads the file (relative to `base`).
    pub fn realize(&self, grid: &Grid2D<f64>, base: &Path) -> Result<ScalarField<f64>> {
        match self {
            FieldSpec::Shape(s) => make_field(grid, s),
            FieldSpec::File(p) => crate::io::snapshot::load_field(&base.join(p), grid),
        }
    }
}

fn parse_nums(key: &str, words: &[&str], n: usize) -> Result<Vec<f64>, ConfigError> {
    if words.len() != n {
        return Err(ConfigError::Value {
            key: key.into(),
            msg: format!("expected {n} numbers, found {}", words.len()),
        });
    }
    words.iter().map(|w| parse_num(key, w)).collect()
}

fn parse_num<T: FromStr>(key: &str, w: &str) -> Result<T, ConfigError> {
    w.parse().map_err(|_| ConfigError::Value {
        key: key.into(),
        msg: format!("cannot parse `{w}`"),
    })
}

impl FieldSpec {
    fn parse(key: &str, value: &str) -> Result<Self, ConfigError> {
        if let Some(p) = value.strip_prefix("file:") {
            if p.trim().is_empty() {
                return Err(ConfigError::Value {
                    key: key.into(),
                    msg: "empty file path".into(),
                });
            }
            return Ok(FieldSpec::File(PathBuf::from(p.trim())));
        }
        let words: Vec<&str> = value.split_whitespace().collect();
        let (kind, rest) = words.split_first().ok_or_else(|| ConfigError::Value {
            key: key.into(),
            msg: "empty field description".into(),
        })?;
        let shape = match *kind {
            "disk" => {
                let v = parse_nums(key, rest, 4)?;
                Shape::disk(v[0], v[1], v[2], v[3])
            }
            "square" => {
                let v = parse_nums(key, rest, 4)?;
                Shape::Square {
                    center: (v[0], v[1]),
                    side: v[2],
                    height: v[3],
                }
            }
            "step" => {
                let v = parse_nums(key, rest, 2)?;
                Shape::Step {
                    position: v[0],
                    height: v[1],
                }
            }
            "constant" => Shape::Constant(parse_nums(key, rest, 1)?[0]),
            "random" => {
                if rest.len() != 2 {
                    return Err(ConfigError::Value {
                        key: key.into(),
                        msg: "expected `random <seed> <amplitude>`".into(),
                    });
                }
                Shape::Random {
                    seed: parse_num(key, rest[0])?,
                    amplitude: parse_num(key, rest[1])?,
                }
            }
            "spike" => {
                let v = parse_nums(key, rest, 4)?;
                Shape::Spike {
                    center: (v[0], v[1]),
                    exponent: v[2],
                    amplitude: v[3],
                }
            }
            other => {
                return Err(ConfigError::Value {
                    key: key.into(),
                    msg: format!("unknown shape `{other}`"),
                })
            }
        };
        Ok(FieldSpec::Shape(shape))
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::File(p) => write!(f, "file:{}", p.display()),
            FieldSpec::Shape(s) => match s {
                Shape::Disk {
                    center,
                    radius,
                    height,
                } => write!(f, "disk {} {} {} {}", center.0, center.1, radius, height),
                Shape::Square {
                    center,
                    side,
                    height,
                } => write!(f, "square {} {} {} {}", center.0, center.1, side, height),
                Shape::Step { position, height } => write!(f, "step {position} {height}"),
                Shape::Constant(c) => write!(f, "constant {c}"),
                Shape::Random { seed, amplitude } => write!(f, "random {seed} {amplitude}"),
                Shape::Spike {
                    center,
                    exponent,
                    amplitude,
                } => write!(
                    f,
                    "spike {} {} {} {}",
                    center.0, center.1, exponent, amplitude
                ),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Rof,
    Plap,
}

/// A validated configuration. Optional keys stay `None` when absent so the
/// file can be written back as it was given.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub h: Option<f64>,
    pub final_time: f64,
    pub tau: f64,
    pub u0: FieldSpec,
    pub f: Option<FieldSpec>,
    pub ladder: Option<LadderLevel>,
    pub solver: Option<SolverKind>,
    pub inner_method: Option<InnerMethod>,
    pub inner_gap_tol: Option<f64>,
    pub inner_max_iters: Option<usize>,
    pub inner_check_every: Option<usize>,
    pub p_schedule: Option<Vec<f64>>,
    pub eps_reg: Option<f64>,
    pub snapshots: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub experiments: Option<Vec<String>>,
    pub u0_2: Option<FieldSpec>,
    pub f_2: Option<FieldSpec>,
    pub k_levels: Option<Vec<f64>>,
    pub pair_u0: Option<FieldSpec>,
    pub pair_f: Option<FieldSpec>,
}

fn range(key: &str, ok: bool, constraint: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Range {
            key: key.into(),
            constraint: constraint.into(),
        })
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value.split(',').map(|w| parse_num(key, w.trim())).collect()
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Strips comments and blank lines, trims around `=` and collapses runs of
/// whitespace inside values, and orders lines by the canonical key order
/// (unknown keys last, in input order). Lists are written without spaces
/// after commas.
pub fn normalize(text: &str) -> String {
    let mut lines: Vec<(usize, String, String)> = Vec::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            lines.push((usize::MAX, line.to_string(), String::new()));
            continue;
        };
        let key = k.trim().to_string();
        let mut value = v.split_whitespace().collect::<Vec<_>>().join(" ");
        value = value.replace(", ", ",").replace(" ,", ",");
        let rank = KEYS.iter().position(|&x| x == key).unwrap_or(usize::MAX);
        lines.push((rank, key, value));
    }
    lines.sort_by_key(|(rank, _, _)| *rank);
    lines
        .into_iter()
        .map(|(_, k, v)| {
            if v.is_empty() {
                format!("{k}\n")
            } else {
                format!("{k} = {v}\n")
            }
        })
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values: Vec<Option<(usize, String)>> = vec![None; KEYS.len()];
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: line_no })?;
            let key = k.trim();
            let slot =
                KEYS.iter()
                    .position(|&x| x == key)
                    .ok_or_else(|| ConfigError::UnknownKey {
                        line: line_no,
                        key: key.to_string(),
                    })?;
            if values[slot].is_some() {
                return Err(ConfigError::DuplicateKey {
                    line: line_no,
                    key: key.to_string(),
                });
            }
            values[slot] = Some((line_no, v.trim().to_string()));
        }
        let get = |key: &str| -> Option<&str> {
            let i = KEYS.iter().position(|&x| x == key).expect("known key");
            values[i].as_ref().map(|(_, v)| v.as_str())
        };
        for &key in REQUIRED {
            if get(key).is_none() {
                return Err(ConfigError::MissingKey(key));
            }
        }
        let req = |key: &'static str| get(key).expect("checked above");

        let nx: usize = parse_num("nx", req("nx"))?;
        range("nx", nx >= 2, "nx >= 2")?;
        let ny: usize = parse_num("ny", req("ny"))?;
        range("ny", ny >= 2, "ny >= 2")?;
        let h = get("h").map(|v| parse_num::<f64>("h", v)).transpose()?;
        if let Some(h) = h {
            range("h", h > 0.0 && h.is_finite(), "h > 0")?;
        }
        let final_time: f64 = parse_num("final_time", req("final_time"))?;
        range(
            "final_time",
            final_time > 0.0 && final_time.is_finite(),
            "final_time > 0",
        )?;
        let tau: f64 = parse_num("tau", req("tau"))?;
        range("tau", tau > 0.0, "tau > 0")?;
        range("tau", tau < final_time, "tau < final_time")?;
        let steps = (final_time / tau).round();
        range(
            "tau",
            (steps * tau - final_time).abs() <= 1e-6 * tau,
            "final_time a multiple of tau",
        )?;

        let field = |key: &str| get(key).map(|v| FieldSpec::parse(key, v)).transpose();
        let u0 = FieldSpec::parse("u0", req("u0"))?;

        let ladder = get("ladder")
            .map(|v| match v {
                "none" => Ok(LadderLevel::None),
                "auto" => Ok(LadderLevel::Auto),
                n => {
                    let n: u32 = parse_num("ladder", n)?;
                    range("ladder", n >= 1, "ladder >= 1 or none or auto")?;
                    Ok(LadderLevel::Level(n))
                }
            })
            .transpose()?;
        let solver = get("solver")
            .map(|v| match v {
                "rof" => Ok(SolverKind::Rof),
                "plap" => Ok(SolverKind::Plap),
                other => Err(ConfigError::Value {
                    key: "solver".into(),
                    msg: format!("unknown solver `{other}` (rof or plap)"),
                }),
            })
            .transpose()?;
        let inner_method = get("inner_method")
            .map(|v| match v {
                "accelerated" => Ok(InnerMethod::Accelerated),
                "projected" => Ok(InnerMethod::Projected),
                other => Err(ConfigError::Value {
                    key: "inner_method".into(),
                    msg: format!("unknown method `{other}` (accelerated or projected)"),
                }),
            })
            .transpose()?;
        let inner_gap_tol = get("inner_gap_tol")
            .map(|v| parse_num::<f64>("inner_gap_tol", v))
            .transpose()?;
        if let Some(g) = inner_gap_tol {
            range("inner_gap_tol", g > 0.0, "inner_gap_tol > 0")?;
        }
        let inner_max_iters = get("inner_max_iters")
            .map(|v| parse_num::<usize>("inner_max_iters", v))
            .transpose()?;
        if let Some(m) = inner_max_iters {
            range("inner_max_iters", m >= 1, "inner_max_iters >= 1")?;
        }
        let inner_check_every = get("inner_check_every")
            .map(|v| parse_num::<usize>("inner_check_every", v))
            .transpose()?;
        if let Some(m) = inner_check_every {
            range("inner_check_every", m >= 1, "inner_check_every >= 1")?;
        }
        let p_schedule = get("p_schedule")
            .map(|v| parse_list("p_schedule", v))
            .transpose()?;
        if let Some(ps) = &p_schedule {
            range(
                "p_schedule",
                !ps.is_empty()
                    && ps.iter().all(|&p| p > 1.0 && p <= 2.0)
                    && ps.windows(2).all(|w| w[1] < w[0]),
                "strictly decreasing exponents in (1, 2]",
            )?;
        }
        let eps_reg = get("eps_reg")
            .map(|v| parse_num::<f64>("eps_reg", v))
            .transpose()?;
        if let Some(e) = eps_reg {
            range("eps_reg", e > 0.0, "eps_reg > 0")?;
        }
        let snapshots = get("snapshots")
            .and_then(|v| (v != "all").then(|| parse_list("snapshots", v)))
            .transpose()?;
        if let Some(ts) = &snapshots {
            range(
                "snapshots",
                ts.iter().all(|&t| (0.0..=final_time).contains(&t)),
                "snapshot times in [0, final_time]",
            )?;
        }
        let output = get("output").map(PathBuf::from);
        let seed = get("seed")
            .map(|v| parse_num::<u64>("seed", v))
            .transpose()?;
        let threads = get("threads")
            .map(|v| parse_num::<usize>("threads", v))
            .transpose()?;
        if let Some(t) = threads {
            range("threads", t >= 1, "threads >= 1")?;
        }
        let experiments = get("experiments")
            .map(|v| {
                v.split(',')
                    .map(|w| {
                        let w = w.trim();
                        if EXPERIMENTS.contains(&w) {
                            Ok(w.to_string())
                        } else {
                            Err(ConfigError::Value {
                                key: "experiments".into(),
                                msg: format!("unknown experiment `{w}`"),
                            })
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;
        let k_levels = get("k_levels")
            .map(|v| parse_list("k_levels", v))
            .transpose()?;
        if let Some(ks) = &k_levels {
            range(
                "k_levels",
                !ks.is_empty() && ks.iter().all(|&k| k > 0.0 && k.is_finite()),
                "levels > 0",
            )?;
        }

        Ok(Self {
            nx,
            ny,
            h,
            final_time,
            tau,
            u0,
            f: field("f")?,
            ladder,
            solver,
            inner_method,
            inner_gap_tol,
            inner_max_iters,
            inner_check_every,
            p_schedule,
            eps_reg,
            snapshots,
            output,
            seed,
            threads,
            experiments,
            u0_2: field("u0_2")?,
            f_2: field("f_2")?,
            k_levels,
            pair_u0: field("pair_u0")?,
            pair_f: field("pair_f")?,
        })
    }

    /// Writes the keys that were set, in canonical order.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("nx", self.nx.to_string());
        put("ny", self.ny.to_string());
        if let Some(h) = self.h {
            put("h", h.to_string());
        }
        put("final_time", self.final_time.to_string());
        put("tau", self.tau.to_string());
        put("u0", self.u0.to_string());
        if let Some(f) = &self.f {
            put("f", f.to_string());
        }
        if let Some(l) = self.ladder {
            put(
                "ladder",
                match l {
                    LadderLevel::None => "none".into(),
                    LadderLevel::Auto => "auto".into(),
                    LadderLevel::Level(n) => n.to_string(),
                },
            );
        }
        if let Some(s) = self.solver {
            put(
                "solver",
                match s {
                    SolverKind::Rof => "rof",
                    SolverKind::Plap => "plap",
                }
                .into(),
            );
        }
        if let Some(m) = self.inner_method {
            put("inner_method", m.as_str().into());
        }
        if let Some(g) = self.inner_gap_tol {
            put("inner_gap_tol", g.to_string());
        }
        if let Some(m) = self.inner_max_iters {
            put("inner_max_iters", m.to_string());
        }
        if let Some(m) = self.inner_check_every {
            put("inner_check_every", m.to_string());
        }
        if let Some(ps) = &self.p_schedule {
            put("p_schedule", fmt_list(ps));
        }
        if let Some(e) = self.eps_reg {
            put("eps_reg", e.to_string());
        }
        if let Some(ts) = &self.snapshots {
            put("snapshots", fmt_list(ts));
        }
        if let Some(o) = &self.output {
            put("output", o.display().to_string());
        }
        if let Some(s) = self.seed {
            put("seed", s.to_string());
        }
        if let Some(t) = self.threads {
            put("threads", t.to_string());
        }
        if let Some(e) = &self.experiments {
            put("experiments", e.join(","));
        }
        for (k, v) in [("u0_2", &self.u0_2), ("f_2", &self.f_2)] {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        if let Some(ks) = &self.k_levels {
            put("k_levels", fmt_list(ks));
        }
        for (k, v) in [("pair_u0", &self.pair_u0), ("pair_f", &self.pair_f)] {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        out
    }

    pub fn grid(&self) -> Result<Grid2D<f64>> {
        Grid2D::new(self.nx, self.ny, self.h.unwrap_or(1.0 / self.nx as f64))
    }

    pub fn inner(&self) -> InnerOptions<f64> {
        let d = InnerOptions::default();
        InnerOptions {
            max_iters: self.inner_max_iters.unwrap_or(d.max_iters),
            gap_tol: self.inner_gap_tol.unwrap_or(d.gap_tol),
            dual_step: None,
            method: self.inner_method.unwrap_or(d.method),
            check_every: self.inner_check_every.unwrap_or(d.check_every),
        }
    }

    pub fn plap(&self) -> PlapOptions<f64> {
        let d = PlapOptions::default();
        PlapOptions {
            eps_reg: self.eps_reg.unwrap_or(d.eps_reg),
            ..d
        }
    }

    pub fn solver(&self) -> SolverKind {
        self.solver.unwrap_or(SolverKind::Rof)
    }

    /// Decreasing exponents for the p-Laplacian path.
    pub fn p_schedule(&self) -> Vec<f64> {
        self.p_schedule
            .clone()
            .unwrap_or_else(|| vec![1.5, 1.3, 1.2, 1.1, 1.05])
    }

    pub fn k_levels(&self) -> Vec<f64> {
        self.k_levels
            .clone()
            .unwrap_or_else(|| vec![0.25, 1.0, 4.0])
    }

    pub fn threads(&self) -> usize {
        self.threads.unwrap_or(1)
    }

    /// `$TVFLOW_OUT`, else the `output` key, else `./tvflow-out`.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self
                .output
                .clone()
                .unwrap_or_else(|| PathBuf::from("tvflow-out")),
        }
    }

    fn source(
        &self,
        spec: Option<&FieldSpec>,
        grid: &Grid2D<f64>,
        base: &Path,
    ) -> Result<Source<f64>> {
        Ok(match spec {
            None => Source::zero(grid),
            Some(s) => Source::constant(s.realize(grid, base)?),
        })
    }

    /// Builds the solver input; relative file references resolve against
    /// `base`.
    pub fn to_solve_config(&self, base: &Path) -> Result<SolveConfig<f64>> {
        let grid = self.grid()?;
        let u0 = self.u0.realize(&grid, base)?;
        let f = self.source(self.f.as_ref(), &grid, base)?;
        let snapshots = match &self.snapshots {
            None => Snapshots::EveryStep,
            Some(ts) => Snapshots::Times(ts.clone()),
        };
        let cfg = SolveConfig::new(u0, self.final_time, self.tau)
            .with_source(f)
            .with_ladder(self.ladder.unwrap_or_default())
            .with_inner(self.inner())
            .with_snapshots(snapshots);
        cfg.validate()?;
        Ok(cfg)
    }

    /// The second datum of a pair experiment: `u0_2`/`f_2` where given,
    /// otherwise the first datum.
    pub fn second_data(&self, base: &Path) -> Result<(ScalarField<f64>, Source<f64>)> {
        let grid = self.grid()?;
        let u0 = self
            .u0_2
            .as_ref()
            .unwrap_or(&self.u0)
            .realize(&grid, base)?;
        let f = self.source(self.f_2.as_ref().or(self.f.as_ref()), &grid, base)?;
        Ok((u0, f))
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}
