//! Experiment reports and input digests.

use sha2::{Digest, Sha256};

use crate::field::ScalarField;
use crate::solver::Source;

/// Stand-in for an infinite margin (e.g. a bound that is vacuous).
pub const MARGIN_SENTINEL: f64 = 1e300;

/// SHA-256 over a canonical byte stream of the experiment inputs.
#[derive(Debug, Clone, Default)]
pub struct InputDigest {
    hasher: Sha256,
}

impl InputDigest {
    pub fn new(name: &str) -> Self {
        let mut d = Self::default();
        d.hasher.update(name.as_bytes());
        d
    }

    pub fn num(mut self, key: &str, v: f64) -> Self {
        self.hasher.update(key.as_bytes());
        self.hasher.update(v.to_le_bytes());
        self
    }

    pub fn field(mut self, key: &str, u: &ScalarField<f64>) -> Self {
        let g = u.grid();
        self.hasher.update(key.as_bytes());
        self.hasher.update((g.nx() as u64).to_le_bytes());
        self.hasher.update((g.ny() as u64).to_le_bytes());
        self.hasher.update(g.h().to_le_bytes());
        for v in u.values() {
            self.hasher.update(v.to_le_bytes());
        }
        self
    }

    pub fn source(mut self, key: &str, f: &Source<f64>) -> Self {
        for (t, s) in f.starts().iter().zip(f.slices()) {
            self = self.num(key, *t).field(key, s);
        }
        self
    }

    pub fn finish(self) -> String {
        self.hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// A sequence of values under refinement and whether it is monotone.
#[derive(Debug, Clone, PartialEq)]
pub struct Trend {
    pub values: Vec<f64>,
    pub monotone: bool,
}

impl Trend {
    /// Flags the sequence as monotone when it is nonincreasing or
    /// nondecreasing throughout.
    pub fn new(values: Vec<f64>) -> Self {
        let up = values.windows(2).all(|w| w[1] >= w[0]);
        let down = values.windows(2).all(|w| w[1] <= w[0]);
        Self {
            monotone: up || down,
            values,
        }
    }

    pub fn decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    pub digest: String,
    pub pass: bool,
    /// Smallest `allowed − observed` over the table; negative on failure.
    pub worst_margin: f64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub trend: Option<Trend>,
}

impl ExperimentReport {
    pub(crate) fn new(name: &str, digest: String, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            digest,
            pass: true,
            worst_margin: MARGIN_SENTINEL,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            trend: None,
        }
    }

    /// Adds a row whose last two entries are `observed` and `allowed`.
    pub(crate) fn check_row(&mut self, mut row: Vec<f64>, observed: f64, allowed: f64) {
        let margin = (allowed - observed).min(MARGIN_SENTINEL);
        self.worst_margin = self.worst_margin.min(margin);
        if !(observed <= allowed) {
            self.pass = false;
        }
        row.push(observed);
        row.push(allowed);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// `PASS name margin=… digest=…`, the digest shortened to 12 digits.
    pub fn summary_line(&self) -> String {
        let mut line = format!(
            "{} {} margin={:.3e} digest={}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.worst_margin,
            &self.digest[..12.min(self.digest.len())]
        );
        if let Some(t) = &self.trend {
            let vals: Vec<String> = t.values.iter().map(|v| format!("{v:.4e}")).collect();
            line.push_str(&format!(
                " trend=[{}] monotone={}",
                vals.join(" "),
                t.monotone
            ));
        }
        line
    }
}
