//! Experiment reports: JSON summary plus CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use fbm_chaos_core::MonteCarloResult;
use serde::Serialize;
use serde_json::Value;

/// How a metric is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tolerance {
    /// `|value - target| ≤ bound`.
    Absolute { target: f64, bound: f64 },
    /// `|value - target| ≤ k` standard errors.
    StdErrors { target: f64, k: f64 },
    /// `value < bound`.
    Below { bound: f64 },
    /// `value > bound`.
    Above { bound: f64 },
    /// Reported, not judged.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub n_replicas: Option<usize>,
    pub seed: Option<u64>,
    pub tolerance: Tolerance,
    pub passed: Option<bool>,
}

impl Metric {
    pub fn deterministic(name: impl Into<String>, value: f64, tolerance: Tolerance) -> Self {
        let mut m = Self {
            name: name.into(),
            value,
            std_error: None,
            n_replicas: None,
            seed: None,
            tolerance,
            passed: None,
        };
        m.passed = m.judge();
        m
    }

    pub fn monte_carlo(name: impl Into<String>, r: &MonteCarloResult, tolerance: Tolerance) -> Self {
        let mut m = Self {
            name: name.into(),
            value: r.estimate,
            std_error: Some(r.std_error),
            n_replicas: Some(r.n_replicas),
            seed: Some(r.seed.master_seed),
            tolerance,
            passed: None,
        };
        m.passed = m.judge();
        m
    }

    pub fn with_seed(mut self, seed: u64, replicas: usize) -> Self {
        self.seed = Some(seed);
        self.n_replicas = Some(replicas);
        self
    }

    fn judge(&self) -> Option<bool> {
        let v = self.value;
        match self.tolerance {
            Tolerance::Absolute { target, bound } => Some((v - target).abs() <= bound),
            Tolerance::StdErrors { target, k } => {
                let se = self.std_error.unwrap_or(0.0);
                let gap = (v - target).abs();
                Some(gap <= k * se || gap == 0.0)
            }
            Tolerance::Below { bound } => Some(v < bound),
            Tolerance::Above { bound } => Some(v > bound),
            Tolerance::Info => None,
        }
    }

    pub fn failed(&self) -> bool {
        self.passed == Some(false)
    }
}

/// CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            headers: headers.iter().map(|h| (*h).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Formats a float so that it round-trips.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub parameters: BTreeMap<String, Value>,
    pub metrics: Vec<Metric>,
    pub notes: Vec<String>,
    pub passed: bool,
    pub wall_clock_s: f64,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl ExperimentReport {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_owned(),
            parameters: BTreeMap::new(),
            metrics: Vec::new(),
            notes: Vec::new(),
            passed: true,
            wall_clock_s: 0.0,
            tables: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.parameters.insert(key.to_owned(), v);
    }

    pub fn metric(&mut self, m: Metric) {
        self.metrics.push(m);
    }

    pub fn metric_named(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn finish(mut self, started: Instant) -> Self {
        self.passed = !self.metrics.iter().any(Metric::failed);
        self.wall_clock_s = started.elapsed().as_secs_f64();
        self
    }

    /// Writes `report.json` and one CSV per table into `dir`.
    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let json = serde_json::to_string_pretty(self)?;
        fs::write(dir.join("report.json"), json + "\n")?;
        for t in &self.tables {
            t.write(dir)?;
        }
        Ok(())
    }

    /// One line per metric for the terminal.
    pub fn summary(&self) -> String {
        let mut out = format!("{}: {}\n", self.experiment, verdict(Some(self.passed)));
        for m in &self.metrics {
            let se = m.std_error.map(|s| format!(" ± {s:.3e}")).unwrap_or_default();
            out.push_str(&format!("  {:<40} {:>14.6e}{se}  {}\n", m.name, m.value, verdict(m.passed)));
        }
        out
    }
}

fn verdict(p: Option<bool>) -> &'static str {
    match p {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "info",
    }
}
