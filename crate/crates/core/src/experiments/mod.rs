//! Configurable experiment runners: almost-conservation and fixed-time sweeps
//! in `N`, the resonance-angle sweep, the angular bilinear Strichartz
//! quadrature and symbol audits, each producing a [`SweepResult`].

pub mod config;
pub mod data;
pub mod fit;
pub mod report;
pub mod simulation;
pub mod strichartz;
pub mod sweeps;

use serde::{Deserialize, Serialize};

pub use config::{
    AuditSettings, CheckThresholds, DataRecipe, ExperimentConfig, ExperimentKind, GridConfig,
    ParamsConfig, SolverConfig, StrichartzConfig, CONFIG_VERSION,
};
pub use data::prepare_data;
pub use fit::{fit_loglog, Fit};
pub use report::{emit_report, write_run, RunRecord};
pub use simulation::{simulate, SimulationSummary};
pub use strichartz::{run_strichartz_sweep, StrichartzPoint};
pub use sweeps::{run_acl_sweep, run_fixed_time_sweep, run_symbol_audit, run_theta0_sweep};

use crate::error::Result;

/// One table cell. Reals are written in Rust's shortest round-trip exponent form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Flag(bool),
    Text(String),
}

impl Cell {
    /// Non-finite reals become text so that tables survive a JSON round trip.
    pub fn real(v: f64) -> Cell {
        if v.is_finite() {
            Cell::Real(v)
        } else {
            Cell::Text(format!("{v}"))
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Real(x) => Some(*x),
            _ => None,
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Real(x) => write!(f, "{x:e}"),
            Cell::Flag(b) => write!(f, "{b}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[idx].as_f64()).collect()
    }

    /// RFC 4180 CSV.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        let to_err = |e: csv::Error| crate::error::Error::Report(e.to_string());
        w.write_record(&self.columns).map_err(to_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))
                .map_err(to_err)?;
        }
        w.into_inner()
            .map_err(|e| crate::error::Error::Report(e.to_string()))
    }
}

/// A named pass/fail threshold evaluated on a finished sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub code_version: String,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub experiment: ExperimentKind,
    /// Aggregated rows, one per swept parameter value.
    pub summary: Table,
    /// Raw rows, for example one per (parameter, seed).
    pub detail: Table,
    /// Log-log fits; the first one is the headline fit that gets plotted.
    pub fits: Vec<Fit>,
    pub checks: Vec<Check>,
    /// Additional structured output, such as the full audit report.
    #[serde(default)]
    pub extra: serde_json::Value,
    pub provenance: Provenance,
}

impl SweepResult {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn fit(&self, name: &str) -> Option<&Fit> {
        self.fits.iter().find(|f| f.name == name)
    }
}

/// Runs the experiment named in the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::AclSweep => run_acl_sweep(config),
        ExperimentKind::FixedTimeSweep => run_fixed_time_sweep(config),
        ExperimentKind::ThetaSweep => run_theta0_sweep(config),
        ExperimentKind::Strichartz => run_strichartz_sweep(config),
        ExperimentKind::SymbolAudit => run_symbol_audit(config),
        ExperimentKind::Simulate => Err(crate::error::Error::Config(
            "simulate runs produce trajectories, not sweeps; use simulate".into(),
        )),
    }
}
