//! The JSON experiment configuration (`"config_version": 1`).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::multiplier::{IMethodParams, Sign};
use crate::solver::Integrator;
use crate::symbols::Stratum;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    AclSweep,
    FixedTimeSweep,
    ThetaSweep,
    Strichartz,
    SymbolAudit,
}

impl ExperimentKind {
    pub fn slug(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::AclSweep => "acl_sweep",
            ExperimentKind::FixedTimeSweep => "fixed_time_sweep",
            ExperimentKind::ThetaSweep => "theta_sweep",
            ExperimentKind::Strichartz => "strichartz",
            ExperimentKind::SymbolAudit => "symbol_audit",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "M")]
    pub modes: usize,
    /// Defaults to `2 pi`.
    #[serde(rename = "L", default)]
    pub length: Option<f64>,
    /// Defaults to `M / 3`.
    #[serde(rename = "K", default)]
    pub cutoff: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            modes: 48,
            length: None,
            cutoff: None,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid2D> {
        let length = self.length.unwrap_or(std::f64::consts::TAU);
        match self.cutoff {
            Some(k) => Grid2D::with_cutoff(self.modes, length, k),
            None => Grid2D::new(self.modes, length),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(rename = "N")]
    pub n: Vec<f64>,
    /// Resonance angles; `null` means `theta0 = 1/N` for each `N`.
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    pub s: f64,
    #[serde(default)]
    pub sign: Sign,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            n: vec![2.0, 3.0, 4.0, 6.0, 8.0],
            theta0: None,
            s: 0.6,
            sign: Sign::Defocusing,
        }
    }
}

impl ParamsConfig {
    pub fn at(&self, n: f64, theta0: f64) -> Result<IMethodParams> {
        Ok(IMethodParams::with_theta0(n, self.s, theta0)?.with_sign(self.sign))
    }

    /// `N` paired with its angle: the `i`-th listed angle, or `1/N`.
    pub fn sweep(&self) -> Result<Vec<IMethodParams>> {
        match &self.theta0 {
            None => self.n.iter().map(|&n| self.at(n, 1.0 / n)).collect(),
            Some(t) if t.len() == self.n.len() => {
                self.n.iter().zip(t).map(|(&n, &t)| self.at(n, t)).collect()
            }
            Some(t) => Err(Error::Config(format!(
                "theta0 list has {} entries for {} values of N",
                t.len(),
                self.n.len()
            ))),
        }
    }

    pub fn largest_n(&self) -> f64 {
        self.n.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `c(k) = a <xi_k>^(-decay) e^(i phi_k)` on the active lattice, phases from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataRecipe {
    pub seeds: Vec<u64>,
    pub decay: f64,
    /// Fixed amplitude; `null` selects the largest amplitude meeting both bounds.
    #[serde(default)]
    pub amplitude: Option<f64>,
    /// Bound `A` on the mass.
    pub mass_bound: f64,
    /// Bound on `E(Iu_0)`.
    pub energy_bound: f64,
}

impl Default for DataRecipe {
    fn default() -> Self {
        Self {
            seeds: vec![11, 12, 13],
            decay: 3.0,
            amplitude: None,
            mass_bound: 4.0,
            energy_bound: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub t0: f64,
    #[serde(default)]
    pub integrator: Integrator,
    /// `false` evolves the free equation.
    #[serde(default = "yes")]
    pub nonlinear: bool,
    /// Observer intervals on `[0, t0]` for the time-integral decomposition check; 0 disables it.
    pub decomposition_intervals: usize,
    /// Number of leading seeds on which the decomposition check runs.
    pub decomposition_seeds: usize,
    /// Steps between trajectory samples in `simulate`.
    pub observe_every: usize,
    /// Whether `simulate` records `E~` (expensive).
    #[serde(default)]
    pub observe_tilde: bool,
}

fn yes() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t0: 0.1,
            integrator: Integrator::Ifrk4,
            nonlinear: true,
            decomposition_intervals: 20,
            decomposition_seeds: 1,
            observe_every: 10,
            observe_tilde: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrichartzConfig {
    pub theta: Vec<f64>,
    #[serde(rename = "N1")]
    pub n1: f64,
    #[serde(rename = "N2")]
    pub n2: f64,
    /// Quadrature points per dimension on the first pass.
    pub initial_points: usize,
    pub max_points: usize,
    /// Relative change between `n` and `2n` points that counts as resolved.
    pub tolerance: f64,
    /// 0 disables the Monte Carlo cross-check.
    pub monte_carlo_samples: usize,
    pub monte_carlo_seed: u64,
}

impl Default for StrichartzConfig {
    fn default() -> Self {
        Self {
            theta: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            n1: 8.0,
            n2: 8.0,
            initial_points: 16,
            max_points: 256,
            tolerance: 0.01,
            monte_carlo_samples: 2_000_000,
            monte_carlo_seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSettings {
    pub samples: usize,
    pub seed: u64,
    pub stratum: Stratum,
}

impl Default for AuditSettings {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 1,
            stratum: Stratum::All,
        }
    }
}

/// Thresholds evaluated by `--check`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckThresholds {
    pub acl_slope_max: f64,
    pub fixed_time_slope_max: f64,
    pub strichartz_slope: f64,
    pub strichartz_slope_tolerance: f64,
    /// Slope checks only count when the log10 RMS residual is below this.
    pub residual_max: f64,
    pub audit_ratio_max: f64,
    pub corollary_ratio_max: f64,
}

impl Default for CheckThresholds {
    fn default() -> Self {
        Self {
            acl_slope_max: -1.5,
            fixed_time_slope_max: -0.8,
            strichartz_slope: 0.5,
            strichartz_slope_tolerance: 0.15,
            residual_max: 0.2,
            audit_ratio_max: 10.0,
            corollary_ratio_max: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub config_version: u32,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub data: DataRecipe,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub strichartz: StrichartzConfig,
    #[serde(default)]
    pub audit: AuditSettings,
    #[serde(default)]
    pub checks: CheckThresholds,
}

impl ExperimentConfig {
    /// Defaults for the given experiment.
    pub fn new(experiment: ExperimentKind) -> Self {
        let mut config = Self {
            config_version: CONFIG_VERSION,
            experiment,
            grid: GridConfig::default(),
            params: ParamsConfig::default(),
            data: DataRecipe::default(),
            solver: SolverConfig::default(),
            strichartz: StrichartzConfig::default(),
            audit: AuditSettings::default(),
            checks: CheckThresholds::default(),
        };
        match experiment {
            ExperimentKind::ThetaSweep => {
                config.params.n = vec![4.0];
                config.params.theta0 = Some(vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]);
            }
            ExperimentKind::SymbolAudit => config.params.n = vec![32.0],
            ExperimentKind::Simulate => {
                config.params.n = vec![4.0];
                config.data.seeds = vec![11];
                config.solver.t0 = 1.0;
            }
            _ => {}
        }
        config
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Hex SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn master_seed(&self) -> u64 {
        match self.experiment {
            ExperimentKind::SymbolAudit => self.audit.seed,
            ExperimentKind::Strichartz => self.strichartz.monte_carlo_seed,
            _ => self.data.seeds.first().copied().unwrap_or(0),
        }
    }

    fn uses_lattice(&self) -> bool {
        !matches!(
            self.experiment,
            ExperimentKind::Strichartz | ExperimentKind::SymbolAudit
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.config_version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config_version {} (expected {CONFIG_VERSION})",
                self.config_version
            )));
        }
        if self.params.n.is_empty() {
            return Err(Error::Config("empty N list".into()));
        }
        let sweep = match self.experiment {
            ExperimentKind::ThetaSweep => vec![self.params.at(self.params.n[0], 1.0)?],
            _ => self.params.sweep()?,
        };
        if self.uses_lattice() {
            let grid = self.grid.build()?;
            let xi_max = grid.cutoff() as f64 * grid.spacing();
            for p in &sweep {
                if 2.0 * p.n > xi_max * (1.0 + 1e-12) {
                    return Err(Error::Config(format!(
                        "N = {} leaves the transition region [N, 2N] unresolved: 2N exceeds the largest dealiased frequency {xi_max}",
                        p.n
                    )));
                }
            }
            if self.data.seeds.is_empty() {
                return Err(Error::Config("no data seeds".into()));
            }
            if self.solver.decomposition_intervals % 2 != 0 {
                return Err(Error::Config(
                    "decomposition_intervals must be even (0 disables the check)".into(),
                ));
            }
            if !(self.solver.t0 > 0.0 && self.solver.dt > 0.0) {
                return Err(Error::Config("t0 and dt must be positive".into()));
            }
        }
        match self.experiment {
            ExperimentKind::ThetaSweep if self.params.n.len() != 1 => {
                return Err(Error::Config("theta-sweep takes exactly one N".into()));
            }
            ExperimentKind::ThetaSweep => {
                let t = self
                    .params
                    .theta0
                    .as_ref()
                    .ok_or_else(|| Error::Config("theta-sweep needs a theta0 list".into()))?;
                for &t in t {
                    self.params.at(self.params.n[0], t)?;
                }
            }
            ExperimentKind::Strichartz => {
                let s = &self.strichartz;
                if !(s.n1 > 0.0 && s.n1 <= s.n2) {
                    return Err(Error::Config("Strichartz needs 0 < N1 <= N2".into()));
                }
                if s.theta.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
                    return Err(Error::Config("Strichartz angles must lie in (0, 1)".into()));
                }
                if s.initial_points < 2 || s.max_points < s.initial_points {
                    return Err(Error::Config(
                        "quadrature point counts are inconsistent".into(),
                    ));
                }
            }
            ExperimentKind::SymbolAudit if self.audit.samples == 0 => {
                return Err(Error::Config("audit needs at least one sample".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for kind in [
            ExperimentKind::AclSweep,
            ExperimentKind::FixedTimeSweep,
            ExperimentKind::ThetaSweep,
            ExperimentKind::Strichartz,
            ExperimentKind::SymbolAudit,
            ExperimentKind::Simulate,
        ] {
            let c = ExperimentConfig::new(kind);
            c.validate().unwrap();
            let text = serde_json::to_string_pretty(&c).unwrap();
            assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        }
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let c = ExperimentConfig::from_json(r#"{"config_version": 1, "experiment": "acl-sweep"}"#)
            .unwrap();
        assert_eq!(c.grid.modes, 48);
        assert_eq!(c.params.sweep().unwrap()[1].theta0, 1.0 / 3.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let wrong_version = r#"{"config_version": 2, "experiment": "acl-sweep"}"#;
        assert!(matches!(
            ExperimentConfig::from_json(wrong_version),
            Err(Error::Config(_))
        ));
        let unknown = r#"{"config_version": 1, "experiment": "acl-sweep", "bogus": 1}"#;
        assert!(ExperimentConfig::from_json(unknown).is_err());
        let unresolved =
            r#"{"config_version": 1, "experiment": "acl-sweep", "params": {"N": [16], "s": 0.6}}"#;
        assert!(ExperimentConfig::from_json(unresolved).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::new(ExperimentKind::AclSweep);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.solver.t0 = 0.2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
