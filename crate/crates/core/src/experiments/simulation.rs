//! Single-trajectory runs: observables streamed to CSV plus binary checkpoints.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::report::ensure_writable;
use crate::experiments::{prepare_data, ExperimentConfig, ExperimentKind};
use crate::grid::{energy_spectrum, mass_spectrum, Spectrum};
use crate::io::save_spectrum;
use crate::multiplier::energy_iu_spectrum;
use crate::solver::{evolve, SolverState};
use crate::symbols::TildeEnergy;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const INITIAL_CHECKPOINT: &str = "initial.nls2";
pub const FINAL_CHECKPOINT: &str = "final.nls2";
pub const SUMMARY_FILE: &str = "simulation.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub config_hash: String,
    pub seed: u64,
    pub steps: usize,
    pub observations: usize,
    pub final_time: f64,
    /// Relative drifts `|Q(t) - Q(0)| / |Q(0)|` at the final time.
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub wall_seconds: f64,
}

fn relative(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        (b - a).abs()
    } else {
        ((b - a) / a).abs()
    }
}

/// Evolves the first seed's data with the first listed `N` to `t0`, writing
/// `trajectory.csv`, the initial and final spectra, and `simulation.json` into `out`.
pub fn simulate(config: &ExperimentConfig, out: &Path, force: bool) -> Result<SimulationSummary> {
    if config.experiment != ExperimentKind::Simulate {
        return Err(Error::Config(format!(
            "expected a simulate config, got {:?}",
            config.experiment
        )));
    }
    config.validate()?;
    for name in [TRAJECTORY_FILE, SUMMARY_FILE] {
        if out.join(name).exists() && !force {
            return Err(Error::Report(format!(
                "{} already exists; pass --force to overwrite",
                out.join(name).display()
            )));
        }
    }
    ensure_writable(out, force)?;
    fs::create_dir_all(out)?;

    let started = std::time::Instant::now();
    let grid = config.grid.build()?;
    let params = config.params.sweep()?[0];
    let seed = config.data.seeds[0];
    let u0 = prepare_data(&config.data, grid, &params, seed)?;
    save_spectrum(&out.join(INITIAL_CHECKPOINT), &u0)?;

    let s = &config.solver;
    let mut state = SolverState::new(u0, params, s.dt, s.integrator)?;
    if !s.nonlinear {
        state = state.linear();
    }
    let sign = state.coupling;
    let tilde = s.observe_tilde.then(|| TildeEnergy::new(params));

    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(std::io::BufWriter::new(fs::File::create(
            out.join(TRAJECTORY_FILE),
        )?));
    let to_err = |e: csv::Error| Error::Report(e.to_string());
    let mut header = vec!["time", "mass", "energy", "E_Iu"];
    if tilde.is_some() {
        header.push("E_tilde");
    }
    writer.write_record(&header).map_err(to_err)?;

    let mut first: Option<(f64, f64)> = None;
    let mut last = (0.0, 0.0);
    let trajectory = evolve(&state, s.t0, s.observe_every, |t, spec: &Spectrum| {
        let mass = mass_spectrum(spec);
        let energy = energy_spectrum(spec, sign);
        let mut row = vec![format!("{t:e}"), format!("{mass:e}"), format!("{energy:e}")];
        row.push(format!("{:e}", energy_iu_spectrum(spec, &params)));
        if let Some(t) = &tilde {
            row.push(format!("{:e}", t.value(spec)?));
        }
        writer.write_record(&row).map_err(to_err)?;
        first.get_or_insert((mass, energy));
        last = (mass, energy);
        Ok(())
    })?;
    writer
        .into_inner()
        .map_err(|e| Error::Report(e.to_string()))?
        .flush()?;
    save_spectrum(&out.join(FINAL_CHECKPOINT), &trajectory.state.spectrum)?;

    let (m0, e0) = first.expect("evolve observes the initial state");
    let summary = SimulationSummary {
        config_hash: config.hash(),
        seed,
        steps: trajectory.steps,
        observations: trajectory.observations,
        final_time: trajectory.state.time,
        mass_drift: relative(m0, last.0),
        energy_drift: relative(e0, last.1),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    fs::write(out.join(SUMMARY_FILE), serde_json::to_vec_pretty(&summary)?)?;
    Ok(summary)
}
