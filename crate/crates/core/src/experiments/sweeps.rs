//! Lattice sweeps in `N` and `theta0`, and the symbol-audit wrapper.

use rayon::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiments::{
    fit_loglog, prepare_data, Cell, Check, ExperimentConfig, ExperimentKind, Fit, Provenance,
    SweepResult, Table,
};
use crate::grid::{sobolev_norm, Grid2D, Spectrum};
use crate::multiplier::{apply_i, min_log_slope, IMethodParams};
use crate::solver::{evolve, SolverState};
use crate::summation::Neumaier;
use crate::symbols::{audit_symbol_bounds, AuditConfig, SymbolAuditReport, TildeEnergy};

pub(crate) fn provenance(config: &ExperimentConfig) -> Provenance {
    Provenance {
        config_hash: config.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: config.master_seed(),
    }
}

/// Initial data for every seed, prepared once at the largest `N` so the same
/// field serves the whole sweep. `E(Iu)` grows with `N`, so the energy bound
/// then holds at every smaller `N` too.
fn prepare_all(
    config: &ExperimentConfig,
    grid: Grid2D,
    reference: &IMethodParams,
) -> Result<Vec<Spectrum>> {
    config
        .data
        .seeds
        .par_iter()
        .map(|&seed| prepare_data(&config.data, grid, reference, seed))
        .collect()
}

fn reference_params(config: &ExperimentConfig) -> Result<IMethodParams> {
    let n = config.params.largest_n();
    config.params.at(n, 1.0 / n)
}

/// States at `intervals + 1` evenly spaced times on `[0, t0]` (just the endpoints for 0 or 1).
fn trajectory_samples(
    config: &ExperimentConfig,
    u0: &Spectrum,
    params: &IMethodParams,
    intervals: usize,
) -> Result<Vec<(f64, Spectrum)>> {
    let s = &config.solver;
    let steps = ((s.t0 / s.dt).round() as usize).max(1);
    let intervals = intervals.max(1);
    if steps % intervals != 0 {
        return Err(Error::Config(format!(
            "{steps} time steps cannot be split into {intervals} equal observer intervals"
        )));
    }
    let mut state = SolverState::new(u0.clone(), *params, s.dt, s.integrator)?;
    if !s.nonlinear {
        state = state.linear();
    }
    let mut samples = Vec::with_capacity(intervals + 1);
    evolve(&state, s.t0, steps / intervals, |t, spec| {
        samples.push((t, spec.clone()));
        Ok(())
    })?;
    Ok(samples)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((Neumaier::new(), 0usize), |(mut acc, n), v| {
        acc.add(v);
        (acc, n + 1)
    });
    sum.value() / count as f64
}

fn slope_check(name: &str, fit: &Fit, max_slope: f64, residual_max: f64) -> Check {
    match fit.trusted_slope(residual_max) {
        Some(s) => Check::new(
            name,
            s <= max_slope,
            format!(
                "slope {s:.4} (threshold <= {max_slope}), residual {:.4}",
                fit.residual.unwrap_or(f64::NAN)
            ),
        ),
        None => Check::new(
            name,
            false,
            format!(
                "no trusted slope: slope {:?}, residual {:?}",
                fit.slope, fit.residual
            ),
        ),
    }
}

/// Time-integral check of `E~(t0) - E~(0)` against `int_0^t0 dE~/dt` from the
/// quartic and sextic increment terms sampled on the trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decomposition {
    /// Trapezoid rule at the observer spacing.
    pub trapezoid: f64,
    /// Richardson-extrapolated value (Simpson).
    pub extrapolated: f64,
    /// `|extrapolated - endpoint difference|`.
    pub error: f64,
    /// Quadrature error estimate `|trapezoid - trapezoid at twice the spacing|`.
    pub tolerance: f64,
    pub ok: bool,
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    h * (0.5 * (values[0] + values[n - 1]) + inner)
}

fn decomposition(
    te: &TildeEnergy,
    samples: &[(f64, Spectrum)],
    delta: f64,
) -> Result<Decomposition> {
    let derivs: Vec<f64> = samples
        .iter()
        .map(|(_, u)| Ok(te.increment_terms(u)?.derivative()))
        .collect::<Result<_>>()?;
    let intervals = samples.len() - 1;
    let h = (samples[intervals].0 - samples[0].0) / intervals as f64;
    let fine = trapezoid(&derivs, h);
    let scale = h * derivs.iter().map(|d| d.abs()).sum::<f64>() + delta.abs();
    let floor = 1e-9 * scale;
    if intervals < 2 || intervals % 2 != 0 {
        return Err(Error::Config(format!(
            "decomposition needs an even number of intervals, got {intervals}"
        )));
    }
    let coarse_values: Vec<f64> = derivs.iter().step_by(2).copied().collect();
    let coarse = trapezoid(&coarse_values, 2.0 * h);
    let extrapolated = fine + (fine - coarse) / 3.0;
    let error = (extrapolated - delta).abs();
    let tolerance = (fine - coarse).abs().max(floor);
    Ok(Decomposition {
        trapezoid: fine,
        extrapolated,
        error,
        tolerance,
        ok: error <= tolerance,
    })
}

/// Endpoint differences `E~(u(t0)) - E~(u0)` and `E(Iu(t0)) - E(Iu0)` across
/// `N`, with the seed-averaged log-log fit of `|Delta E~|`.
pub fn run_acl_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let grid = config.grid.build()?;
    let sweep = config.params.sweep()?;
    let reference = reference_params(config)?;
    let data = prepare_all(config, grid, &reference)?;
    let seeds = &config.data.seeds;
    let intervals = config.solver.decomposition_intervals;
    let trajectories: Vec<Vec<(f64, Spectrum)>> = data
        .par_iter()
        .enumerate()
        .map(|(i, u0)| {
            let d = if i < config.solver.decomposition_seeds {
                intervals
            } else {
                1
            };
            trajectory_samples(config, u0, &reference, d)
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..sweep.len())
        .flat_map(|n| (0..seeds.len()).map(move |s| (n, s)))
        .collect();
    let records: Vec<Vec<Cell>> = jobs
        .par_iter()
        .map(|&(ni, si)| {
            let p = sweep[ni];
            let te = TildeEnergy::new(p);
            let samples = &trajectories[si];
            let v0 = te.values(&samples[0].1)?;
            let v1 = te.values(&samples[samples.len() - 1].1)?;
            let d_tilde = v1.e_tilde() - v0.e_tilde();
            let d_iu = v1.e_iu() - v0.e_iu();
            let mut row = vec![
                Cell::real(p.n),
                Cell::real(p.theta0),
                Cell::Int(seeds[si] as i64),
                Cell::real(v0.e_tilde()),
                Cell::real(v1.e_tilde()),
                Cell::real(d_tilde),
                Cell::real(v0.e_iu()),
                Cell::real(v1.e_iu()),
                Cell::real(d_iu),
            ];
            if intervals > 0 && si < config.solver.decomposition_seeds {
                let d = decomposition(&te, samples, d_tilde)?;
                row.extend([
                    Cell::real(d.extrapolated),
                    Cell::real(d.error),
                    Cell::real(d.tolerance),
                    Cell::Flag(d.ok),
                ]);
            } else {
                row.extend([
                    Cell::Text(String::new()),
                    Cell::Text(String::new()),
                    Cell::Text(String::new()),
                    Cell::Text(String::new()),
                ]);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut detail = Table::new(
        "seeds",
        &[
            "N",
            "theta0",
            "seed",
            "E_tilde_0",
            "E_tilde_t0",
            "dE_tilde",
            "E_Iu_0",
            "E_Iu_t0",
            "dE_Iu",
            "decomposition",
            "decomposition_error",
            "decomposition_tolerance",
            "decomposition_ok",
        ],
    );
    for r in &records {
        detail.push(r.clone());
    }

    let mut summary = Table::new(
        "summary",
        &[
            "N",
            "theta0",
            "mean_abs_dE_tilde",
            "mean_abs_dE_Iu",
            "ratio",
        ],
    );
    let mut ns = Vec::new();
    let mut tilde = Vec::new();
    let mut iu = Vec::new();
    for (ni, p) in sweep.iter().enumerate() {
        let rows = &records[ni * seeds.len()..(ni + 1) * seeds.len()];
        let t = mean(rows.iter().map(|r| r[5].as_f64().unwrap().abs()));
        let e = mean(rows.iter().map(|r| r[8].as_f64().unwrap().abs()));
        summary.push(vec![
            Cell::real(p.n),
            Cell::real(p.theta0),
            Cell::real(t),
            Cell::real(e),
            Cell::real(t / e),
        ]);
        ns.push(p.n);
        tilde.push(t);
        iu.push(e);
    }
    let fit_tilde = fit_loglog("abs_dE_tilde", &ns, &tilde);
    let fit_iu = fit_loglog("abs_dE_Iu", &ns, &iu);

    let th = &config.checks;
    let largest = (0..ns.len())
        .max_by(|&a, &b| ns[a].total_cmp(&ns[b]))
        .unwrap();
    let decomposition_rows: Vec<&Vec<Cell>> = records
        .iter()
        .filter(|r| matches!(r[12], Cell::Flag(_)))
        .collect();
    let checks = vec![
        slope_check("acl_slope", &fit_tilde, th.acl_slope_max, th.residual_max),
        Check::new(
            "tilde_better_conserved_at_largest_N",
            tilde[largest] <= iu[largest],
            format!(
                "N = {}: |dE~| = {:e}, |dE(Iu)| = {:e}",
                ns[largest], tilde[largest], iu[largest]
            ),
        ),
        Check::new(
            "decomposition",
            decomposition_rows.iter().all(|r| r[12] == Cell::Flag(true)),
            format!("{} runs checked", decomposition_rows.len()),
        ),
    ];
    Ok(SweepResult {
        experiment: ExperimentKind::AclSweep,
        summary,
        detail,
        fits: vec![fit_tilde, fit_iu],
        checks,
        extra: json!({ "data_reference_N": reference.n }),
        provenance: provenance(config),
    })
}

/// `|E(Iu) - E~(u)|` on the prepared data across `N`.
pub fn run_fixed_time_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let grid = config.grid.build()?;
    let sweep = config.params.sweep()?;
    let reference = reference_params(config)?;
    let data = prepare_all(config, grid, &reference)?;
    let seeds = &config.data.seeds;
    let jobs: Vec<(usize, usize)> = (0..sweep.len())
        .flat_map(|n| (0..seeds.len()).map(move |s| (n, s)))
        .collect();
    let records: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(ni, si)| {
            let p = sweep[ni];
            let u = &data[si];
            let gap = TildeEnergy::new(p).values(u)?.gap().abs();
            let h1 = sobolev_norm(&apply_i(u, &p), 1.0, false);
            Ok((gap, gap * p.theta0 / h1.powi(4)))
        })
        .collect::<Result<_>>()?;

    let mut detail = Table::new("seeds", &["N", "theta0", "seed", "gap", "normalized_gap"]);
    for (&(ni, si), &(gap, norm)) in jobs.iter().zip(&records) {
        detail.push(vec![
            Cell::real(sweep[ni].n),
            Cell::real(sweep[ni].theta0),
            Cell::Int(seeds[si] as i64),
            Cell::real(gap),
            Cell::real(norm),
        ]);
    }
    let mut summary = Table::new(
        "summary",
        &["N", "theta0", "mean_gap", "mean_normalized_gap"],
    );
    let (mut ns, mut gaps) = (Vec::new(), Vec::new());
    for (ni, p) in sweep.iter().enumerate() {
        let rows = &records[ni * seeds.len()..(ni + 1) * seeds.len()];
        let g = mean(rows.iter().map(|r| r.0));
        let nrm = mean(rows.iter().map(|r| r.1));
        summary.push(vec![
            Cell::real(p.n),
            Cell::real(p.theta0),
            Cell::real(g),
            Cell::real(nrm),
        ]);
        ns.push(p.n);
        gaps.push(g);
    }
    let fit = fit_loglog("gap", &ns, &gaps);
    let checks = vec![slope_check(
        "fixed_time_slope",
        &fit,
        config.checks.fixed_time_slope_max,
        config.checks.residual_max,
    )];
    Ok(SweepResult {
        experiment: ExperimentKind::FixedTimeSweep,
        summary,
        detail,
        fits: vec![fit],
        checks,
        extra: json!({ "data_reference_N": reference.n }),
        provenance: provenance(config),
    })
}

/// Fixed `N`, varying `theta0`: fixed-time gap and `|Delta E~|` over `[0, t0]`.
pub fn run_theta0_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let grid = config.grid.build()?;
    let n = config.params.n[0];
    let thetas = config.params.theta0.clone().unwrap_or_default();
    let reference = config.params.at(n, 1.0 / n)?;
    let data = prepare_all(config, grid, &reference)?;
    let seeds = &config.data.seeds;
    let ends: Vec<Spectrum> = data
        .par_iter()
        .map(|u0| {
            Ok(trajectory_samples(config, u0, &reference, 1)?
                .pop()
                .expect("endpoint")
                .1)
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..thetas.len())
        .flat_map(|t| (0..seeds.len()).map(move |s| (t, s)))
        .collect();
    let records: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(ti, si)| {
            let te = TildeEnergy::new(config.params.at(n, thetas[ti])?);
            let v0 = te.values(&data[si])?;
            let v1 = te.values(&ends[si])?;
            Ok((v0.gap().abs(), (v1.e_tilde() - v0.e_tilde()).abs()))
        })
        .collect::<Result<_>>()?;

    let mut detail = Table::new("seeds", &["theta0", "seed", "gap", "abs_dE_tilde"]);
    for (&(ti, si), &(gap, de)) in jobs.iter().zip(&records) {
        detail.push(vec![
            Cell::real(thetas[ti]),
            Cell::Int(seeds[si] as i64),
            Cell::real(gap),
            Cell::real(de),
        ]);
    }
    let mut summary = Table::new(
        "summary",
        &[
            "theta0",
            "mean_gap",
            "mean_abs_dE_tilde",
            "theta0_below_one_percent",
        ],
    );
    let (mut gaps, mut increments) = (Vec::new(), Vec::new());
    for (ti, &t) in thetas.iter().enumerate() {
        let rows = &records[ti * seeds.len()..(ti + 1) * seeds.len()];
        let g = mean(rows.iter().map(|r| r.0));
        let d = mean(rows.iter().map(|r| r.1));
        summary.push(vec![
            Cell::real(t),
            Cell::real(g),
            Cell::real(d),
            Cell::Flag(t < 0.01),
        ]);
        gaps.push(g);
        increments.push(d);
    }
    let best = (0..thetas.len()).min_by(|&a, &b| increments[a].total_cmp(&increments[b]));
    // Fixed-time gap ratios over every pair of listed angles that differ by a factor of two.
    let mut doubling = Vec::new();
    for a in 0..thetas.len() {
        for b in 0..thetas.len() {
            if (thetas[b] / thetas[a] - 2.0).abs() < 1e-12 {
                doubling.push(json!({ "theta0": thetas[a], "gap_ratio": gaps[b] / gaps[a] }));
            }
        }
    }
    let ratios_in_band = doubling.iter().all(|d| {
        let r = d["gap_ratio"].as_f64().unwrap_or(f64::NAN);
        (0.3..=0.7).contains(&r)
    });
    let checks = vec![Check::new(
        "gap_halves_when_theta0_doubles",
        ratios_in_band,
        format!(
            "{} doubling pairs, ratios required in [0.3, 0.7]",
            doubling.len()
        ),
    )];
    Ok(SweepResult {
        experiment: ExperimentKind::ThetaSweep,
        summary,
        detail,
        fits: vec![
            fit_loglog("gap", &thetas, &gaps),
            fit_loglog("abs_dE_tilde", &thetas, &increments),
        ],
        checks,
        extra: json!({
            "N": n,
            "optimal_theta0": best.map(|i| thetas[i]),
            "one_over_N": 1.0 / n,
            "doubling": doubling,
        }),
        provenance: provenance(config),
    })
}

/// Audit of the symbol lemma and corollary at the configured `(N, s, theta0)`,
/// plus the identity multiplier, for which the lemma ratio is at most 1/2.
pub fn run_symbol_audit(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let p = config.params.sweep()?[0];
    let a = &config.audit;
    let report = audit_symbol_bounds(&AuditConfig::new(p, a.samples, a.seed, a.stratum));
    let identity = audit_symbol_bounds(&AuditConfig::new(
        IMethodParams::identity(),
        a.samples,
        a.seed,
        a.stratum,
    ));
    Ok(audit_result(config, &p, report, identity))
}

fn audit_result(
    config: &ExperimentConfig,
    p: &IMethodParams,
    report: SymbolAuditReport,
    identity: SymbolAuditReport,
) -> SweepResult {
    let mut summary = Table::new(
        "strata",
        &[
            "stratum",
            "samples",
            "max_ratio",
            "max_corollary_ratio",
            "identity_max_ratio",
        ],
    );
    for (s, id) in report.strata.iter().zip(&identity.strata) {
        summary.push(vec![
            Cell::Text(format!("{:?}", s.stratum).to_lowercase()),
            Cell::Int(s.samples as i64),
            Cell::real(s.max_ratio),
            Cell::real(s.max_corollary_ratio),
            Cell::real(id.max_ratio),
        ]);
    }
    let mut detail = Table::new("histogram", &["log10_ratio_lo", "log10_ratio_hi", "count"]);
    for row in &report.histogram {
        detail.push(vec![
            Cell::real(row.log10_lo),
            Cell::real(row.log10_hi),
            Cell::Int(row.count as i64),
        ]);
    }
    let th = &config.checks;
    let checks = vec![
        Check::new(
            "lemma_ratio",
            report.max_ratio.is_finite() && report.max_ratio <= th.audit_ratio_max,
            format!(
                "max ratio {:e} (recorded bound {})",
                report.max_ratio, th.audit_ratio_max
            ),
        ),
        Check::new(
            "corollary_ratio",
            report.max_corollary_ratio <= th.corollary_ratio_max,
            format!(
                "max ratio {:e} (recorded bound {})",
                report.max_corollary_ratio, th.corollary_ratio_max
            ),
        ),
        Check::new(
            "identity_half_bound",
            identity.max_ratio <= 0.5,
            format!("max ratio {:e} with m = 1", identity.max_ratio),
        ),
    ];
    SweepResult {
        experiment: ExperimentKind::SymbolAudit,
        summary,
        detail,
        fits: Vec::new(),
        checks,
        extra: json!({
            "params": p,
            "report": report,
            "identity_report": identity,
            "min_log_slope_m_pow_1.9": min_log_slope(p, 0.1, 2000),
        }),
        provenance: provenance(config),
    }
}
