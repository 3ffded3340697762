use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nlslab::experiments::{
    emit_report, run_experiment, simulate, write_run, ExperimentConfig, ExperimentKind, RunRecord,
    SweepResult,
};
use nlslab::io::load_spectrum;
use nlslab::multilinear::{
    dump_symbol_csv, eval_lambda4_direct, eval_lambda4_separable, TabulatedSymbol,
};
use nlslab::multiplier::m_eval;
use nlslab::symbols::{Alpha4, KernelKind, Sigma4, Sigma4Tilde, Stratum, TildeEnergy};
use nlslab::{Error, IMethodParams, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Parser)]
#[command(
    name = "nlslab",
    version,
    about = "Cubic NLS on the 2-torus and I-method experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve seeded data and stream observables to CSV.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Almost-conservation of the corrected energy versus N.
    AclSweep(SweepArgs),
    /// Fixed-time gap between E(Iu) and the corrected energy versus N.
    FixedTimeSweep(SweepArgs),
    /// Resonance-angle sweep at fixed N.
    ThetaSweep(SweepArgs),
    /// Angular bilinear Strichartz quadrature on the plane.
    Strichartz(SweepArgs),
    /// Sample the symbol bounds on the quadrilinear correction.
    SymbolAudit(AuditArgs),
    /// Evaluate a quartic functional on a stored spectrum.
    LambdaEval(LambdaArgs),
    /// Rebuild manifest, CSV tables and plot from a run directory.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// JSON config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory for result.json, manifest.json, CSV and SVG.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
    /// Exit with status 4 when an acceptance threshold fails.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    run: SweepArgs,
    #[arg(long = "N")]
    n: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stratum: Option<Stratum>,
    /// Write m(r) on [0, 4N] as CSV (r, m) to this file.
    #[arg(long)]
    dump_multiplier: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum SymbolName {
    Sigma4,
    Sigma4Tilde,
    Alpha4,
    #[value(name = "custom-csv")]
    CustomCsv,
}

#[derive(Args)]
struct LambdaArgs {
    #[arg(long)]
    symbol: SymbolName,
    /// Spectrum in the binary checkpoint format.
    #[arg(long)]
    spectrum: PathBuf,
    /// Symbol table for `custom-csv`.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long = "N", default_value_t = 4.0)]
    n: f64,
    #[arg(long, default_value_t = 0.6)]
    s: f64,
    /// Defaults to 1/N.
    #[arg(long)]
    theta0: Option<f64>,
    /// Write the symbol on sampled lattice tuples to this CSV file.
    #[arg(long)]
    dump: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    dump_samples: usize,
    #[arg(long, default_value_t = 1)]
    dump_seed: u64,
}

fn load_config(path: Option<&Path>, kind: ExperimentKind) -> Result<ExperimentConfig> {
    let config = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::new(kind),
    };
    if config.experiment != kind {
        return Err(Error::Config(format!(
            "config is for {:?}, but the {} subcommand was invoked",
            config.experiment,
            kind.slug()
        )));
    }
    Ok(config)
}

fn print_result(result: &SweepResult) {
    for fit in &result.fits {
        match (fit.slope, fit.residual) {
            (Some(s), Some(r)) => println!("fit {}: slope {s:.4}, residual {r:.4}", fit.name),
            _ => println!(
                "fit {}: no slope ({} usable points)",
                fit.name,
                fit.x.len() - fit.excluded
            ),
        }
    }
    for c in &result.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
}

/// Runs a sweep, then stores and reports it when a run directory is given.
fn run_sweep(config: &ExperimentConfig, args: &SweepArgs) -> Result<SweepResult> {
    if let Some(out) = &args.out {
        nlslab::experiments::report::ensure_writable(out, args.force)?;
    }
    let started = Instant::now();
    let result = run_experiment(config)?;
    let wall_seconds = started.elapsed().as_secs_f64();
    print_result(&result);
    if let Some(out) = &args.out {
        let record = RunRecord {
            config: config.clone(),
            result: result.clone(),
            wall_seconds,
        };
        write_run(out, &record, args.force)?;
        for path in emit_report(out, args.force)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(result)
}

fn symbol_audit(args: &AuditArgs) -> Result<bool> {
    let mut config = load_config(args.run.config.as_deref(), ExperimentKind::SymbolAudit)?;
    if let Some(n) = args.n {
        config.params.n = vec![n];
    }
    if let Some(s) = args.s {
        config.params.s = s;
    }
    if let Some(t) = args.theta0 {
        config.params.theta0 = Some(vec![t]);
    }
    if let Some(n) = args.samples {
        config.audit.samples = n;
    }
    if let Some(seed) = args.seed {
        config.audit.seed = seed;
    }
    if let Some(stratum) = args.stratum {
        config.audit.stratum = stratum;
    }
    config.validate()?;
    if let Some(path) = &args.dump_multiplier {
        let params = config.params.sweep()?[0];
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_path(path)
            .map_err(|e| Error::Report(e.to_string()))?;
        let to_err = |e: csv::Error| Error::Report(e.to_string());
        w.write_record(["r", "m"]).map_err(to_err)?;
        let points = 400;
        for i in 0..=points {
            let r = 4.0 * params.n * i as f64 / points as f64;
            w.write_record([format!("{r:e}"), format!("{:e}", m_eval(r, &params))])
                .map_err(to_err)?;
        }
        w.flush()?;
    }
    let result = run_sweep(&config, &args.run)?;
    println!("{}", serde_json::to_string_pretty(&result.extra["report"])?);
    Ok(result.all_checks_pass())
}

fn lambda_eval(args: &LambdaArgs) -> Result<()> {
    let spec = load_spectrum(&args.spectrum)?;
    let params = IMethodParams::with_theta0(args.n, args.s, args.theta0.unwrap_or(1.0 / args.n))?;
    let grid = *spec.grid();
    let started = Instant::now();
    let (value, dump) = match args.symbol {
        SymbolName::Sigma4 => (
            eval_lambda4_separable(&Sigma4(params), &spec)?,
            dump_for(args, &Sigma4(params), grid)?,
        ),
        SymbolName::Sigma4Tilde => (
            TildeEnergy::new(params)
                .lambda4(KernelKind::Tilde, &spec)?
                .re,
            dump_for(args, &Sigma4Tilde(params), grid)?,
        ),
        SymbolName::Alpha4 => (
            eval_lambda4_direct(&Alpha4, &spec, None)?,
            dump_for(args, &Alpha4, grid)?,
        ),
        SymbolName::CustomCsv => {
            let path = args
                .table
                .as_ref()
                .ok_or_else(|| Error::Config("custom-csv needs --table <file>".into()))?;
            let table = TabulatedSymbol::from_csv(std::fs::File::open(path)?, grid.spacing())?;
            (
                eval_lambda4_direct(&table, &spec, None)?,
                dump_for(args, &table, grid)?,
            )
        }
    };
    let seconds = started.elapsed().as_secs_f64();
    println!("value {value:e}");
    println!("seconds {seconds:.3}");
    if let (Some(path), Some(bytes)) = (&args.dump, dump) {
        std::fs::write(path, bytes)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn dump_for(
    args: &LambdaArgs,
    symbol: &(impl nlslab::multilinear::Symbol + ?Sized),
    grid: nlslab::Grid2D,
) -> Result<Option<Vec<u8>>> {
    args.dump
        .as_ref()
        .map(|_| dump_symbol_csv(symbol, grid, args.dump_samples, args.dump_seed))
        .transpose()
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::InvalidGrid(_)
        | Error::DegenerateRecipe(_) => EXIT_CONFIG,
        Error::Blowup { .. } | Error::Quadrature(_) => EXIT_NUMERICAL,
        _ => 1,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("NLSLAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Config(format!(
            "NLSLAB_THREADS must be a positive integer, got {value:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Simulate { config, out, force } => {
            let config = load_config(config.as_deref(), ExperimentKind::Simulate)?;
            let summary = simulate(&config, &out, force)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(true)
        }
        Command::AclSweep(a) => finish(
            run_sweep(
                &load_config(a.config.as_deref(), ExperimentKind::AclSweep)?,
                &a,
            )?
            .all_checks_pass(),
            a.check,
        ),
        Command::FixedTimeSweep(a) => finish(
            run_sweep(
                &load_config(a.config.as_deref(), ExperimentKind::FixedTimeSweep)?,
                &a,
            )?
            .all_checks_pass(),
            a.check,
        ),
        Command::ThetaSweep(a) => finish(
            run_sweep(
                &load_config(a.config.as_deref(), ExperimentKind::ThetaSweep)?,
                &a,
            )?
            .all_checks_pass(),
            a.check,
        ),
        Command::Strichartz(a) => finish(
            run_sweep(
                &load_config(a.config.as_deref(), ExperimentKind::Strichartz)?,
                &a,
            )?
            .all_checks_pass(),
            a.check,
        ),
        Command::SymbolAudit(a) => finish(symbol_audit(&a)?, a.run.check),
        Command::LambdaEval(a) => lambda_eval(&a).map(|_| true),
        Command::Report { out, force } => {
            for path in emit_report(&out, force)? {
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
    }
}

/// Check failures only change the exit status under `--check`.
fn finish(passed: bool, check: bool) -> Result<bool> {
    Ok(passed || !check)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
