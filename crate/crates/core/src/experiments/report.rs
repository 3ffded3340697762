//! Run directories: `result.json` written by a finished run, and the report
//! (`manifest.json`, CSV tables, SVG plot) derived from it.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{ExperimentConfig, Fit, SweepResult};

pub const RESULT_FILE: &str = "result.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub result: SweepResult,
    pub wall_seconds: f64,
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Fails when `dir` already holds a run and `force` is not set.
pub fn ensure_writable(dir: &Path, force: bool) -> Result<()> {
    for name in [RESULT_FILE, MANIFEST_FILE] {
        if dir.join(name).exists() && !force {
            return Err(Error::Report(format!(
                "{} already exists; pass --force to overwrite",
                dir.join(name).display()
            )));
        }
    }
    Ok(())
}

/// Stores a finished run as `result.json` in `dir`, creating it if needed.
pub fn write_run(dir: &Path, record: &RunRecord, force: bool) -> Result<()> {
    ensure_writable(dir, force)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join(RESULT_FILE), serde_json::to_vec_pretty(record)?)?;
    Ok(())
}

/// Writes `manifest.json`, the summary and detail CSV tables and, when the
/// run has a fitted line, an SVG log-log plot. Returns the written paths.
pub fn emit_report(dir: &Path, force: bool) -> Result<Vec<PathBuf>> {
    let result_path = dir.join(RESULT_FILE);
    if !result_path.exists() {
        return Err(Error::Report(format!(
            "{} holds no completed run",
            dir.display()
        )));
    }
    if dir.join(MANIFEST_FILE).exists() && !force {
        return Err(Error::Report(format!(
            "{} already exists; pass --force to overwrite",
            dir.join(MANIFEST_FILE).display()
        )));
    }
    let record: RunRecord = serde_json::from_slice(&fs::read(&result_path)?)?;
    let result = &record.result;
    let slug = result.experiment.slug();

    let mut files = Vec::new();
    let mut written = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(&name);
        fs::write(&path, &bytes)?;
        files.push(json!({ "name": name, "sha256": hex_digest(&bytes) }));
        written.push(path);
        Ok(())
    };
    put(format!("{slug}.csv"), result.summary.to_csv()?)?;
    put(
        format!("{slug}_{}.csv", result.detail.name),
        result.detail.to_csv()?,
    )?;
    if let Some(fit) = result.fits.first().filter(|f| f.slope.is_some()) {
        put(format!("{slug}.svg"), loglog_svg(fit, slug).into_bytes())?;
    }

    let manifest = json!({
        "experiment": result.experiment,
        "config": record.config,
        "config_hash": result.provenance.config_hash,
        "code_version": result.provenance.code_version,
        "master_seed": result.provenance.master_seed,
        "seeds": record.config.data.seeds,
        "wall_time_seconds": record.wall_seconds,
        "fits": result.fits.iter().map(|f| json!({
            "name": f.name,
            "slope": f.slope,
            "intercept": f.intercept,
            "residual_log10": f.residual,
            "excluded_points": f.excluded,
        })).collect::<Vec<_>>(),
        "checks": result.checks,
        "extra": result.extra,
        "files": files,
    });
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?)?;
    written.push(path);
    Ok(written)
}

fn decade_floor(v: f64) -> f64 {
    v.log10().floor()
}

fn decade_ceil(v: f64) -> f64 {
    let c = v.log10().ceil();
    if c == decade_floor(v) {
        c + 1.0
    } else {
        c
    }
}

/// Log-log scatter of the fit's points with the fitted line.
pub fn loglog_svg(fit: &Fit, title: &str) -> String {
    let (w, h, margin) = (640.0, 480.0, 70.0);
    let pts: Vec<(f64, f64)> = fit
        .x
        .iter()
        .zip(&fit.y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (lx0, lx1) = (decade_floor(xmin), decade_ceil(xmax));
    let (ly0, ly1) = (decade_floor(ymin), decade_ceil(ymax));
    let sx = |x: f64| margin + (x.log10() - lx0) / (lx1 - lx0) * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (y.log10() - ly0) / (ly1 - ly0) * (h - 2.0 * margin);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" font-family="sans-serif" font-size="16" text-anchor="middle">{title}: {}</text>"#,
        w / 2.0,
        fit.name
    );
    let _ = writeln!(
        s,
        r#"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * margin,
        h - 2.0 * margin
    );
    for d in (lx0 as i32)..=(lx1 as i32) {
        let x = sx(10f64.powi(d));
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            h - margin,
            h - margin + 6.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">1e{d}</text>"#,
            h - margin + 22.0
        );
    }
    for d in (ly0 as i32)..=(ly1 as i32) {
        let y = sy(10f64.powi(d));
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{margin}" y2="{y:.2}" stroke="black"/>"#,
            margin - 6.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">1e{d}</text>"#,
            margin - 10.0,
            y + 4.0
        );
    }
    for &(x, y) in &pts {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#,
            sx(x),
            sy(y)
        );
    }
    if let (Some(a), Some(b)) = (fit.predict(xmin), fit.predict(xmax)) {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-dasharray="6,4"/>"#,
            sx(xmin),
            sy(a),
            sx(xmax),
            sy(b)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="end">slope {:.3}, residual {:.3}</text>"#,
            w - margin - 8.0,
            margin + 20.0,
            fit.slope.unwrap_or(f64::NAN),
            fit.residual.unwrap_or(f64::NAN)
        );
    }
    s.push_str("</svg>\n");
    s
}
