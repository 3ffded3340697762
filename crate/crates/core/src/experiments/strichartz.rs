//! Angularly restricted bilinear Strichartz norms on the plane.
//!
//! For free waves with data `phi_1, phi_2` the space-time transform of the
//! angularly restricted product is, with `c = xi / 2` and `xi_1 = c + r u(phi)`,
//! `F~(tau, xi) = 1/4 integral over phi of g(c + r u, c - r u)` where
//! `tau = -(|xi|^2 / 2 + 2 r^2)` and `g = 1_{|cos| <= theta} phi_1^ phi_2^`.
//! Hence `||F~||^2 = integral dxi integral dr (r / 4) Phi(xi, r)^2` with
//! `Phi` the arc integral. For indicator data `Phi` is the length of the set
//! of angles meeting three constraints, each of which cuts the circle at
//! closed-form breakpoints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiments::sweeps::provenance;
use crate::experiments::{
    fit_loglog, Cell, Check, ExperimentConfig, ExperimentKind, SweepResult, Table,
};
use crate::summation::Neumaier;

use std::f64::consts::TAU;

/// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    pub fn area(&self) -> f64 {
        (self.x[1] - self.x[0]) * (self.y[1] - self.y[0])
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x[0] && p[0] <= self.x[1] && p[1] >= self.y[0] && p[1] <= self.y[1]
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        [
            rng.random_range(self.x[0]..self.x[1]),
            rng.random_range(self.y[0]..self.y[1]),
        ]
    }
}

/// The sharpness rectangles for `(N1, N2, theta)`: one near `(N1, 0)`, one near `(0, N2)`.
pub fn extremizer_rectangles(n1: f64, n2: f64, theta: f64) -> (Rect, Rect) {
    (
        Rect {
            x: [n1 - theta * n2, n1 + theta * n2],
            y: [-theta * n1, theta * n1],
        },
        Rect {
            x: [-theta * n2, theta * n2],
            y: [n2 - theta * n1, n2 + theta * n1],
        },
    )
}

fn angle_ok(a: [f64; 2], b: [f64; 2], theta: f64) -> bool {
    let d = a[0] * b[0] + a[1] * b[1];
    let aa = a[0] * a[0] + a[1] * a[1];
    let bb = b[0] * b[0] + b[1] * b[1];
    d * d <= theta * theta * aa * bb
}

fn push_cos(out: &mut Vec<f64>, v: f64) {
    if v.abs() <= 1.0 {
        let a = v.acos();
        out.extend([a, -a]);
    }
}

fn push_sin(out: &mut Vec<f64>, v: f64) {
    if v.abs() <= 1.0 {
        let a = v.asin();
        out.extend([a, std::f64::consts::PI - a]);
    }
}

/// `Phi(xi, r)`: measure of angles with `c + r u in R1`, `c - r u in R2` and
/// `|cos angle(c + r u, c - r u)| <= theta`, where `c = xi / 2`.
pub fn arc_measure(xi: [f64; 2], r: f64, r1: &Rect, r2: &Rect, theta: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let c = [0.5 * xi[0], 0.5 * xi[1]];
    let mut cuts = Vec::with_capacity(20);
    for &x in &r1.x {
        push_cos(&mut cuts, (x - c[0]) / r);
    }
    for &y in &r1.y {
        push_sin(&mut cuts, (y - c[1]) / r);
    }
    for &x in &r2.x {
        push_cos(&mut cuts, (c[0] - x) / r);
    }
    for &y in &r2.y {
        push_sin(&mut cuts, (c[1] - y) / r);
    }
    // xi_1 . xi_2 = |c|^2 - r^2 and |xi_1|^2 |xi_2|^2 = (|c|^2 + r^2)^2 - 4 r^2 (c . u)^2,
    // so the angle constraint reads |cos(phi - phi_c)| <= sqrt(D) / (2 r theta |c|).
    let cc = c[0] * c[0] + c[1] * c[1];
    let d = theta * theta * (cc + r * r).powi(2) - (cc - r * r).powi(2);
    if d < 0.0 {
        return 0.0;
    }
    if cc > 0.0 {
        let beta = d.sqrt() / (2.0 * r * theta * cc.sqrt());
        if beta < 1.0 {
            let phi_c = c[1].atan2(c[0]);
            let a = beta.acos();
            cuts.extend([
                phi_c + a,
                phi_c - a,
                phi_c + std::f64::consts::PI + a,
                phi_c + std::f64::consts::PI - a,
            ]);
        }
    }
    let mut cuts: Vec<f64> = cuts.into_iter().map(|a| a.rem_euclid(TAU)).collect();
    cuts.extend([0.0, TAU]);
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let u = [r * mid.cos(), r * mid.sin()];
        let a = [c[0] + u[0], c[1] + u[1]];
        let b = [c[0] - u[0], c[1] - u[1]];
        if r1.contains(a) && r2.contains(b) && angle_ok(a, b, theta) {
            total += len;
        }
    }
    total
}

/// Bounding box of `R1 + R2` and the range of `r = |xi_1 - xi_2| / 2`.
fn domain(r1: &Rect, r2: &Rect) -> ([f64; 2], [f64; 2], [f64; 2]) {
    let sx = [r1.x[0] + r2.x[0], r1.x[1] + r2.x[1]];
    let sy = [r1.y[0] + r2.y[0], r1.y[1] + r2.y[1]];
    let dx = [r1.x[0] - r2.x[1], r1.x[1] - r2.x[0]];
    let dy = [r1.y[0] - r2.y[1], r1.y[1] - r2.y[0]];
    let nearest = |iv: [f64; 2]| {
        if iv[0] > 0.0 {
            iv[0]
        } else if iv[1] < 0.0 {
            -iv[1]
        } else {
            0.0
        }
    };
    let farthest = |iv: [f64; 2]| iv[0].abs().max(iv[1].abs());
    let rmin = 0.5 * nearest(dx).hypot(nearest(dy));
    let rmax = 0.5 * farthest(dx).hypot(farthest(dy));
    (sx, sy, [rmin, rmax])
}

/// `||F~||^2_{L^2}` by the midpoint rule with `n` points per dimension in `(xi_x, xi_y, r)`.
pub fn restricted_norm_squared(r1: &Rect, r2: &Rect, theta: f64, n: usize) -> f64 {
    let (sx, sy, rr) = domain(r1, r2);
    let h = [
        (sx[1] - sx[0]) / n as f64,
        (sy[1] - sy[0]) / n as f64,
        (rr[1] - rr[0]) / n as f64,
    ];
    let slabs: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = sx[0] + (i as f64 + 0.5) * h[0];
            let mut acc = Neumaier::new();
            for j in 0..n {
                let y = sy[0] + (j as f64 + 0.5) * h[1];
                for k in 0..n {
                    let r = rr[0] + (k as f64 + 0.5) * h[2];
                    let phi = arc_measure([x, y], r, r1, r2, theta);
                    if phi > 0.0 {
                        acc.add(0.25 * r * phi * phi);
                    }
                }
            }
            acc.value()
        })
        .collect();
    slabs.into_iter().collect::<Neumaier>().value() * h[0] * h[1] * h[2]
}

/// `||F||_{L^2} / (||phi_1||_{L^2} ||phi_2||_{L^2})` for indicator data.
pub fn restricted_ratio(r1: &Rect, r2: &Rect, theta: f64, n: usize) -> f64 {
    (restricted_norm_squared(r1, r2, theta, n) / (r1.area() * r2.area())).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrichartzPoint {
    pub theta: f64,
    pub ratio: f64,
    /// Points per dimension of the accepted rule.
    pub points: usize,
    /// Relative change against half as many points per dimension.
    pub refinement_change: f64,
}

/// Doubles the rule until two successive values agree to `tolerance`.
pub fn resolved_ratio(
    r1: &Rect,
    r2: &Rect,
    theta: f64,
    initial: usize,
    max: usize,
    tolerance: f64,
) -> Result<StrichartzPoint> {
    let mut n = initial;
    let mut previous = restricted_ratio(r1, r2, theta, n);
    loop {
        let next = 2 * n;
        let value = restricted_ratio(r1, r2, theta, next);
        let change = if value == 0.0 && previous == 0.0 {
            0.0
        } else {
            (value - previous).abs() / value.abs()
        };
        if change < tolerance {
            return Ok(StrichartzPoint {
                theta,
                ratio: value,
                points: next,
                refinement_change: change,
            });
        }
        if 2 * next > max {
            return Err(Error::Quadrature(100.0 * change));
        }
        n = next;
        previous = value;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub ratio: f64,
    pub std_error: f64,
    pub mollifier_width: f64,
    pub samples: usize,
}

const MC_SHARDS: u64 = 32;

/// Independent estimate from the six-dimensional form
/// `integral g(xi_1, xi - xi_1) g(xi_1', xi - xi_1') delta(E - E')`, with `E = |xi_1|^2 + |xi - xi_1|^2`
/// and the delta replaced by a narrow Gaussian.
pub fn monte_carlo_ratio(
    r1: &Rect,
    r2: &Rect,
    theta: f64,
    samples: usize,
    seed: u64,
) -> MonteCarloEstimate {
    let (_, _, rr) = domain(r1, r2);
    // Spread of E - E' across the support, used to size the mollifier.
    let spread = 4.0 * 0.5 * (rr[0] + rr[1]) * (rr[1] - rr[0]);
    let eps = 0.01 * spread;
    let norm = 1.0 / ((TAU).sqrt() * eps);
    let parts: Vec<(f64, f64)> = (0..MC_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let count = samples / MC_SHARDS as usize
                + usize::from((shard as usize) < samples % MC_SHARDS as usize);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let (mut s, mut s2) = (Neumaier::new(), Neumaier::new());
            for _ in 0..count {
                let a = r1.sample(&mut rng);
                let b = r2.sample(&mut rng);
                let a2 = r1.sample(&mut rng);
                let xi = [a[0] + b[0], a[1] + b[1]];
                let b2 = [xi[0] - a2[0], xi[1] - a2[1]];
                let v = if r2.contains(b2) && angle_ok(a, b, theta) && angle_ok(a2, b2, theta) {
                    let e = a[0] * a[0] + a[1] * a[1] + b[0] * b[0] + b[1] * b[1];
                    let e2 = a2[0] * a2[0] + a2[1] * a2[1] + b2[0] * b2[0] + b2[1] * b2[1];
                    norm * (-(e - e2).powi(2) / (2.0 * eps * eps)).exp()
                } else {
                    0.0
                };
                s.add(v);
                s2.add(v * v);
            }
            (s.value(), s2.value())
        })
        .collect();
    let total: f64 = parts.iter().map(|p| p.0).collect::<Neumaier>().value();
    let total2: f64 = parts.iter().map(|p| p.1).collect::<Neumaier>().value();
    let n = samples as f64;
    let mean = total / n;
    let var = (total2 / n - mean * mean).max(0.0);
    let volume = r1.area() * r1.area() * r2.area();
    let norm_sq = volume * mean;
    let se_norm_sq = volume * (var / n).sqrt();
    let ratio = (norm_sq / (r1.area() * r2.area())).sqrt();
    MonteCarloEstimate {
        ratio,
        // Delta method for the square root.
        std_error: if norm_sq > 0.0 {
            0.5 * ratio * se_norm_sq / norm_sq
        } else {
            0.0
        },
        mollifier_width: eps,
        samples,
    }
}

/// Rectangle-extremizer sweep in `theta` with a log-log fit, plus one Monte Carlo cross-check.
pub fn run_strichartz_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let s = &config.strichartz;
    let points: Vec<StrichartzPoint> = s
        .theta
        .iter()
        .map(|&theta| {
            let (a, b) = extremizer_rectangles(s.n1, s.n2, theta);
            resolved_ratio(&a, &b, theta, s.initial_points, s.max_points, s.tolerance)
        })
        .collect::<Result<_>>()?;
    let baseline = (s.n1.min(s.n2) / s.n1.max(s.n2)).sqrt();
    let mut summary = Table::new(
        "summary",
        &[
            "theta",
            "ratio",
            "points",
            "refinement_change",
            "baseline_ratio",
            "theta_at_least_N1_over_N2",
            "theta_below_one_fiftieth",
        ],
    );
    for p in &points {
        summary.push(vec![
            Cell::real(p.theta),
            Cell::real(p.ratio),
            Cell::Int(p.points as i64),
            Cell::real(p.refinement_change),
            Cell::real(baseline),
            Cell::Flag(p.theta >= s.n1 / s.n2),
            Cell::Flag(p.theta < 1.0 / 50.0),
        ]);
    }
    let thetas: Vec<f64> = points.iter().map(|p| p.theta).collect();
    let ratios: Vec<f64> = points.iter().map(|p| p.ratio).collect();
    let fit = fit_loglog("ratio", &thetas, &ratios);

    let mut detail = Table::new(
        "monte_carlo",
        &[
            "theta",
            "quadrature_ratio",
            "monte_carlo_ratio",
            "std_error",
            "mollifier_width",
            "samples",
            "relative_difference",
        ],
    );
    let mut checks = Vec::new();
    let th = &config.checks;
    checks.push(match fit.trusted_slope(th.residual_max) {
        Some(slope) => Check::new(
            "strichartz_slope",
            (slope - th.strichartz_slope).abs() <= th.strichartz_slope_tolerance,
            format!(
                "slope {slope:.4}, expected {} +- {}",
                th.strichartz_slope, th.strichartz_slope_tolerance
            ),
        ),
        None => Check::new(
            "strichartz_slope",
            false,
            format!("no trusted slope: {:?}", fit.slope),
        ),
    });
    checks.push(Check::new(
        "quadrature_refinement",
        points.iter().all(|p| p.refinement_change < s.tolerance),
        format!("all points resolved to {}", s.tolerance),
    ));
    if s.monte_carlo_samples > 0 {
        let p = points[0];
        let (a, b) = extremizer_rectangles(s.n1, s.n2, p.theta);
        let mc = monte_carlo_ratio(&a, &b, p.theta, s.monte_carlo_samples, s.monte_carlo_seed);
        let rel = (mc.ratio - p.ratio).abs() / p.ratio;
        detail.push(vec![
            Cell::real(p.theta),
            Cell::real(p.ratio),
            Cell::real(mc.ratio),
            Cell::real(mc.std_error),
            Cell::real(mc.mollifier_width),
            Cell::Int(mc.samples as i64),
            Cell::real(rel),
        ]);
        // Statistical error plus a small allowance for the mollifier bias.
        let allowed = 4.0 * mc.std_error / p.ratio + 0.02;
        checks.push(Check::new(
            "monte_carlo_agreement",
            rel <= allowed,
            format!("relative difference {rel:.4} (allowed {allowed:.4})"),
        ));
    }
    Ok(SweepResult {
        experiment: ExperimentKind::Strichartz,
        summary,
        detail,
        fits: vec![fit],
        checks,
        extra: json!({ "N1": s.n1, "N2": s.n2, "baseline_ratio": baseline }),
        provenance: provenance(config),
    })
}
