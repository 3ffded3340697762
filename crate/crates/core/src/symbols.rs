//! The concrete I-method symbols, the resonance-corrected modified energy
//! `E~(u) = Lambda_2(sigma_2) + sign * Lambda_4(sigma~_4)`, and sampling audits
//! of the pointwise symbol bounds.
//!
//! `x` below is the real quantity `1/4 (-f_1 + f_2 - f_3 + f_4)` with
//! `f = m^2 |xi|^2`; the symmetrized symbol `[2i X(sigma_2)]_sym` equals
//! `i x`, so `sigma~_4 = x / alpha_4` on the non-resonant angle branch.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::grid::{cubic_window, Field, Freq, Mode, Spectrum};
use crate::multilinear::engine::{
    active_window, eval_lambda2, eval_lambda4_separable, pairing4, QuadKernel, RowProducts,
};
use crate::multilinear::{add, dot, norm_sqr, Factor, SupportHint, Symbol};
use crate::multiplier::{m_eval, IMethodParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn m_of(xi: Freq, params: &IMethodParams) -> f64 {
    m_eval(norm_sqr(xi).sqrt(), params)
}

fn f_of(xi: Freq, params: &IMethodParams) -> f64 {
    let m = m_of(xi, params);
    m * m * norm_sqr(xi)
}

/// `sigma_2(xi, -xi) = 1/2 |xi|^2 m(xi)^2`.
pub fn sigma2(xi1: Freq, _xi2: Freq, params: &IMethodParams) -> f64 {
    0.5 * f_of(xi1, params)
}

/// `1/4 m_1 m_2 m_3 m_4`.
pub fn sigma4(xi: &[Freq; 4], params: &IMethodParams) -> f64 {
    0.25 * xi.iter().map(|&x| m_of(x, params)).product::<f64>()
}

/// `(m^2 - 1) |xi|^2`, exactly 0 wherever `m = 1`.
fn excess_of(xi: Freq, params: &IMethodParams) -> f64 {
    let m = m_of(xi, params);
    (m * m - 1.0) * norm_sqr(xi)
}

/// `1/4 (-f_1 + f_2 - f_3 + f_4)` with `f = m^2 |xi|^2`.
///
/// Evaluated as `alpha_4 / 4` plus the alternating sum of `(m^2 - 1) |xi|^2`,
/// so the cancellation of the `|xi|^2` terms happens exactly in `alpha_4`.
pub fn x_sigma2_sym(xi: &[Freq; 4], params: &IMethodParams) -> f64 {
    let excess = -excess_of(xi[0], params) + excess_of(xi[1], params) - excess_of(xi[2], params)
        + excess_of(xi[3], params);
    0.25 * (alpha4(xi) + excess)
}

/// `-2 xi_12 . xi_14`.
pub fn alpha4(xi: &[Freq; 4]) -> f64 {
    -2.0 * dot(add(xi[0], xi[1]), add(xi[0], xi[3]))
}

/// Cosine of the angle between `xi_12` and `xi_14`; `None` when either vanishes.
pub fn cos_resonance_angle(xi: &[Freq; 4]) -> Option<f64> {
    let p = add(xi[0], xi[1]);
    let q = add(xi[0], xi[3]);
    let (pp, qq) = (norm_sqr(p), norm_sqr(q));
    if pp == 0.0 || qq == 0.0 {
        return None;
    }
    Some((dot(p, q) / (pp * qq).sqrt()).clamp(-1.0, 1.0))
}

fn all_below(xi: &[Freq; 4], n: f64) -> bool {
    let n2 = n * n;
    xi.iter().all(|&x| norm_sqr(x) <= n2)
}

/// `|cos| >= theta0` tested without square roots: `(p.q)^2 >= theta0^2 |p|^2 |q|^2`.
fn angle_nonresonant(p: Freq, q: Freq, theta0: f64) -> bool {
    let (pp, qq) = (norm_sqr(p), norm_sqr(q));
    if pp == 0.0 || qq == 0.0 {
        return false;
    }
    let d = dot(p, q);
    d * d >= theta0 * theta0 * pp * qq
}

/// Membership in the non-resonant set: every `|xi_j| <= N`, or a defined
/// angle with `|cos| >= theta0`. Undefined angles above `N` count as resonant.
pub fn in_omega_nr(xi: &[Freq; 4], params: &IMethodParams) -> bool {
    all_below(xi, params.n)
        || angle_nonresonant(add(xi[0], xi[1]), add(xi[0], xi[3]), params.theta0)
}

/// `sigma~_4`: 1/4 below `N`, `x / alpha_4` on the angle branch, 0 when resonant.
pub fn sigma4_tilde(xi: &[Freq; 4], params: &IMethodParams) -> f64 {
    if all_below(xi, params.n) {
        return 0.25;
    }
    if !angle_nonresonant(add(xi[0], xi[1]), add(xi[0], xi[3]), params.theta0) {
        return 0.0;
    }
    let a = alpha4(xi);
    assert!(a != 0.0, "angle branch reached with alpha_4 = 0 at {xi:?}");
    x_sigma2_sym(xi, params) / a
}

fn quad(xi: &[Freq]) -> [Freq; 4] {
    [xi[0], xi[1], xi[2], xi[3]]
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// `sigma_2` as a symbol of arity 2.
#[derive(Clone, Copy, Debug)]
pub struct Sigma2(pub IMethodParams);

impl Symbol for Sigma2 {
    fn arity(&self) -> usize {
        2
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        real(sigma2(xi[0], xi[1], &self.0))
    }
}

/// `sigma_4 = 1/4 m_1 m_2 m_3 m_4`, a product symbol.
#[derive(Clone, Copy, Debug)]
pub struct Sigma4(pub IMethodParams);

impl Symbol for Sigma4 {
    fn arity(&self) -> usize {
        4
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        real(sigma4(&quad(xi), &self.0))
    }
    fn factors(&self) -> Option<Vec<Factor>> {
        let p = self.0;
        let m: Factor = Arc::new(move |x| real(m_of(x, &p)));
        let first: Factor = Arc::new(move |x| real(0.25 * m_of(x, &p)));
        Some(vec![first, m.clone(), m.clone(), m])
    }
}

/// `x = [2i X(sigma_2)]_sym / i`.
#[derive(Clone, Copy, Debug)]
pub struct XSigma2Sym(pub IMethodParams);

impl Symbol for XSigma2Sym {
    fn arity(&self) -> usize {
        4
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        real(x_sigma2_sym(&quad(xi), &self.0))
    }
}

/// `alpha_4` as a symbol.
#[derive(Clone, Copy, Debug)]
pub struct Alpha4;

impl Symbol for Alpha4 {
    fn arity(&self) -> usize {
        4
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        real(alpha4(&quad(xi)))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Sigma4Tilde(pub IMethodParams);

impl Symbol for Sigma4Tilde {
    fn arity(&self) -> usize {
        4
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        real(sigma4_tilde(&quad(xi), &self.0))
    }
}

/// `sigma~_4 - sigma_4`, which vanishes when every `|xi_j| <= N`.
#[derive(Clone, Copy, Debug)]
pub struct Sigma4Correction(pub IMethodParams);

impl Symbol for Sigma4Correction {
    fn arity(&self) -> usize {
        4
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        let t = quad(xi);
        real(sigma4_tilde(&t, &self.0) - sigma4(&t, &self.0))
    }
    fn support_hint(&self) -> SupportHint {
        SupportHint::RequiresMaxAbove(self.0.n)
    }
}

/// `i (sigma~_4 alpha_4 - x)`, the quartic part of `dE~/dt`; equals `-i x` on the resonant set.
#[derive(Clone, Copy, Debug)]
pub struct ResonantIncrement(pub IMethodParams);

impl Symbol for ResonantIncrement {
    fn arity(&self) -> usize {
        4
    }
    fn eval(&self, xi: &[Freq]) -> Complex64 {
        let t = quad(xi);
        Complex64::new(
            0.0,
            sigma4_tilde(&t, &self.0) * alpha4(&t) - x_sigma2_sym(&t, &self.0),
        )
    }
    fn support_hint(&self) -> SupportHint {
        SupportHint::RequiresMaxAbove(self.0.n)
    }
}

/// Radial lookup tables indexed by the integer `|k|^2`.
#[derive(Clone, Debug)]
struct RadialTables {
    spacing: f64,
    /// `m(|xi|)`.
    m: Vec<f64>,
    /// `m^2 |xi|^2`.
    f: Vec<f64>,
    /// `|xi| <= N`.
    low: Vec<bool>,
}

impl RadialTables {
    fn new(params: &IMethodParams, spacing: f64, radius: i32) -> Self {
        let size = (2 * radius * radius + 1) as usize;
        let n2 = params.n * params.n;
        let mut m = Vec::with_capacity(size);
        let mut f = Vec::with_capacity(size);
        let mut low = Vec::with_capacity(size);
        for n in 0..size {
            let r2 = spacing * spacing * n as f64;
            let mv = m_eval(r2.sqrt(), params);
            m.push(mv);
            f.push(mv * mv * r2);
            low.push(r2 <= n2);
        }
        Self { spacing, m, f, low }
    }

    #[inline]
    fn indices(xi: &[Mode; 4]) -> [usize; 4] {
        xi.map(|k| (k[0] * k[0] + k[1] * k[1]) as usize)
    }

    #[inline]
    fn x(&self, n: &[usize; 4]) -> f64 {
        0.25 * (-self.f[n[0]] + self.f[n[1]] - self.f[n[2]] + self.f[n[3]])
    }

    #[inline]
    fn all_low(&self, n: &[usize; 4]) -> bool {
        self.low[n[0]] && self.low[n[1]] && self.low[n[2]] && self.low[n[3]]
    }

    /// `1 / alpha_4` on the non-resonant angle branch of the pair, else 0.
    fn inverse_alpha(&self, p: Mode, q: Mode, theta0: f64) -> f64 {
        let pf = [p[0] as f64, p[1] as f64];
        let qf = [q[0] as f64, q[1] as f64];
        if angle_nonresonant(pf, qf, theta0) {
            1.0 / (-2.0 * self.spacing * self.spacing * dot(pf, qf))
        } else {
            0.0
        }
    }
}

/// Which symbol a [`ResonanceKernel`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    /// `sigma~_4`.
    Tilde,
    /// `sigma~_4 - sigma_4`.
    Correction,
    /// `i (sigma~_4 alpha_4 - x)`.
    ResonantIncrement,
    /// `sigma_4`.
    Sigma4,
}

/// Lattice kernel for the resonance symbols using radial tables and per-pair angle tests.
#[derive(Clone, Debug)]
pub struct ResonanceKernel {
    kind: KernelKind,
    theta0: f64,
    tables: RadialTables,
}

impl ResonanceKernel {
    /// Kernel for tuples whose entries satisfy `|k|_inf <= radius`.
    pub fn new(kind: KernelKind, params: &IMethodParams, spacing: f64, radius: i32) -> Self {
        Self {
            kind,
            theta0: params.theta0,
            tables: RadialTables::new(params, spacing, radius),
        }
    }
}

impl QuadKernel for ResonanceKernel {
    type Pair = f64;

    #[inline]
    fn pair(&self, p: Mode, q: Mode) -> Option<f64> {
        let inv = self.tables.inverse_alpha(p, q, self.theta0);
        match self.kind {
            // Non-resonant pairs contribute nothing to the increment.
            KernelKind::ResonantIncrement if inv != 0.0 => None,
            _ => Some(inv),
        }
    }

    #[inline]
    fn weight(&self, inv_alpha: &f64, xi: &[Mode; 4]) -> Complex64 {
        let t = &self.tables;
        let n = RadialTables::indices(xi);
        match self.kind {
            KernelKind::Tilde => {
                if t.all_low(&n) {
                    real(0.25)
                } else if *inv_alpha != 0.0 {
                    real(t.x(&n) * inv_alpha)
                } else {
                    ZERO
                }
            }
            KernelKind::Correction => {
                if t.all_low(&n) {
                    return ZERO;
                }
                let tilde = if *inv_alpha != 0.0 {
                    t.x(&n) * inv_alpha
                } else {
                    0.0
                };
                real(tilde - 0.25 * t.m[n[0]] * t.m[n[1]] * t.m[n[2]] * t.m[n[3]])
            }
            KernelKind::ResonantIncrement => {
                if t.all_low(&n) {
                    ZERO
                } else {
                    Complex64::new(0.0, -t.x(&n))
                }
            }
            KernelKind::Sigma4 => real(0.25 * t.m[n[0]] * t.m[n[1]] * t.m[n[2]] * t.m[n[3]]),
        }
    }

    fn row(
        &self,
        inv_alpha: &f64,
        p: Mode,
        q: Mode,
        a0: i32,
        start: i32,
        g: RowProducts<'_>,
    ) -> Complex64 {
        let t = &self.tables;
        let inv = *inv_alpha;
        // First-component squares are fixed along the row.
        let s1 = a0 * a0;
        let s2 = (p[0] - a0) * (p[0] - a0);
        let s3 = (a0 - p[0] - q[0]) * (a0 - p[0] - q[0]);
        let s4 = (q[0] - a0) * (q[0] - a0);
        let index = |j: usize| {
            let a1 = start + j as i32;
            let (b, c, d) = (p[1] - a1, a1 - p[1] - q[1], q[1] - a1);
            [
                (s1 + a1 * a1) as usize,
                (s2 + b * b) as usize,
                (s3 + c * c) as usize,
                (s4 + d * d) as usize,
            ]
        };
        let mut row = ZERO;
        match self.kind {
            KernelKind::Tilde => {
                for j in 0..g.len() {
                    let n = index(j);
                    let w = if t.all_low(&n) { 0.25 } else { t.x(&n) * inv };
                    row += g.get(j) * w;
                }
            }
            KernelKind::Correction => {
                for j in 0..g.len() {
                    let n = index(j);
                    if !t.all_low(&n) {
                        let sigma4 = 0.25 * t.m[n[0]] * t.m[n[1]] * t.m[n[2]] * t.m[n[3]];
                        row += g.get(j) * (t.x(&n) * inv - sigma4);
                    }
                }
            }
            KernelKind::ResonantIncrement => {
                for j in 0..g.len() {
                    let n = index(j);
                    if !t.all_low(&n) {
                        row += g.get(j) * Complex64::new(0.0, -t.x(&n));
                    }
                }
            }
            KernelKind::Sigma4 => {
                for j in 0..g.len() {
                    let n = index(j);
                    row += g.get(j) * (0.25 * t.m[n[0]] * t.m[n[1]] * t.m[n[2]] * t.m[n[3]]);
                }
            }
        }
        row
    }
}

/// Evaluates `E~` and its pieces on dealiased spectra with the fast kernels.
#[derive(Clone, Copy, Debug)]
pub struct TildeEnergy {
    pub params: IMethodParams,
}

/// Quartic and sextic parts of `dE~/dt` at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IncrementTerms {
    /// `sign * Lambda_4(i (sigma~_4 alpha_4 - x))`.
    pub quartic: f64,
    /// `Lambda_6(4i X(sigma~_4))` over the dealiased lattice.
    pub sextic: f64,
}

impl IncrementTerms {
    pub fn derivative(&self) -> f64 {
        self.quartic - self.sextic
    }
}

/// Values of the energies at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TildeValues {
    /// `Lambda_2(sigma_2) = 1/2 ||grad Iu||^2`.
    pub kinetic: f64,
    /// `Lambda_4(sigma_4) = 1/4 ||Iu||_4^4`.
    pub quartic: f64,
    /// `Lambda_4(sigma~_4 - sigma_4)`.
    pub correction: f64,
    pub sign: f64,
}

impl TildeValues {
    pub fn e_iu(&self) -> f64 {
        self.kinetic + self.sign * self.quartic
    }

    pub fn e_tilde(&self) -> f64 {
        self.kinetic + self.sign * (self.quartic + self.correction)
    }

    /// `E(Iu) - E~(u) = -sign * Lambda_4(sigma~_4 - sigma_4)`.
    pub fn gap(&self) -> f64 {
        -self.sign * self.correction
    }
}

impl TildeEnergy {
    pub fn new(params: IMethodParams) -> Self {
        Self { params }
    }

    fn kernel(&self, kind: KernelKind, spec: &Spectrum, radius: usize) -> ResonanceKernel {
        ResonanceKernel::new(kind, &self.params, spec.grid().spacing(), radius as i32)
    }

    /// `Lambda_4` of a fast kernel over the dealiased lattice.
    pub fn lambda4(&self, kind: KernelKind, spec: &Spectrum) -> Result<Complex64> {
        spec.require_dealiased()?;
        let u = active_window(spec);
        let kernel = self.kernel(kind, spec, spec.grid().cutoff());
        Ok(spec.grid().length().powi(2) * pairing4(&kernel, [&u, &u, &u, &u]))
    }

    /// `Lambda_4(sigma~_4 - sigma_4)` by direct enumeration, skipping tuples below `N`.
    pub fn correction(&self, spec: &Spectrum) -> Result<f64> {
        if self.params.is_identity() {
            return Ok(0.0);
        }
        Ok(self.lambda4(KernelKind::Correction, spec)?.re)
    }

    pub fn values(&self, spec: &Spectrum) -> Result<TildeValues> {
        let kinetic = eval_lambda2(&Sigma2(self.params), spec)?;
        let quartic = eval_lambda4_separable(&Sigma4(self.params), spec)?;
        let correction = self.correction(spec)?;
        Ok(TildeValues {
            kinetic,
            quartic,
            correction,
            sign: self.params.sign.value(),
        })
    }

    pub fn value(&self, spec: &Spectrum) -> Result<f64> {
        Ok(self.values(spec)?.e_tilde())
    }

    pub fn increment_terms(&self, spec: &Spectrum) -> Result<IncrementTerms> {
        spec.require_dealiased()?;
        let sign = self.params.sign.value();
        let quartic = if self.params.is_identity() {
            0.0
        } else {
            sign * self.lambda4(KernelKind::ResonantIncrement, spec)?.re
        };
        let k = spec.grid().cutoff();
        let w = cubic_window(spec, k);
        let u = active_window(spec);
        let kernel = self.kernel(KernelKind::Tilde, spec, k);
        let s = spec.grid().length().powi(2) * pairing4(&kernel, [&w, &u, &u, &u]);
        let sextic = (Complex64::new(0.0, 4.0) * s).re;
        Ok(IncrementTerms { quartic, sextic })
    }
}

/// `E~(u) = Lambda_2(sigma_2) + sign * Lambda_4(sigma~_4)` for a dealiased field.
pub fn modified_energy_tilde(u: &Field, params: &IMethodParams) -> Result<f64> {
    TildeEnergy::new(*params).value(&crate::grid::forward_transform(u))
}

/// Regime of the symbol lemma after canonicalization (`|xi_1|` largest, `|xi_12| >= |xi_14|`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratum {
    All,
    /// `|xi_12|, |xi_14| >= |xi_1| / 4`.
    A,
    /// `|xi_12| >= |xi_1| / 4 > |xi_14|`.
    B,
    /// `|xi_12|, |xi_14| < |xi_1| / 4`.
    C,
}

impl std::str::FromStr for Stratum {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Stratum::All),
            "a" => Ok(Stratum::A),
            "b" => Ok(Stratum::B),
            "c" => Ok(Stratum::C),
            other => Err(crate::error::Error::Config(format!(
                "unknown stratum {other:?}"
            ))),
        }
    }
}

const STRATUM_SPLIT: f64 = 0.25;

/// Applies the symmetry group so that `|xi_1|` is largest and `|xi_12| >= |xi_14|`.
///
/// Both audit ratios are invariant under these moves.
pub fn canonicalize(xi: [Freq; 4]) -> [Freq; 4] {
    let largest = (0..4)
        .max_by(|&a, &b| norm_sqr(xi[a]).total_cmp(&norm_sqr(xi[b])).then(b.cmp(&a)))
        .unwrap();
    let mut t = match largest {
        0 => xi,
        1 => [xi[1], xi[0], xi[3], xi[2]],
        2 => [xi[2], xi[1], xi[0], xi[3]],
        _ => [xi[3], xi[2], xi[1], xi[0]],
    };
    if norm_sqr(add(t[0], t[1])) < norm_sqr(add(t[0], t[3])) {
        t.swap(1, 3);
    }
    t
}

pub fn classify(xi: &[Freq; 4]) -> Stratum {
    let r1 = norm_sqr(xi[0]).sqrt();
    let a = norm_sqr(add(xi[0], xi[1])).sqrt() / r1;
    let b = norm_sqr(add(xi[0], xi[3])).sqrt() / r1;
    if b >= STRATUM_SPLIT {
        Stratum::A
    } else if a >= STRATUM_SPLIT {
        Stratum::B
    } else {
        Stratum::C
    }
}

/// `|x| / (min m_j^2 |xi_12| |xi_14|)`; `None` where the denominator vanishes.
pub fn lemma_ratio(xi: &[Freq; 4], params: &IMethodParams) -> Option<f64> {
    let min_m = xi
        .iter()
        .map(|&x| m_of(x, params))
        .fold(f64::INFINITY, f64::min);
    let denom = min_m * min_m * (norm_sqr(add(xi[0], xi[1])) * norm_sqr(add(xi[0], xi[3]))).sqrt();
    (denom > 0.0).then(|| x_sigma2_sym(xi, params).abs() / denom)
}

/// `|sigma~_4| theta0 / min m_j^2`.
pub fn corollary_ratio(xi: &[Freq; 4], params: &IMethodParams) -> f64 {
    let min_m = xi
        .iter()
        .map(|&x| m_of(x, params))
        .fold(f64::INFINITY, f64::min);
    sigma4_tilde(xi, params).abs() * params.theta0 / (min_m * min_m)
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditConfig {
    pub params: IMethodParams,
    pub samples: usize,
    pub seed: u64,
    pub stratum: Stratum,
    /// `|xi_1|` is drawn log-uniformly from `[r_min, r_max]`.
    pub r_min: f64,
    pub r_max: f64,
}

impl AuditConfig {
    pub fn new(params: IMethodParams, samples: usize, seed: u64, stratum: Stratum) -> Self {
        let n = if params.is_identity() { 8.0 } else { params.n };
        Self {
            params,
            samples,
            seed,
            stratum,
            r_min: n / 4.0,
            r_max: 64.0 * n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramRow {
    pub log10_lo: f64,
    pub log10_hi: f64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratumSummary {
    pub stratum: Stratum,
    pub samples: u64,
    pub max_ratio: f64,
    pub max_corollary_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymbolAuditReport {
    pub samples: u64,
    pub max_ratio: f64,
    pub argmax_tuple: [Freq; 4],
    pub max_corollary_ratio: f64,
    pub corollary_argmax_tuple: [Freq; 4],
    pub histogram: Vec<HistogramRow>,
    pub strata: Vec<StratumSummary>,
}

const HIST_LO: f64 = -8.0;
const HIST_HI: f64 = 2.0;
const HIST_BINS: usize = 40;
/// Fixed so that the sample stream does not depend on the thread count.
const AUDIT_SHARDS: u64 = 64;

fn polar(r: f64, angle: f64) -> Freq {
    [r * angle.cos(), r * angle.sin()]
}

fn draw_tuple(rng: &mut ChaCha8Rng, cfg: &AuditConfig, stratum: Stratum) -> [Freq; 4] {
    let log_span = (cfg.r_max / cfg.r_min).ln();
    loop {
        let r1 = cfg.r_min * (rng.random::<f64>() * log_span).exp();
        let xi1 = polar(r1, rng.random_range(0.0..std::f64::consts::TAU));
        // Relative sizes of xi_12 and xi_14, log-uniform so small separations are probed.
        let mut rel = |big: bool| {
            if big {
                STRATUM_SPLIT * (rng.random::<f64>() * 8f64.ln()).exp()
            } else {
                STRATUM_SPLIT * (-rng.random::<f64>() * 1e3f64.ln()).exp()
            }
        };
        let (a, b) = match stratum {
            Stratum::A => (rel(true), rel(true)),
            Stratum::B => (rel(true), rel(false)),
            Stratum::C | Stratum::All => (rel(false), rel(false)),
        };
        let p = polar(a * r1, rng.random_range(0.0..std::f64::consts::TAU));
        let q = polar(b * r1, rng.random_range(0.0..std::f64::consts::TAU));
        let xi = [
            xi1,
            [p[0] - xi1[0], p[1] - xi1[1]],
            [xi1[0] - p[0] - q[0], xi1[1] - p[1] - q[1]],
            [q[0] - xi1[0], q[1] - xi1[1]],
        ];
        let t = canonicalize(xi);
        if classify(&t) == stratum {
            return t;
        }
    }
}

#[derive(Clone)]
struct Partial {
    samples: u64,
    max_ratio: f64,
    argmax: [Freq; 4],
    max_cor: f64,
    cor_argmax: [Freq; 4],
    hist: Vec<u64>,
}

impl Partial {
    fn new() -> Self {
        Self {
            samples: 0,
            max_ratio: 0.0,
            argmax: [[0.0; 2]; 4],
            max_cor: 0.0,
            cor_argmax: [[0.0; 2]; 4],
            hist: vec![0; HIST_BINS],
        }
    }

    fn merge(&mut self, other: &Partial) {
        self.samples += other.samples;
        if other.max_ratio > self.max_ratio {
            self.max_ratio = other.max_ratio;
            self.argmax = other.argmax;
        }
        if other.max_cor > self.max_cor {
            self.max_cor = other.max_cor;
            self.cor_argmax = other.cor_argmax;
        }
        for (a, b) in self.hist.iter_mut().zip(&other.hist) {
            *a += b;
        }
    }
}

fn audit_stratum(cfg: &AuditConfig, stratum: Stratum, samples: usize, stream_base: u64) -> Partial {
    let shards: Vec<Partial> = (0..AUDIT_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let count = samples / AUDIT_SHARDS as usize
                + usize::from((shard as usize) < samples % AUDIT_SHARDS as usize);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream_base + shard);
            let mut part = Partial::new();
            for _ in 0..count {
                let t = draw_tuple(&mut rng, cfg, stratum);
                part.samples += 1;
                if let Some(r) = lemma_ratio(&t, &cfg.params) {
                    if r > part.max_ratio {
                        part.max_ratio = r;
                        part.argmax = t;
                    }
                    let pos = ((r.max(1e-300).log10() - HIST_LO) / (HIST_HI - HIST_LO)
                        * HIST_BINS as f64)
                        .floor();
                    part.hist[pos.clamp(0.0, (HIST_BINS - 1) as f64) as usize] += 1;
                }
                let c = corollary_ratio(&t, &cfg.params);
                if c > part.max_cor {
                    part.max_cor = c;
                    part.cor_argmax = t;
                }
            }
            part
        })
        .collect();
    let mut total = Partial::new();
    for s in &shards {
        total.merge(s);
    }
    total
}

/// Samples tuples stratified over the three regimes of the symbol lemma and
/// records the lemma ratio and the corollary ratio.
///
/// With `Stratum::All` the sample budget is split evenly across the strata.
pub fn audit_symbol_bounds(cfg: &AuditConfig) -> SymbolAuditReport {
    let strata: Vec<(Stratum, usize)> = match cfg.stratum {
        Stratum::All => {
            let third = cfg.samples / 3;
            vec![
                (Stratum::A, cfg.samples - 2 * third),
                (Stratum::B, third),
                (Stratum::C, third),
            ]
        }
        s => vec![(s, cfg.samples)],
    };
    let mut total = Partial::new();
    let mut summaries = Vec::new();
    for (i, &(stratum, count)) in strata.iter().enumerate() {
        let part = audit_stratum(cfg, stratum, count, i as u64 * AUDIT_SHARDS);
        summaries.push(StratumSummary {
            stratum,
            samples: part.samples,
            max_ratio: part.max_ratio,
            max_corollary_ratio: part.max_cor,
        });
        total.merge(&part);
    }
    let width = (HIST_HI - HIST_LO) / HIST_BINS as f64;
    let histogram = total
        .hist
        .iter()
        .enumerate()
        .map(|(i, &count)| HistogramRow {
            log10_lo: HIST_LO + i as f64 * width,
            log10_hi: HIST_LO + (i + 1) as f64 * width,
            count,
        })
        .collect();
    SymbolAuditReport {
        samples: total.samples,
        max_ratio: total.max_ratio,
        argmax_tuple: total.argmax,
        max_corollary_ratio: total.max_cor,
        corollary_argmax_tuple: total.cor_argmax,
        histogram,
        strata: summaries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{energy_spectrum, Grid2D};
    use crate::multilinear::engine::{eval_lambda4_direct, SymbolKernel};
    use crate::multilinear::{alpha_k, Symmetrized};
    use crate::multiplier::energy_iu_spectrum;

    fn params(n: f64, s: f64) -> IMethodParams {
        IMethodParams::new(n, s).unwrap()
    }

    fn random_lattice_tuple(rng: &mut ChaCha8Rng, r: i32) -> [Freq; 4] {
        let mut t = [[0.0; 2]; 4];
        for slot in t.iter_mut().take(3) {
            *slot = [
                rng.random_range(-r..=r) as f64,
                rng.random_range(-r..=r) as f64,
            ];
        }
        t[3] = [-t[0][0] - t[1][0] - t[2][0], -t[0][1] - t[1][1] - t[2][1]];
        t
    }

    fn random_spectrum(grid: Grid2D, seed: u64) -> Spectrum {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Spectrum::from_active_fn(grid, |k| {
            let r2 = (k[0] * k[0] + k[1] * k[1]) as f64;
            Complex64::from_polar((1.0 + r2).powf(-1.0), rng.random_range(0.0..6.28))
        })
    }

    #[test]
    fn scalar_examples() {
        let p = params(4.0, 0.5);
        assert_eq!(sigma2([2.0, 0.0], [-2.0, 0.0], &p), 2.0);
        assert_eq!(sigma2([0.0, 0.0], [0.0, 0.0], &p), 0.0);
        assert!((sigma2([16.0, 0.0], [-16.0, 0.0], &p) - 32.0).abs() < 1e-12);
        let t = [[2.0, 0.0], [-1.0, 0.0], [0.0, 0.0], [-1.0, 0.0]];
        let one = IMethodParams::identity();
        assert_eq!(x_sigma2_sym(&t, &one), -0.5);
        assert_eq!(alpha4(&t), -2.0);
        assert_eq!(alpha4(&t), alpha_k(&t));
        assert_eq!(sigma4(&t, &p), 0.25);
        let pair = [[1.0, 2.0], [-1.0, -2.0], [3.0, 0.0], [-3.0, 0.0]];
        assert_eq!(x_sigma2_sym(&pair, &p), 0.0);
    }

    #[test]
    fn angle_and_omega_examples() {
        let orth = [[1.0, 0.0], [0.0, 0.0], [0.0, -1.0], [-1.0, 1.0]];
        assert_eq!(cos_resonance_angle(&orth), Some(0.0));
        assert_eq!(alpha4(&orth), 0.0);
        let par = [[1.0, 0.0], [0.0, 0.0], [-1.0, 0.0], [0.0, 0.0]];
        assert_eq!(cos_resonance_angle(&par), Some(1.0));
        let degenerate = [[5.0, 0.0], [-5.0, 0.0], [2.0, 0.0], [-2.0, 0.0]];
        assert_eq!(cos_resonance_angle(&degenerate), None);
        let p = params(2.0, 0.6);
        assert!(in_omega_nr(&orth, &p));
        assert!(!in_omega_nr(&degenerate, &p));
        assert_eq!(sigma4_tilde(&degenerate, &p), 0.0);
        let high_par = [[5.0, 0.0], [0.0, 0.0], [-5.0, 0.0], [0.0, 0.0]];
        assert!(in_omega_nr(&high_par, &p));
        let high_orth = [[5.0, 0.0], [0.0, 0.0], [0.0, -5.0], [-5.0, 5.0]];
        assert!(!in_omega_nr(&high_orth, &p));
        assert_eq!(sigma4_tilde(&high_orth, &p), 0.0);
    }

    #[test]
    fn tilde_is_group_invariant() {
        let p = params(3.0, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let t = random_lattice_tuple(&mut rng, 8);
            let v = sigma4_tilde(&t, &p);
            for g in [
                [t[2], t[1], t[0], t[3]],
                [t[0], t[3], t[2], t[1]],
                [t[1], t[0], t[3], t[2]],
            ] {
                assert!((sigma4_tilde(&g, &p) - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn x_is_the_symmetrized_extension() {
        // [2i X(sigma_2)]_sym computed by brute-force group averaging equals i x.
        let p = params(2.0, 0.6);
        let ext = crate::multilinear::FnSymbol::new(4, move |xi: &[Freq]| {
            Complex64::new(0.0, 2.0 * sigma2(add(add(xi[0], xi[1]), xi[2]), xi[3], &p))
        });
        let sym = Symmetrized::new(ext);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let t = random_lattice_tuple(&mut rng, 9);
            let v = sym.eval(&t);
            let x = x_sigma2_sym(&t, &p);
            assert!((v - Complex64::new(0.0, x)).norm() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn fast_kernels_match_generic_symbols() {
        let grid = Grid2D::periodic(16).unwrap();
        let spec = random_spectrum(grid, 3);
        let p = params(2.0, 0.6);
        let te = TildeEnergy::new(p);
        let u = active_window(&spec);
        let l2 = grid.length().powi(2);
        let generic = |s: &dyn Symbol| l2 * pairing4(&SymbolKernel::new(s, 1.0), [&u, &u, &u, &u]);
        let cases: [(KernelKind, Box<dyn Symbol>); 4] = [
            (KernelKind::Tilde, Box::new(Sigma4Tilde(p))),
            (KernelKind::Correction, Box::new(Sigma4Correction(p))),
            (
                KernelKind::ResonantIncrement,
                Box::new(ResonantIncrement(p)),
            ),
            (KernelKind::Sigma4, Box::new(Sigma4(p))),
        ];
        for (kind, sym) in cases {
            let fast = te.lambda4(kind, &spec).unwrap();
            let slow = generic(sym.as_ref());
            assert!(
                (fast - slow).norm() <= 1e-12 * slow.norm().max(1e-300),
                "{kind:?} {fast} {slow}"
            );
        }
    }

    #[test]
    fn tilde_energy_split_matches_direct_sum() {
        let grid = Grid2D::periodic(12).unwrap();
        let spec = random_spectrum(grid, 4);
        let p = params(2.0, 0.6);
        let v = TildeEnergy::new(p).values(&spec).unwrap();
        let direct = eval_lambda4_direct(&Sigma4Tilde(p), &spec, None).unwrap();
        assert!((v.quartic + v.correction - direct).abs() < 1e-12 * direct.abs());
        assert!((v.e_iu() - energy_iu_spectrum(&spec, &p)).abs() < 1e-12 * v.e_iu());
    }

    #[test]
    fn low_band_field_has_equal_energies() {
        let grid = Grid2D::periodic(16).unwrap();
        let p = params(6.0, 0.6);
        let spec = Spectrum::from_active_fn(grid, |k| {
            if k[0].abs().max(k[1].abs()) <= 1 {
                Complex64::new(0.3, 0.1 * k[0] as f64)
            } else {
                ZERO
            }
        });
        let v = TildeEnergy::new(p).values(&spec).unwrap();
        assert_eq!(v.correction, 0.0);
        let e = energy_spectrum(&spec, 1.0);
        assert!((v.e_tilde() - e).abs() < 1e-13 * e);
        assert_eq!(
            TildeEnergy::new(p).value(&Spectrum::zeros(grid)).unwrap(),
            0.0
        );
    }

    #[test]
    fn tilde_energy_invariances() {
        let grid = Grid2D::periodic(12).unwrap();
        let spec = random_spectrum(grid, 5);
        let te = TildeEnergy::new(params(2.0, 0.6));
        let base = te.value(&spec).unwrap();
        let rotated = spec.scaled(Complex64::from_polar(1.0, 2.0));
        let shifted = spec.map_modes(|k, c| {
            c * Complex64::from_polar(
                1.0,
                -std::f64::consts::TAU * (2 * k[0] - 5 * k[1]) as f64 / 12.0,
            )
        });
        for other in [rotated, shifted] {
            assert!((te.value(&other).unwrap() - base).abs() < 1e-12 * base.abs());
        }
    }

    #[test]
    fn canonical_form() {
        let t = [[1.0, 0.0], [4.0, 1.0], [-2.0, 0.0], [-3.0, -1.0]];
        let c = canonicalize(t);
        assert_eq!(c[0], [4.0, 1.0]);
        assert!(norm_sqr(add(c[0], c[1])) >= norm_sqr(add(c[0], c[3])));
        let p = params(2.0, 0.6);
        assert!((lemma_ratio(&t, &p).unwrap() - lemma_ratio(&c, &p).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn audit_identity_multiplier_half_bound() {
        let cfg = AuditConfig::new(IMethodParams::identity(), 30_000, 1, Stratum::All);
        let r = audit_symbol_bounds(&cfg);
        assert_eq!(r.samples, 30_000);
        assert!(r.max_ratio <= 0.5 + 1e-12, "{}", r.max_ratio);
        assert_eq!(r.strata.len(), 3);
    }

    #[test]
    fn audit_is_deterministic() {
        let cfg = AuditConfig::new(params(8.0, 0.6), 5_000, 9, Stratum::B);
        assert_eq!(audit_symbol_bounds(&cfg), audit_symbol_bounds(&cfg));
    }
}
