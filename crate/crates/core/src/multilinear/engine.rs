//! Exact lattice evaluation of `Lambda_2`, `Lambda_4` and `Lambda_6`.
//!
//! Normalization: `Lambda_k(M; u) = L^2 Re sum M(xi) g_1(xi_1) ... g_k(xi_k)`
//! over lattice tuples summing to zero, with `g(xi) = c(xi)` in odd slots and
//! `g(xi) = conj(c(-xi))` in even slots. With this choice
//! `Lambda_2(sigma_2) = 1/2 ||grad Iu||^2` and `Lambda_4(sigma_4) = 1/4 ||Iu||_4^4`.
//!
//! Quadrilinear sums are enumerated as `(p, q, xi_1)` with `p = xi_1 + xi_2`,
//! `q = xi_1 + xi_4`. Work is split into one tile per `p`; rows inside a tile
//! are summed plainly, row sums are combined with compensated summation, and
//! tile partials are reduced in tile order, so the result does not depend on
//! the number of worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{cubic_window, padded_physical, Freq, Mode, ModeWindow, Spectrum};
use crate::multilinear::{norm_sqr, SupportHint, Symbol, TimesIAlpha};
use crate::multiplier::IMethodParams;
use crate::solver::rhs;
use crate::summation::{ComplexNeumaier, Neumaier};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A quartic symbol specialized for the lattice enumeration.
///
/// `pair` sees `(p, q) = (xi_1 + xi_2, xi_1 + xi_4)` once per pair and may
/// return `None` when every tuple of that pair has a zero symbol; `weight`
/// is then evaluated for each tuple of the pair.
pub trait QuadKernel: Sync {
    type Pair;

    fn pair(&self, p: Mode, q: Mode) -> Option<Self::Pair>;

    fn weight(&self, pair: &Self::Pair, xi: &[Mode; 4]) -> Complex64;

    /// `sum_j weight(xi(j)) g[j]` along one row of tuples with `xi_1 = (a0, start + j)`.
    ///
    /// Kernels may override this with a faster loop; the summation order must stay sequential in `j`.
    #[inline]
    fn row(
        &self,
        pair: &Self::Pair,
        p: Mode,
        q: Mode,
        a0: i32,
        start: i32,
        g: RowProducts<'_>,
    ) -> Complex64 {
        let mut row = ZERO;
        let c0 = a0 - p[0] - q[0];
        for j in 0..g.len() {
            let a1 = start + j as i32;
            let xi = [
                [a0, a1],
                [p[0] - a0, p[1] - a1],
                [c0, a1 - p[1] - q[1]],
                [q[0] - a0, q[1] - a1],
            ];
            row += self.weight(pair, &xi) * g.get(j);
        }
        row
    }
}

/// The per-tuple data products along one row: `front[j] * back[j]`.
#[derive(Clone, Copy)]
pub struct RowProducts<'a> {
    front: &'a [Complex64],
    back: &'a [Complex64],
}

impl RowProducts<'_> {
    #[inline]
    pub fn len(&self) -> usize {
        self.front.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.front.is_empty()
    }

    #[inline]
    pub fn get(&self, j: usize) -> Complex64 {
        self.front[j] * self.back[j]
    }
}

#[inline]
fn clamp_range(r: [i32; 4], p: i32, q: i32) -> (i32, i32) {
    let lo = (-r[0]).max(p - r[1]).max(p + q - r[2]).max(q - r[3]);
    let hi = r[0].min(p + r[1]).min(p + q + r[2]).min(q + r[3]);
    (lo, hi)
}

/// `sum weight(xi) v1(xi_1) conj(v2(-xi_2)) v3(xi_3) conj(v4(-xi_4))` over
/// `xi_1 + xi_2 + xi_3 + xi_4 = 0` with each `xi_j` inside its window.
pub fn pairing4<K: QuadKernel>(kernel: &K, slots: [&ModeWindow; 4]) -> Complex64 {
    let r = slots.map(|w| w.radius());
    let pr = r[0] + r[1];
    let qr = r[0] + r[3];
    let pw = (2 * pr + 1) as usize;
    let partials: Vec<Complex64> = (0..pw * pw)
        .into_par_iter()
        .map(|tile| {
            let p = [(tile / pw) as i32 - pr, (tile % pw) as i32 - pr];
            tile_sum(kernel, slots, r, p, qr)
        })
        .collect();
    partials.into_iter().collect::<ComplexNeumaier>().value()
}

fn tile_sum<K: QuadKernel>(
    kernel: &K,
    slots: [&ModeWindow; 4],
    r: [i32; 4],
    p: Mode,
    qr: i32,
) -> Complex64 {
    let [w1, w2, w3, w4] = slots;
    // a(xi_1) = v1(xi_1) conj(v2(xi_1 - p)) and c(d) = v3(d - p) conj(v4(d)) with d = xi_1 - q,
    // so each tuple costs one product; entries outside the joint windows stay zero.
    let front = ModeWindow::from_fn(r[0] as usize, |a| {
        let b = [a[0] - p[0], a[1] - p[1]];
        if w2.contains(b) {
            w1.get(a) * w2.get(b).conj()
        } else {
            ZERO
        }
    });
    let back = ModeWindow::from_fn(r[3] as usize, |d| {
        let c = [d[0] - p[0], d[1] - p[1]];
        if w3.contains(c) {
            w3.get(c) * w4.get(d).conj()
        } else {
            ZERO
        }
    });
    let (fv, bv) = (front.values(), back.values());
    let mut acc = ComplexNeumaier::new();
    for q0 in -qr..=qr {
        let (lo0, hi0) = clamp_range(r, p[0], q0);
        if lo0 > hi0 {
            continue;
        }
        for q1 in -qr..=qr {
            let (lo1, hi1) = clamp_range(r, p[1], q1);
            if lo1 > hi1 {
                continue;
            }
            let q = [q0, q1];
            let Some(pair) = kernel.pair(p, q) else {
                continue;
            };
            let len = (hi1 - lo1 + 1) as usize;
            for a0 in lo0..=hi0 {
                let i1 = front.index([a0, lo1]);
                let i4 = back.index([a0 - q0, lo1 - q1]);
                let g = RowProducts {
                    front: &fv[i1..i1 + len],
                    back: &bv[i4..i4 + len],
                };
                acc.add(kernel.row(&pair, p, q, a0, lo1, g));
            }
        }
    }
    acc.value()
}

/// Adapts a generic [`Symbol`] of arity 4 to the lattice enumeration.
pub struct SymbolKernel<'a, S: ?Sized> {
    symbol: &'a S,
    spacing: f64,
    prune_below: Option<f64>,
    mask: Option<&'a (dyn Fn(&[Freq; 4]) -> bool + Sync)>,
}

impl<'a, S: Symbol + ?Sized> SymbolKernel<'a, S> {
    pub fn new(symbol: &'a S, spacing: f64) -> Self {
        let prune_below = match symbol.support_hint() {
            SupportHint::Everywhere => None,
            SupportHint::RequiresMaxAbove(n) => Some(n * n),
        };
        Self {
            symbol,
            spacing,
            prune_below,
            mask: None,
        }
    }

    pub fn with_mask(mut self, mask: Option<&'a (dyn Fn(&[Freq; 4]) -> bool + Sync)>) -> Self {
        self.mask = mask;
        self
    }
}

impl<S: Symbol + ?Sized> QuadKernel for SymbolKernel<'_, S> {
    type Pair = ();

    fn pair(&self, _p: Mode, _q: Mode) -> Option<()> {
        Some(())
    }

    #[inline]
    fn weight(&self, _pair: &(), xi: &[Mode; 4]) -> Complex64 {
        let h = self.spacing;
        let f = xi.map(|k| [h * k[0] as f64, h * k[1] as f64]);
        if let Some(n2) = self.prune_below {
            if f.iter().all(|&x| norm_sqr(x) <= n2) {
                return ZERO;
            }
        }
        if let Some(mask) = self.mask {
            if !mask(&f) {
                return ZERO;
            }
        }
        self.symbol.eval(&f)
    }
}

fn check_arity(symbol: &(impl Symbol + ?Sized), expected: usize) -> Result<()> {
    if symbol.arity() != expected {
        return Err(Error::Arity {
            expected,
            got: symbol.arity(),
        });
    }
    Ok(())
}

/// `L^2 Re sum_xi M(xi, -xi) |c(xi)|^2`.
pub fn eval_lambda2(symbol: &(impl Symbol + ?Sized), spec: &Spectrum) -> Result<f64> {
    check_arity(symbol, 2)?;
    let grid = spec.grid();
    let total: Neumaier = spec
        .modes()
        .filter(|(_, c)| *c != ZERO)
        .map(|(k, c)| {
            let xi = grid.frequency(k);
            (symbol.eval(&[xi, [-xi[0], -xi[1]]]) * c.norm_sqr()).re
        })
        .collect();
    Ok(grid.length().powi(2) * total.value())
}

/// `L^2 Re pairing4(kernel, slots)`: the quadrilinear form with arbitrary slot inputs.
pub fn lambda4_form<K: QuadKernel>(kernel: &K, slots: [&ModeWindow; 4], length: f64) -> f64 {
    length * length * pairing4(kernel, slots).re
}

/// Coefficient window over the dealiased lattice.
pub fn active_window(spec: &Spectrum) -> ModeWindow {
    ModeWindow::from_spectrum(spec, spec.grid().cutoff())
}

/// `Lambda_4(M; u)` by direct enumeration of all dealiased quadruples.
///
/// Tuples failing `mask`, or with every `|xi_j| <= N` when the symbol
/// declares that support hint, are skipped.
pub fn eval_lambda4_direct(
    symbol: &(impl Symbol + ?Sized),
    spec: &Spectrum,
    mask: Option<&(dyn Fn(&[Freq; 4]) -> bool + Sync)>,
) -> Result<f64> {
    check_arity(symbol, 4)?;
    spec.require_dealiased()?;
    let w = active_window(spec);
    let kernel = SymbolKernel::new(symbol, spec.grid().spacing()).with_mask(mask);
    Ok(lambda4_form(
        &kernel,
        [&w, &w, &w, &w],
        spec.grid().length(),
    ))
}

/// `Lambda_4(M; u)` for a product symbol as `Re integral v1 conj(v2) v3 conj(v4)`,
/// with `v_j` the multiplier images of `u`, integrated exactly on a padded grid.
pub fn eval_lambda4_separable(symbol: &(impl Symbol + ?Sized), spec: &Spectrum) -> Result<f64> {
    check_arity(symbol, 4)?;
    let factors = symbol.factors().ok_or(Error::NotSeparable)?;
    let grid = *spec.grid();
    let band = spec.band();
    let p = (4 * band + 1).max(grid.modes());
    let p = p + p % 2;
    let images: Vec<Vec<Complex64>> = factors
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let v = spec.map_modes(|k, c| {
                let xi = grid.frequency(k);
                if j % 2 == 0 {
                    f(xi) * c
                } else {
                    f([-xi[0], -xi[1]]).conj() * c
                }
            });
            padded_physical(&v, p)
        })
        .collect();
    let cell = (grid.length() / p as f64).powi(2);
    let total: Neumaier = (0..p * p)
        .map(|i| (images[0][i] * images[1][i].conj() * images[2][i] * images[3][i].conj()).re)
        .collect();
    Ok(cell * total.value())
}

/// Range of the merged frequency `xi_1 + xi_2 + xi_3` in the sextilinear sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lambda6Mode {
    /// Merged frequency restricted to the dealiased lattice, matching the
    /// projected nonlinearity of the semi-discrete equation.
    Dealiased,
    /// Every sextuple of dealiased modes, with the merged frequency ranging
    /// up to `3K`.
    Full,
}

fn symmetric_deviation(symbol: &(impl Symbol + ?Sized), spec: &Spectrum, samples: usize) -> f64 {
    let grid = spec.grid();
    let k = grid.cutoff().max(1) as i32;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_6);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut t = [[0i32; 2]; 4];
        for slot in t.iter_mut().take(3) {
            *slot = [rng.random_range(-k..=k), rng.random_range(-k..=k)];
        }
        t[3] = [-t[0][0] - t[1][0] - t[2][0], -t[0][1] - t[1][1] - t[2][1]];
        let f = t.map(|m| grid.frequency(m));
        let base = symbol.eval(&f);
        let images = [
            symbol.eval(&[f[2], f[1], f[0], f[3]]),
            symbol.eval(&[f[0], f[3], f[2], f[1]]),
            symbol.eval(&[f[1], f[0], f[3], f[2]]).conj(),
        ];
        for g in images {
            worst = worst.max((g - base).norm() / base.norm().max(1.0));
        }
    }
    worst
}

/// `L^2 sum M(xi) w(xi_1) conj(c(-xi_2)) c(xi_3) conj(c(-xi_4))` with `w = |u|^2 u`.
///
/// This is the complex sextilinear sum `Lambda_6(X(M))` before taking the real part.
pub fn lambda6_complex(
    symbol: &(impl Symbol + ?Sized),
    spec: &Spectrum,
    mode: Lambda6Mode,
) -> Result<Complex64> {
    check_arity(symbol, 4)?;
    spec.require_dealiased()?;
    let deviation = symmetric_deviation(symbol, spec, 100);
    if deviation > 1e-12 {
        return Err(Error::NotSymmetric(deviation));
    }
    let k = spec.grid().cutoff();
    let radius = match mode {
        Lambda6Mode::Dealiased => k,
        Lambda6Mode::Full => 3 * k,
    };
    let w = cubic_window(spec, radius);
    let u = active_window(spec);
    let kernel = SymbolKernel::new(symbol, spec.grid().spacing());
    Ok(spec.grid().length().powi(2) * pairing4(&kernel, [&w, &u, &u, &u]))
}

/// `Lambda_6(X(M); u)` via the substitution `xi_1 + xi_2 + xi_3 -> xi_1`,
/// which turns the sextilinear sum into a quadrilinear sum against `|u|^2 u`.
pub fn eval_lambda6_substitution(
    symbol: &(impl Symbol + ?Sized),
    spec: &Spectrum,
    mode: Lambda6Mode,
) -> Result<f64> {
    Ok(lambda6_complex(symbol, spec, mode)?.re)
}

/// Relative mismatch between two evaluations of `d/dt Lambda_4(M; u)`.
///
/// (a) chain rule: each slot in turn replaced by the semi-discrete time
/// derivative; (b) `Lambda_4(i M alpha_4) - sign Lambda_6(4i X(M))` with the
/// dealiased sextilinear sum. Returns `|a - b| / (|a| + |b| + eps)` where
/// `eps` is the total complex magnitude of the contributing sums, the scale at
/// which rounding enters; a vanishing field returns 0.
pub fn derivative_identity_residual(
    symbol: &(impl Symbol + ?Sized),
    spec: &Spectrum,
    params: &IMethodParams,
) -> Result<f64> {
    check_arity(symbol, 4)?;
    spec.require_dealiased()?;
    let grid = spec.grid();
    let l2 = grid.length().powi(2);
    let sign = params.sign.value();
    let du = active_window(&rhs(spec, sign));
    let u = active_window(spec);
    let kernel = SymbolKernel::new(symbol, grid.spacing());

    let mut scale = 0.0;
    let mut chain = 0.0;
    for slot in 0..4 {
        let mut slots = [&u, &u, &u, &u];
        slots[slot] = &du;
        let s = l2 * pairing4(&kernel, slots);
        chain += s.re;
        scale += s.norm();
    }

    let linear_symbol = TimesIAlpha(symbol);
    let linear_kernel = SymbolKernel::new(&linear_symbol, grid.spacing());
    let linear = l2 * pairing4(&linear_kernel, [&u, &u, &u, &u]);
    let sextic = Complex64::new(0.0, 4.0) * lambda6_complex(symbol, spec, Lambda6Mode::Dealiased)?;
    let formula = linear.re - sign * sextic.re;
    scale += linear.norm() + sextic.norm();

    let denom = chain.abs() + formula.abs() + scale;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((chain - formula).abs() / denom)
}
