//! Periodic box geometry, Fourier transforms and basic norms.
//!
//! Coefficient convention: `c(k) = (1/L^2) * integral over the box of
//! u(x) exp(-i xi_k . x) dx` with `xi_k = (2 pi / L) k`, so that
//! `integral |u|^2 = L^2 * sum |c(k)|^2`. Storage of both fields and
//! spectra is row-major `M x M`; spectra keep mode `k` at index
//! `k mod M` on each axis (FFT order).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::summation::{sum, Neumaier};

/// A physical frequency vector.
pub type Freq = [f64; 2];

/// An integer lattice vector.
pub type Mode = [i32; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Periodic square box `[0, L)^2` sampled with `M` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    modes: usize,
    length: f64,
    cutoff: usize,
}

impl Grid2D {
    /// Grid with the default 2/3-rule cutoff `K = floor(M/3)`.
    pub fn new(modes: usize, length: f64) -> Result<Self> {
        Self::with_cutoff(modes, length, modes / 3)
    }

    pub fn with_cutoff(modes: usize, length: f64, cutoff: usize) -> Result<Self> {
        if modes < 8 || modes % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "mode count must be even and >= 8, got {modes}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive, got {length}"
            )));
        }
        if cutoff > modes / 2 - 1 {
            return Err(Error::InvalidGrid(format!(
                "dealias cutoff {cutoff} exceeds M/2 - 1 = {}",
                modes / 2 - 1
            )));
        }
        Ok(Self {
            modes,
            length,
            cutoff,
        })
    }

    /// Box of length `2 pi`, where lattice frequencies are integer vectors.
    pub fn periodic(modes: usize) -> Result<Self> {
        Self::new(modes, 2.0 * PI)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Same mode count and cutoff on a box of a different length.
    pub fn with_length(&self, length: f64) -> Result<Self> {
        Self::with_cutoff(self.modes, length, self.cutoff)
    }

    /// Frequency quantum `2 pi / L`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Collocation spacing `L / M`.
    pub fn dx(&self) -> f64 {
        self.length / self.modes as f64
    }

    pub fn len(&self) -> usize {
        self.modes * self.modes
    }

    pub fn is_empty(&self) -> bool {
        self.modes == 0
    }

    /// Signed wavenumber stored at FFT index `i`.
    pub fn wavenumber(&self, i: usize) -> i32 {
        let m = self.modes as i32;
        let i = i as i32;
        if i < m / 2 {
            i
        } else {
            i - m
        }
    }

    /// Storage index of mode `k`, if it is representable on this grid.
    pub fn storage_index(&self, k: Mode) -> Option<usize> {
        let half = (self.modes / 2) as i32;
        let m = self.modes as i32;
        if k.iter().any(|&c| c < -half || c >= half) {
            return None;
        }
        let i1 = k[0].rem_euclid(m) as usize;
        let i2 = k[1].rem_euclid(m) as usize;
        Some(i1 * self.modes + i2)
    }

    /// Mode stored at flat index `idx`.
    pub fn mode_at(&self, idx: usize) -> Mode {
        [
            self.wavenumber(idx / self.modes),
            self.wavenumber(idx % self.modes),
        ]
    }

    pub fn frequency(&self, k: Mode) -> Freq {
        let h = self.spacing();
        [h * k[0] as f64, h * k[1] as f64]
    }

    /// Whether `k` survives dealiasing, i.e. `|k|_inf <= K`.
    pub fn is_active(&self, k: Mode) -> bool {
        let c = self.cutoff as i32;
        k[0].abs() <= c && k[1].abs() <= c
    }

    /// All modes with `|k|_inf <= K`, row by row.
    pub fn active_modes(&self) -> impl Iterator<Item = Mode> {
        let c = self.cutoff as i32;
        (-c..=c).flat_map(move |a| (-c..=c).map(move |b| [a, b]))
    }

    /// Physical collocation point `(L/M) (j1, j2)`.
    pub fn point(&self, j1: usize, j2: usize) -> [f64; 2] {
        [j1 as f64 * self.dx(), j2 as f64 * self.dx()]
    }
}

/// A complex function sampled at the collocation points.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid2D,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid2D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if values
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidParameter(
                "field has non-finite entries".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![ZERO; grid.len()],
        }
    }

    /// Samples `f` at every collocation point.
    pub fn from_fn(grid: Grid2D, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let m = grid.modes();
        let values = (0..m * m).map(|i| f(grid.point(i / m, i % m))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|z| z * factor).collect(),
        }
    }

    /// Cyclic shift by a whole number of collocation cells.
    pub fn shifted(&self, cells: [usize; 2]) -> Self {
        let m = self.grid.modes();
        let mut values = vec![ZERO; m * m];
        for j1 in 0..m {
            for j2 in 0..m {
                let s1 = (j1 + cells[0]) % m;
                let s2 = (j2 + cells[1]) % m;
                values[s1 * m + s2] = self.values[j1 * m + j2];
            }
        }
        Self {
            grid: self.grid,
            values,
        }
    }
}

/// Fourier coefficients `c(k)` on a grid, stored in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: Grid2D,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            coeffs: vec![ZERO; grid.len()],
        }
    }

    /// Spectrum from raw FFT-ordered coefficients.
    pub fn from_coeffs(grid: Grid2D, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "spectrum has {} coefficients, grid needs {}",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    /// Spectrum with the listed modes set and all others zero.
    pub fn from_modes(
        grid: Grid2D,
        modes: impl IntoIterator<Item = (Mode, Complex64)>,
    ) -> Result<Self> {
        let mut spec = Self::zeros(grid);
        for (k, c) in modes {
            spec.set(k, c)?;
        }
        Ok(spec)
    }

    /// Fills every active mode (`|k|_inf <= K`) from `f`.
    pub fn from_active_fn(grid: Grid2D, mut f: impl FnMut(Mode) -> Complex64) -> Self {
        let mut spec = Self::zeros(grid);
        for k in grid.active_modes() {
            let idx = grid
                .storage_index(k)
                .expect("active modes are representable");
            spec.coeffs[idx] = f(k);
        }
        spec
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of mode `k`; zero when `k` is not representable.
    pub fn get(&self, k: Mode) -> Complex64 {
        self.grid
            .storage_index(k)
            .map_or(ZERO, |idx| self.coeffs[idx])
    }

    pub fn set(&mut self, k: Mode, value: Complex64) -> Result<()> {
        let idx = self.grid.storage_index(k).ok_or_else(|| {
            Error::InvalidParameter(format!("mode {k:?} is not representable on this grid"))
        })?;
        self.coeffs[idx] = value;
        Ok(())
    }

    /// Iterates `(k, c(k))` over every stored mode.
    pub fn modes(&self) -> impl Iterator<Item = (Mode, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| (self.grid.mode_at(idx), c))
    }

    /// Coefficientwise map `c(k) -> f(k, c(k))`.
    pub fn map_modes(&self, mut f: impl FnMut(Mode, Complex64) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| f(self.grid.mode_at(idx), c))
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        self.map_modes(|_, c| c * factor)
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: Complex64, other: &Spectrum) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + factor * b)
            .collect();
        Ok(Self {
            grid: self.grid,
            coeffs,
        })
    }

    /// Zeroes every mode with `|k|_inf > K`.
    pub fn dealias(&mut self) {
        let grid = self.grid;
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            if !grid.is_active(grid.mode_at(idx)) {
                *c = ZERO;
            }
        }
    }

    pub fn dealiased(&self) -> Self {
        let mut out = self.clone();
        out.dealias();
        out
    }

    /// First mode outside the dealiased lattice carrying a nonzero coefficient.
    pub fn first_aliased_mode(&self) -> Option<Mode> {
        self.modes()
            .find(|&(k, c)| c != ZERO && !self.grid.is_active(k))
            .map(|(k, _)| k)
    }

    pub fn is_dealiased(&self) -> bool {
        self.first_aliased_mode().is_none()
    }

    pub(crate) fn require_dealiased(&self) -> Result<()> {
        match self.first_aliased_mode() {
            Some(k) => Err(Error::NotDealiased(k[0], k[1])),
            None => Ok(()),
        }
    }

    /// Largest `|k|_inf` carrying a nonzero coefficient (0 for the zero spectrum).
    pub fn band(&self) -> usize {
        self.modes()
            .filter(|&(_, c)| c != ZERO)
            .map(|(k, _)| k[0].unsigned_abs().max(k[1].unsigned_abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Coefficients on a square window `|k|_inf <= radius`, independent of any grid.
///
/// Used for slot tables of the multilinear sums and for products whose band
/// exceeds what the parent grid can represent.
#[derive(Clone, Debug)]
pub struct ModeWindow {
    radius: i32,
    width: usize,
    values: Vec<Complex64>,
}

impl ModeWindow {
    pub fn zeros(radius: usize) -> Self {
        let width = 2 * radius + 1;
        Self {
            radius: radius as i32,
            width,
            values: vec![ZERO; width * width],
        }
    }

    pub fn from_fn(radius: usize, mut f: impl FnMut(Mode) -> Complex64) -> Self {
        let mut w = Self::zeros(radius);
        let r = w.radius;
        for a in -r..=r {
            for b in -r..=r {
                let idx = w.index([a, b]);
                w.values[idx] = f([a, b]);
            }
        }
        w
    }

    pub fn radius(&self) -> i32 {
        self.radius
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Flat index of `k`; the caller guarantees `|k|_inf <= radius`.
    #[inline]
    pub fn index(&self, k: Mode) -> usize {
        (k[0] + self.radius) as usize * self.width + (k[1] + self.radius) as usize
    }

    #[inline]
    pub fn contains(&self, k: Mode) -> bool {
        k[0].abs() <= self.radius && k[1].abs() <= self.radius
    }

    pub fn get(&self, k: Mode) -> Complex64 {
        if self.contains(k) {
            self.values[self.index(k)]
        } else {
            ZERO
        }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Window of `c(k)` from a spectrum.
    pub fn from_spectrum(spec: &Spectrum, radius: usize) -> Self {
        Self::from_fn(radius, |k| spec.get(k))
    }

    /// Restricts a window to the modes representable on `grid`.
    pub fn to_spectrum(&self, grid: Grid2D) -> Spectrum {
        let mut spec = Spectrum::zeros(grid);
        for (idx, c) in spec.coeffs.iter_mut().enumerate() {
            *c = self.get(grid.mode_at(idx));
        }
        spec
    }
}

pub fn forward_transform(field: &Field) -> Spectrum {
    spectrum_from_samples(field.grid, field.values.clone())
}

/// Transform of raw collocation samples, which need not be finite.
pub(crate) fn spectrum_from_samples(grid: Grid2D, mut coeffs: Vec<Complex64>) -> Spectrum {
    let m = grid.modes();
    fft2(&mut coeffs, m, false);
    let norm = 1.0 / (m * m) as f64;
    for c in &mut coeffs {
        *c *= norm;
    }
    Spectrum { grid, coeffs }
}

pub fn inverse_transform(spectrum: &Spectrum) -> Field {
    let m = spectrum.grid.modes();
    let mut values = spectrum.coeffs.clone();
    fft2(&mut values, m, true);
    Field {
        grid: spectrum.grid,
        values,
    }
}

fn even_at_least(n: usize) -> usize {
    n + n % 2
}

/// Samples of `u` on a `p x p` collocation grid of the same box (`p >= M`).
pub(crate) fn padded_physical(spec: &Spectrum, p: usize) -> Vec<Complex64> {
    debug_assert!(p >= spec.grid.modes());
    let mut buf = vec![ZERO; p * p];
    let pi = p as i32;
    for (k, c) in spec.modes() {
        if c != ZERO {
            let i1 = k[0].rem_euclid(pi) as usize;
            let i2 = k[1].rem_euclid(pi) as usize;
            buf[i1 * p + i2] = c;
        }
    }
    fft2(&mut buf, p, true);
    buf
}

/// Coefficients `|k|_inf <= radius` of samples on a `p x p` grid.
pub(crate) fn window_from_physical(
    mut values: Vec<Complex64>,
    p: usize,
    radius: usize,
) -> ModeWindow {
    fft2(&mut values, p, false);
    let norm = 1.0 / (p * p) as f64;
    let pi = p as i32;
    ModeWindow::from_fn(radius, |k| {
        let i1 = k[0].rem_euclid(pi) as usize;
        let i2 = k[1].rem_euclid(pi) as usize;
        values[i1 * p + i2] * norm
    })
}

/// Exact coefficients of `|u|^2 u` on `|k|_inf <= radius`.
///
/// The product is formed on a zero-padded grid large enough that no alias
/// of a band-`3B` product lands inside the requested window.
pub fn cubic_window(spec: &Spectrum, radius: usize) -> ModeWindow {
    let band = spec.band();
    let p = even_at_least((3 * band + radius + 1).max(spec.grid.modes()));
    let mut u = padded_physical(spec, p);
    for z in &mut u {
        *z *= z.norm_sqr();
    }
    window_from_physical(u, p, radius)
}

/// Dealiased coefficients of `|u|^2 u` (modes `|k|_inf <= K`).
pub fn cubic_term(spec: &Spectrum) -> Spectrum {
    cubic_window(spec, spec.grid.cutoff()).to_spectrum(spec.grid)
}

/// `integral |u|^4` evaluated exactly on a padded grid.
pub fn quartic_integral(spec: &Spectrum) -> f64 {
    let band = spec.band();
    let p = even_at_least((4 * band + 1).max(spec.grid.modes()));
    let u = padded_physical(spec, p);
    let cell = (spec.grid.length() / p as f64).powi(2);
    cell * sum(u.iter().map(|z| z.norm_sqr() * z.norm_sqr()))
}

/// `L^2 sum |c(k)|^2 w(k)` with a compensated sum.
fn weighted_square_sum(spec: &Spectrum, weight: impl Fn(Freq) -> f64) -> f64 {
    let grid = spec.grid;
    let total: Neumaier = spec
        .modes()
        .map(|(k, c)| weight(grid.frequency(k)) * c.norm_sqr())
        .collect();
    grid.length().powi(2) * total.value()
}

/// `||u||_{L^2}` from the coefficients.
pub fn mass_spectrum(spec: &Spectrum) -> f64 {
    weighted_square_sum(spec, |_| 1.0).sqrt()
}

/// `||u||_{L^2(box)}`.
pub fn mass(u: &Field) -> f64 {
    mass_spectrum(&forward_transform(u))
}

/// `||u||_{L^2}` by physical-space rectangle quadrature.
pub fn mass_quadrature(u: &Field) -> f64 {
    let cell = u.grid.dx().powi(2);
    (cell * sum(u.values.iter().map(|z| z.norm_sqr()))).sqrt()
}

/// `1/2 integral |grad u|^2`.
pub fn kinetic_energy(spec: &Spectrum) -> f64 {
    0.5 * weighted_square_sum(spec, |xi| xi[0] * xi[0] + xi[1] * xi[1])
}

/// `E(u) = integral 1/2 |grad u|^2 + (sign/4) |u|^4` on a spectrum.
pub fn energy_spectrum(spec: &Spectrum, sign: f64) -> f64 {
    kinetic_energy(spec) + 0.25 * sign * quartic_integral(spec)
}

/// Defocusing energy `E(u)`.
pub fn energy(u: &Field) -> f64 {
    energy_spectrum(&forward_transform(u), 1.0)
}

/// Energy with nonlinearity sign `+1` (defocusing) or `-1` (focusing).
pub fn energy_with_sign(u: &Field, sign: f64) -> f64 {
    energy_spectrum(&forward_transform(u), sign)
}

/// `H^s` norm (`<xi>^s` weight) or homogeneous `H-dot^s` norm (`|xi|^s`, k = 0 dropped).
pub fn sobolev_norm(spectrum: &Spectrum, s: f64, homogeneous: bool) -> f64 {
    weighted_square_sum(spectrum, |xi| {
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        if homogeneous {
            if r2 == 0.0 {
                0.0
            } else {
                r2.powf(s)
            }
        } else {
            (1.0 + r2).powf(s)
        }
    })
    .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane_wave(grid: Grid2D, k: Mode, amp: f64) -> Field {
        let xi = grid.frequency(k);
        Field::from_fn(grid, |x| {
            Complex64::from_polar(amp, xi[0] * x[0] + xi[1] * x[1])
        })
    }

    fn random_field(grid: Grid2D, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        Field::new(grid, values).unwrap()
    }

    fn random_smooth(grid: Grid2D, seed: u64) -> Spectrum {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = grid.spacing();
        Spectrum::from_active_fn(grid, |k| {
            let r2 = h * h * (k[0] * k[0] + k[1] * k[1]) as f64;
            Complex64::from_polar((1.0 + r2).powf(-1.5), rng.random_range(0.0..2.0 * PI))
        })
    }

    #[test]
    fn grid_validation() {
        assert!(Grid2D::periodic(6).is_err());
        assert!(Grid2D::periodic(9).is_err());
        assert!(Grid2D::new(8, 0.0).is_err());
        assert!(Grid2D::with_cutoff(8, 1.0, 4).is_err());
        let g = Grid2D::periodic(48).unwrap();
        assert_eq!(g.cutoff(), 16);
        assert_eq!(g.active_modes().count(), 33 * 33);
    }

    #[test]
    fn active_lattice_is_closed_under_negation() {
        let g = Grid2D::periodic(16).unwrap();
        for k in g.active_modes() {
            assert!(g.is_active([-k[0], -k[1]]));
        }
    }

    #[test]
    fn constant_field_has_only_mean_mode() {
        let g = Grid2D::periodic(8).unwrap();
        let spec = forward_transform(&Field::from_fn(g, |_| Complex64::new(3.0, 0.0)));
        for (k, c) in spec.modes() {
            let expected = if k == [0, 0] { 3.0 } else { 0.0 };
            assert!((c - expected).norm() < 1e-14, "{k:?} {c}");
        }
    }

    #[test]
    fn pure_mode_transforms_to_unit_coefficient() {
        let g = Grid2D::periodic(8).unwrap();
        let spec = forward_transform(&plane_wave(g, [1, 0], 1.0));
        for (k, c) in spec.modes() {
            let expected = if k == [1, 0] { 1.0 } else { 0.0 };
            assert!((c - expected).norm() < 1e-14);
        }
        let back = inverse_transform(&spec);
        let original = plane_wave(g, [1, 0], 1.0);
        for (a, b) in back.values().iter().zip(original.values()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn roundtrip_is_identity() {
        let g = Grid2D::new(16, 3.7).unwrap();
        let u = random_field(g, 1);
        let back = inverse_transform(&forward_transform(&u));
        let scale = mass_quadrature(&u);
        let err: f64 = back
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            * g.dx();
        assert!(err / scale < 1e-12);
    }

    #[test]
    fn plane_wave_mass_and_energy() {
        let g = Grid2D::periodic(16).unwrap();
        let u = plane_wave(g, [1, 0], 1.0);
        assert!((mass(&u) - 2.0 * PI).abs() < 1e-12);
        let e = (2.0 * PI).powi(2) * 0.75;
        assert!((energy(&u) - e).abs() < 1e-11);
        assert_eq!(mass(&Field::zeros(g)), 0.0);
        assert_eq!(energy(&Field::zeros(g)), 0.0);
    }

    #[test]
    fn parseval_on_random_field() {
        let g = Grid2D::new(16, 5.0).unwrap();
        let u = random_field(g, 2);
        let a = mass(&u);
        let b = mass_quadrature(&u);
        assert!((a - b).abs() / b < 1e-12);
    }

    #[test]
    fn energy_matches_fine_grid_requadrature() {
        let g = Grid2D::periodic(16).unwrap();
        let spec = random_smooth(g, 4);
        let e = energy_spectrum(&spec, 1.0);
        // Brute force: sample on a 2M grid, gradient spectrally, quartic by plain quadrature.
        let fine = Grid2D::periodic(32).unwrap();
        let mut fine_spec = Spectrum::zeros(fine);
        for (k, c) in spec.modes() {
            fine_spec.set(k, c).unwrap();
        }
        let u = inverse_transform(&fine_spec);
        let cell = fine.dx().powi(2);
        let quartic: f64 = u.values().iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>() * cell;
        let kinetic = kinetic_energy(&fine_spec);
        let reference = kinetic + 0.25 * quartic;
        assert!(
            (e - reference).abs() / reference < 1e-8,
            "{e} vs {reference}"
        );
    }

    #[test]
    fn sobolev_norm_examples() {
        let g = Grid2D::periodic(8).unwrap();
        let spec = Spectrum::from_modes(g, [([1, 0], Complex64::new(1.0, 0.0))]).unwrap();
        let expected = 2.0 * PI * 2f64.sqrt();
        assert!((sobolev_norm(&spec, 1.0, false) - expected).abs() < 1e-12);
        let two = Spectrum::from_modes(
            g,
            [
                ([1, 2], Complex64::new(0.5, -0.25)),
                ([0, 0], Complex64::new(2.0, 0.0)),
            ],
        )
        .unwrap();
        // Hand sum: |c|^2 weights with <xi>^{2s}, s = 0.75.
        let hand = (2.0 * PI).powi(2) * (0.3125 * 6f64.powf(0.75) + 4.0 * 1f64.powf(0.75));
        assert!((sobolev_norm(&two, 0.75, false) - hand.sqrt()).abs() / hand.sqrt() < 1e-12);
        let hand_homog = (2.0 * PI).powi(2) * 0.3125 * 5f64.powf(0.75);
        assert!(
            (sobolev_norm(&two, 0.75, true) - hand_homog.sqrt()).abs() / hand_homog.sqrt() < 1e-12
        );
        assert!((sobolev_norm(&two, 0.0, false) - mass_spectrum(&two)).abs() < 1e-12);
    }

    #[test]
    fn cubic_term_of_plane_wave() {
        let g = Grid2D::periodic(8).unwrap();
        let c = Complex64::new(0.6, 0.8) * 1.5;
        let spec = Spectrum::from_modes(g, [([1, -2], c)]).unwrap();
        let w = cubic_term(&spec);
        for (k, v) in w.modes() {
            let expected = if k == [1, -2] {
                c * c.norm_sqr()
            } else {
                Complex64::new(0.0, 0.0)
            };
            assert!((v - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn cubic_window_matches_direct_convolution() {
        let g = Grid2D::periodic(8).unwrap();
        let spec = random_smooth(g, 9);
        let k = g.cutoff() as i32;
        let w = cubic_window(&spec, 3 * g.cutoff());
        for target in [[0, 0], [1, -2], [3 * k, 0], [-k - 1, 2 * k]] {
            let mut direct = Complex64::new(0.0, 0.0);
            for a in g.active_modes() {
                for b in g.active_modes() {
                    let c3 = [target[0] - a[0] - b[0], target[1] - a[1] - b[1]];
                    if g.is_active(c3) {
                        // u * conj(u) * u: the conj slot contributes conj(c(-b)).
                        direct += spec.get(a) * spec.get([-b[0], -b[1]]).conj() * spec.get(c3);
                    }
                }
            }
            assert!((w.get(target) - direct).norm() < 1e-13, "{target:?}");
        }
    }

    #[test]
    fn dealias_contract() {
        let g = Grid2D::periodic(12).unwrap();
        let mut spec = Spectrum::from_modes(
            g,
            [
                ([5, 0], Complex64::new(1.0, 0.0)),
                ([1, 1], Complex64::new(1.0, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(spec.first_aliased_mode(), Some([5, 0]));
        spec.dealias();
        assert!(spec.is_dealiased());
        assert_eq!(spec.band(), 1);
    }
}
