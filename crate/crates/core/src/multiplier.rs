//! The smoothing multiplier `m`, the operator `I = I_N`, `E(Iu)` and the
//! scaling symmetry.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{energy_spectrum, forward_transform, Field, Spectrum};

/// Sign of the nonlinearity: `+1` defocusing, `-1` focusing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    #[default]
    Defocusing,
    Focusing,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Defocusing => 1.0,
            Sign::Focusing => -1.0,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Defocusing),
            -1 => Ok(Sign::Focusing),
            other => Err(format!("sign must be +1 or -1, got {other}")),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Defocusing => 1,
            Sign::Focusing => -1,
        }
    }
}

/// Threshold `N`, regularity `s`, resonance angle `theta0` and nonlinearity sign.
///
/// `N = +inf` encodes the identity multiplier `m = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IMethodParams {
    #[serde(rename = "N")]
    pub n: f64,
    pub s: f64,
    pub theta0: f64,
    #[serde(default)]
    pub sign: Sign,
}

impl IMethodParams {
    /// Parameters with the default angle `theta0 = 1/N`.
    pub fn new(n: f64, s: f64) -> Result<Self> {
        Self::with_theta0(n, s, 1.0 / n)
    }

    pub fn with_theta0(n: f64, s: f64, theta0: f64) -> Result<Self> {
        let p = Self {
            n,
            s,
            theta0,
            sign: Sign::Defocusing,
        };
        p.validate()?;
        Ok(p)
    }

    /// `m = 1` everywhere; `theta0` only matters above `N`, so it is irrelevant here.
    pub fn identity() -> Self {
        Self {
            n: f64::INFINITY,
            s: 0.5,
            theta0: 0.005,
            sign: Sign::Defocusing,
        }
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.sign = sign;
        self
    }

    pub fn is_identity(&self) -> bool {
        self.n.is_infinite()
    }

    /// Accepts `N >= 1`, `0 < s < 1` and `0 < theta0 <= 1`.
    ///
    /// The narrower range `theta0 < 1/100` is reported by
    /// [`IMethodParams::theta0_in_small_range`], not enforced: the default
    /// `theta0 = 1/N` leaves it for every desk-scale `N`.
    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "N must be >= 1, got {}",
                self.n
            )));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "s must lie in (0, 1), got {}",
                self.s
            )));
        }
        if !(self.theta0 > 0.0 && self.theta0 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "theta0 must lie in (0, 1], got {}",
                self.theta0
            )));
        }
        Ok(())
    }

    pub fn theta0_in_small_range(&self) -> bool {
        self.theta0 > 0.0 && self.theta0 < 0.01
    }
}

/// Cubic Hermite profile with `H(0) = 0, H(1) = 1, H'(0) = 0, H'(1) = 1`.
fn hermite(t: f64) -> f64 {
    t * t * (2.0 - t)
}

/// `m(r)`: 1 up to `N`, `(r/N)^(s-1)` from `2N`, log-log Hermite blend between.
pub fn m_eval(r: f64, params: &IMethodParams) -> f64 {
    let n = params.n;
    if r <= n {
        return 1.0;
    }
    let ratio = r / n;
    if ratio >= 2.0 {
        return ratio.powf(params.s - 1.0);
    }
    let t = ratio.ln() / LN_2;
    ((params.s - 1.0) * LN_2 * hermite(t)).exp()
}

/// Multiplies each coefficient by `m(|xi_k|)`.
pub fn apply_i(spec: &Spectrum, params: &IMethodParams) -> Spectrum {
    let grid = *spec.grid();
    spec.map_modes(|k, c| {
        let xi = grid.frequency(k);
        c * m_eval(xi[0].hypot(xi[1]), params)
    })
}

/// `E(Iu)` for a spectrum, with the sign carried by `params`.
pub fn energy_iu_spectrum(spec: &Spectrum, params: &IMethodParams) -> f64 {
    energy_spectrum(&apply_i(spec, params), params.sign.value())
}

pub fn energy_iu(u: &Field, params: &IMethodParams) -> f64 {
    energy_iu_spectrum(&forward_transform(u), params)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "scaling parameter must be >= 1, got {lambda}"
        )));
    }
    Ok(())
}

/// `u(x) -> u(x/lambda)/lambda` on the box of length `lambda L` with the same mode count.
pub fn rescale_spectrum(spec: &Spectrum, lambda: f64) -> Result<Spectrum> {
    check_lambda(lambda)?;
    let grid = spec.grid().with_length(spec.grid().length() * lambda)?;
    let coeffs = spec.coeffs().iter().map(|c| c / lambda).collect();
    Spectrum::from_coeffs(grid, coeffs)
}

pub fn rescale(u: &Field, lambda: f64) -> Result<Field> {
    check_lambda(lambda)?;
    let grid = u.grid().with_length(u.grid().length() * lambda)?;
    // Collocation points scale with the box, so samples are just divided by lambda.
    Field::new(grid, u.values().iter().map(|z| z / lambda).collect())
}

/// `lambda = C N^((1-s)/s)`.
pub fn lambda_of_n(n: f64, s: f64, c: f64) -> f64 {
    c * n.powf((1.0 - s) / s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RescaleReport {
    pub lambda: f64,
    pub e_before: f64,
    pub e_after: f64,
    pub passes_third: bool,
}

/// `E(I u^(lambda))` for an explicit `lambda`.
pub fn rescaled_energy(u0: &Field, params: &IMethodParams, lambda: f64) -> Result<f64> {
    let scaled = rescale_spectrum(&forward_transform(u0), lambda)?;
    Ok(energy_iu_spectrum(&scaled, params))
}

/// Evaluates `E(Iu0)` and `E(I u0^(lambda))` with `lambda = lambda_of_n(N, s, c)`.
pub fn verify_rescaled_energy(u0: &Field, params: &IMethodParams, c: f64) -> Result<RescaleReport> {
    params.validate()?;
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "C must be positive, got {c}"
        )));
    }
    let lambda = lambda_of_n(params.n, params.s, c);
    let e_before = energy_iu(u0, params);
    let e_after = rescaled_energy(u0, params, lambda)?;
    Ok(RescaleReport {
        lambda,
        e_before,
        e_after,
        passes_third: e_after <= 1.0 / 3.0,
    })
}

/// Smallest log-log slope of `r -> m(r)^(2 - eps) r^2` on a log grid over `[N/10, 100N]`.
///
/// Non-negative means the weighted map is non-decreasing on that range.
pub fn min_log_slope(params: &IMethodParams, eps: f64, points: usize) -> f64 {
    let lo = (params.n / 10.0).ln();
    let hi = (100.0 * params.n).ln();
    let g = |r: f64| (2.0 - eps) * m_eval(r, params).ln() + 2.0 * r.ln();
    let step = (hi - lo) / (points - 1) as f64;
    (0..points - 1)
        .map(|i| {
            let a = lo + i as f64 * step;
            (g((a + step).exp()) - g(a.exp())) / step
        })
        .fold(f64::INFINITY, f64::min)
}
