//! Semi-discrete cubic NLS `i u_t + Lap u = sign |u|^2 u` on the dealiased
//! lattice and two fixed-step integrators.
//!
//! The nonlinearity is the exact projection of `|u|^2 u` onto `|k|_inf <= K`,
//! so the semi-discrete system conserves mass and energy exactly; only the
//! time discretization introduces drift.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cubic_term, inverse_transform, spectrum_from_samples, Spectrum};
use crate::multiplier::IMethodParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Integrating-factor (Lawson) RK4.
    #[default]
    Ifrk4,
    /// Second-order split-step Fourier.
    Strang,
}

impl std::str::FromStr for Integrator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ifrk4" => Ok(Integrator::Ifrk4),
            "strang" => Ok(Integrator::Strang),
            other => Err(Error::Config(format!("unknown integrator {other:?}"))),
        }
    }
}

/// `dc/dt = -i |xi|^2 c - i coupling P_K(|u|^2 u)^`.
///
/// `coupling` is the nonlinearity sign, or 0 for free evolution.
pub fn rhs(spec: &Spectrum, coupling: f64) -> Spectrum {
    let grid = *spec.grid();
    let mut out = spec.map_modes(|k, c| {
        let xi = grid.frequency(k);
        Complex64::new(0.0, -(xi[0] * xi[0] + xi[1] * xi[1])) * c
    });
    if coupling != 0.0 {
        let w = cubic_term(spec);
        let factor = Complex64::new(0.0, -coupling);
        for (o, wk) in out.coeffs_mut().iter_mut().zip(w.coeffs()) {
            *o += factor * wk;
        }
    }
    out
}

fn nonlinear(spec: &Spectrum, coupling: f64) -> Spectrum {
    if coupling == 0.0 {
        return Spectrum::zeros(*spec.grid());
    }
    cubic_term(spec).scaled(Complex64::new(0.0, -coupling))
}

/// `exp(-i |xi|^2 tau)` per storage index.
fn free_phases(spec: &Spectrum, tau: f64) -> Vec<Complex64> {
    let grid = spec.grid();
    (0..grid.len())
        .map(|idx| {
            let xi = grid.frequency(grid.mode_at(idx));
            Complex64::from_polar(1.0, -(xi[0] * xi[0] + xi[1] * xi[1]) * tau)
        })
        .collect()
}

fn mul_diag(phase: &[Complex64], spec: &Spectrum) -> Spectrum {
    let mut out = spec.clone();
    for (c, e) in out.coeffs_mut().iter_mut().zip(phase) {
        *c *= e;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub spectrum: Spectrum,
    pub time: f64,
    pub params: IMethodParams,
    pub dt: f64,
    pub integrator: Integrator,
    /// Nonlinearity coefficient: the sign from `params`, or 0 for free evolution.
    pub coupling: f64,
}

impl SolverState {
    pub fn new(
        spectrum: Spectrum,
        params: IMethodParams,
        dt: f64,
        integrator: Integrator,
    ) -> Result<Self> {
        spectrum.require_dealiased()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {dt}"
            )));
        }
        Ok(Self {
            spectrum,
            time: 0.0,
            params,
            dt,
            integrator,
            coupling: params.sign.value(),
        })
    }

    /// Switches the nonlinearity off.
    pub fn linear(mut self) -> Self {
        self.coupling = 0.0;
        self
    }

    pub fn step(&self, dt: f64) -> SolverState {
        match self.integrator {
            Integrator::Ifrk4 => step_ifrk4(self, dt),
            Integrator::Strang => step_strang(self, dt),
        }
    }
}

/// One Lawson RK4 step: RK4 on `v = exp(i |xi|^2 t) c`, which removes the stiff linear part.
pub fn step_ifrk4(state: &SolverState, dt: f64) -> SolverState {
    let g = state.coupling;
    let c = &state.spectrum;
    let e = free_phases(c, 0.5 * dt);
    let half = Complex64::new(0.5 * dt, 0.0);
    let full = Complex64::new(dt, 0.0);

    let k1 = nonlinear(c, g);
    let ec = mul_diag(&e, c);
    let k2 = nonlinear(&mul_diag(&e, &c.axpy(half, &k1).expect("same grid")), g);
    let k3 = nonlinear(&ec.axpy(half, &k2).expect("same grid"), g);
    let eec = mul_diag(&e, &ec);
    let k4 = nonlinear(&eec.axpy(full, &mul_diag(&e, &k3)).expect("same grid"), g);

    let sixth = dt / 6.0;
    let mut next = eec;
    let coeffs = next.coeffs_mut();
    for i in 0..coeffs.len() {
        let ei = e[i];
        coeffs[i] += sixth
            * (ei * ei * k1.coeffs()[i]
                + 2.0 * ei * (k2.coeffs()[i] + k3.coeffs()[i])
                + k4.coeffs()[i]);
    }
    SolverState {
        spectrum: next,
        time: state.time + dt,
        ..state.clone()
    }
}

/// One Strang step: half free flow, exact pointwise phase rotation
/// `u -> u exp(-i coupling |u|^2 dt)` at the collocation points, half free flow.
pub fn step_strang(state: &SolverState, dt: f64) -> SolverState {
    let e = free_phases(&state.spectrum, 0.5 * dt);
    let mut spec = mul_diag(&e, &state.spectrum);
    if state.coupling != 0.0 {
        let u = inverse_transform(&spec);
        let rotated: Vec<Complex64> = u
            .values()
            .iter()
            .map(|z| z * Complex64::from_polar(1.0, -state.coupling * z.norm_sqr() * dt))
            .collect();
        spec = spectrum_from_samples(*u.grid(), rotated);
        spec.dealias();
    }
    SolverState {
        spectrum: mul_diag(&e, &spec),
        time: state.time + dt,
        ..state.clone()
    }
}

/// Summary of an [`evolve`] call.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub state: SolverState,
    pub steps: usize,
    pub observations: usize,
}

/// Integrates to `t_final` with a fixed step close to `state.dt`.
///
/// The step is shrunk slightly so that a whole number of steps lands exactly
/// on `t_final`. `observe` runs at the initial time, every `observe_every`
/// steps, and at the final time.
pub fn evolve(
    state: &SolverState,
    t_final: f64,
    observe_every: usize,
    mut observe: impl FnMut(f64, &Spectrum) -> Result<()>,
) -> Result<Trajectory> {
    let span = t_final - state.time;
    if !(span > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "final time {t_final} must exceed current time {}",
            state.time
        )));
    }
    let steps = ((span / state.dt).round() as usize).max(1);
    let dt = span / steps as f64;
    let every = observe_every.max(1);
    let t0 = state.time;
    let mut current = state.clone();
    observe(current.time, &current.spectrum)?;
    let mut observations = 1;
    for step in 1..=steps {
        current = current.step(dt);
        current.time = t0 + step as f64 * dt;
        if !current.spectrum.is_finite() {
            return Err(Error::Blowup {
                step,
                time: current.time,
            });
        }
        if step % every == 0 || step == steps {
            observe(current.time, &current.spectrum)?;
            observations += 1;
        }
    }
    Ok(Trajectory {
        state: current,
        steps,
        observations,
    })
}
