use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::experiments::DataRecipe;
use crate::grid::{kinetic_energy, mass_spectrum, quartic_integral, Grid2D, Spectrum};
use crate::multiplier::{apply_i, energy_iu_spectrum, IMethodParams};

/// Unit-amplitude profile `<xi_k>^(-decay) e^(i phi_k)`, phases drawn in storage order.
pub fn base_profile(grid: Grid2D, decay: f64, seed: u64) -> Spectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Spectrum::from_active_fn(grid, |k| {
        let xi = grid.frequency(k);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        Complex64::from_polar(
            (1.0 + xi[0] * xi[0] + xi[1] * xi[1]).powf(-0.5 * decay),
            phase,
        )
    })
}

/// Largest `y = a^2` with `E(I(a u)) <= bound` on the branch through `a = 0`,
/// where `E(I(a u)) = a^2 kin + sign a^4 quart`; `None` when never binding.
fn energy_limited_square(kin: f64, quart: f64, sign: f64, bound: f64) -> Option<f64> {
    if quart == 0.0 || sign == 0.0 {
        return (kin > 0.0).then(|| bound / kin);
    }
    let a = sign * quart;
    let disc = kin * kin + 4.0 * a * bound;
    if disc < 0.0 {
        // Focusing energy never reaches the bound.
        return None;
    }
    // Stable smaller root of a y^2 + kin y - bound = 0.
    Some(2.0 * bound / (kin + disc.sqrt()))
}

/// Seeded smooth initial data scaled so that `E(Iu_0) <= energy_bound` and
/// `||u_0||_{L^2} <= mass_bound`.
///
/// Without a fixed amplitude the largest admissible amplitude is used, so one
/// of the two bounds is attained.
pub fn prepare_data(
    recipe: &DataRecipe,
    grid: Grid2D,
    params: &IMethodParams,
    seed: u64,
) -> Result<Spectrum> {
    if !(recipe.mass_bound > 0.0 && recipe.energy_bound > 0.0) {
        return Err(Error::DegenerateRecipe(
            "mass and energy bounds must be positive".into(),
        ));
    }
    let base = base_profile(grid, recipe.decay, seed);
    let iu = apply_i(&base, params);
    let kin = kinetic_energy(&iu);
    let quart = 0.25 * quartic_integral(&iu);
    let mass = mass_spectrum(&base);
    let sign = params.sign.value();
    let energy_at = |a: f64| a * a * kin + sign * a.powi(4) * quart;

    let amplitude = match recipe.amplitude {
        Some(a) => {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::DegenerateRecipe(format!(
                    "amplitude must be non-negative, got {a}"
                )));
            }
            if a > 0.0 && (a * mass > recipe.mass_bound || energy_at(a) > recipe.energy_bound) {
                return Err(Error::DegenerateRecipe(format!(
                    "amplitude {a} gives mass {} and E(Iu) {}, above the bounds",
                    a * mass,
                    energy_at(a)
                )));
            }
            a
        }
        None => {
            if mass == 0.0 {
                return Err(Error::DegenerateRecipe("profile vanishes".into()));
            }
            let by_mass = recipe.mass_bound / mass;
            let mut a = match energy_limited_square(kin, quart, sign, recipe.energy_bound) {
                Some(y) => y.sqrt().min(by_mass),
                None => by_mass,
            };
            // Rounding may overshoot by a few ulps; test the scaled data itself.
            let scaled = |a: f64| base.scaled(Complex64::new(a, 0.0));
            while energy_iu_spectrum(&scaled(a), params) > recipe.energy_bound
                || mass_spectrum(&scaled(a)) > recipe.mass_bound
            {
                a *= 1.0 - 1e-12;
            }
            if !(a > 0.0) {
                return Err(Error::DegenerateRecipe(
                    "no positive amplitude meets both bounds".into(),
                ));
            }
            a
        }
    };
    Ok(base.scaled(Complex64::new(amplitude, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiplier::Sign;

    fn setup() -> (Grid2D, IMethodParams) {
        (
            Grid2D::periodic(24).unwrap(),
            IMethodParams::new(4.0, 0.6).unwrap(),
        )
    }

    #[test]
    fn default_recipe_attains_energy_bound() {
        let (grid, p) = setup();
        let u = prepare_data(&DataRecipe::default(), grid, &p, 11).unwrap();
        let e = energy_iu_spectrum(&u, &p);
        assert!(e > 0.5 && e <= 1.0, "{e}");
        assert!(mass_spectrum(&u) <= 4.0);
        assert!(u.is_dealiased());
    }

    #[test]
    fn deterministic_per_seed() {
        let (grid, p) = setup();
        let r = DataRecipe::default();
        assert_eq!(
            prepare_data(&r, grid, &p, 3).unwrap(),
            prepare_data(&r, grid, &p, 3).unwrap()
        );
        assert_ne!(
            prepare_data(&r, grid, &p, 3).unwrap(),
            prepare_data(&r, grid, &p, 4).unwrap()
        );
    }

    #[test]
    fn zero_amplitude_is_admissible() {
        let (grid, p) = setup();
        let r = DataRecipe {
            amplitude: Some(0.0),
            ..DataRecipe::default()
        };
        let u = prepare_data(&r, grid, &p, 1).unwrap();
        assert_eq!(mass_spectrum(&u), 0.0);
    }

    #[test]
    fn mass_bound_can_bind() {
        let (grid, p) = setup();
        let r = DataRecipe {
            mass_bound: 0.1,
            ..DataRecipe::default()
        };
        let u = prepare_data(&r, grid, &p, 1).unwrap();
        assert!((mass_spectrum(&u) - 0.1).abs() < 1e-9);
        assert!(energy_iu_spectrum(&u, &p) < 1.0);
    }

    #[test]
    fn oversized_fixed_amplitude_is_degenerate() {
        let (grid, p) = setup();
        let r = DataRecipe {
            amplitude: Some(100.0),
            ..DataRecipe::default()
        };
        assert!(matches!(
            prepare_data(&r, grid, &p, 1),
            Err(Error::DegenerateRecipe(_))
        ));
        let bad = DataRecipe {
            energy_bound: 0.0,
            ..DataRecipe::default()
        };
        assert!(matches!(
            prepare_data(&bad, grid, &p, 1),
            Err(Error::DegenerateRecipe(_))
        ));
    }

    #[test]
    fn focusing_recipe_respects_bounds() {
        let (grid, p) = setup();
        let p = p.with_sign(Sign::Focusing);
        let u = prepare_data(&DataRecipe::default(), grid, &p, 2).unwrap();
        assert!(energy_iu_spectrum(&u, &p) <= 1.0);
        assert!(mass_spectrum(&u) <= 4.0);
    }
}
