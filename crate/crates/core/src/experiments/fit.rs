use serde::{Deserialize, Serialize};

/// Least-squares line through `(log10 x, log10 y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `None` with fewer than three usable points.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// RMS residual in log10 units.
    pub residual: Option<f64>,
    /// Points dropped because `x` or `y` was not positive and finite.
    pub excluded: usize,
}

impl Fit {
    /// Slope, provided the residual is small enough for it to mean anything.
    pub fn trusted_slope(&self, residual_max: f64) -> Option<f64> {
        match (self.slope, self.residual) {
            (Some(s), Some(r)) if r < residual_max => Some(s),
            _ => None,
        }
    }

    pub fn predict(&self, x: f64) -> Option<f64> {
        Some(10f64.powf(self.intercept? + self.slope? * x.log10()))
    }
}

pub fn fit_loglog(name: &str, x: &[f64], y: &[f64]) -> Fit {
    let usable = |v: f64| v > 0.0 && v.is_finite();
    let points: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| usable(**a) && usable(**b))
        .map(|(a, b)| (a.log10(), b.log10()))
        .collect();
    let excluded = x.len() - points.len();
    let mut fit = Fit {
        name: name.to_string(),
        x: x.to_vec(),
        y: y.to_vec(),
        slope: None,
        intercept: None,
        residual: None,
        excluded,
    };
    if points.len() < 3 {
        return fit;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return fit;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    fit.slope = Some(slope);
    fit.intercept = Some(intercept);
    fit.residual = Some((ssr / n).sqrt());
    fit
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x = [2.0, 3.0, 4.0, 6.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 5.0 * v.powf(-2.0)).collect();
        let f = fit_loglog("p", &x, &y);
        assert!((f.slope.unwrap() + 2.0).abs() < 1e-12);
        assert!(f.residual.unwrap() < 1e-12);
        assert!((f.predict(4.0).unwrap() - 5.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points_gives_no_slope() {
        let f = fit_loglog("p", &[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]);
        assert_eq!(f.excluded, 1);
        assert_eq!(f.slope, None);
        assert_eq!(f.trusted_slope(1.0), None);
    }

    #[test]
    fn residual_of_noisy_points() {
        let f = fit_loglog("p", &[1.0, 10.0, 100.0], &[1.0, 100.0, 100.0]);
        assert!(f.residual.unwrap() > 0.2);
        assert_eq!(f.trusted_slope(0.2), None);
    }
}
