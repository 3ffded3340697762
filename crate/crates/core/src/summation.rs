//! Compensated accumulators.
//!
//! The lattice sums reach ~10^9 terms. Every parallel reduction in the crate
//! sums fixed tiles with these accumulators and then combines the tile
//! partials in tile order, so results do not depend on the thread count.

use num_complex::Complex64;

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Componentwise [`Neumaier`] accumulator for complex values.
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexNeumaier {
    re: Neumaier,
    im: Neumaier,
}

impl ComplexNeumaier {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

impl FromIterator<Complex64> for ComplexNeumaier {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut acc = ComplexNeumaier::new();
        for z in iter {
            acc.add(z);
        }
        acc
    }
}

/// Compensated sum of reals in iteration order.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<Neumaier>().value()
}

/// Compensated sum of complex values in iteration order.
pub fn sum_complex(values: impl IntoIterator<Item = Complex64>) -> Complex64 {
    values.into_iter().collect::<ComplexNeumaier>().value()
}
