//! Square 2D FFTs on row-major buffers, with a process-wide plan cache.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

type PlanKey = (usize, bool);

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut plans = plans.lock().expect("fft plan cache poisoned");
    plans
        .entry((n, inverse))
        .or_insert_with(|| {
            let direction = if inverse {
                FftDirection::Inverse
            } else {
                FftDirection::Forward
            };
            FftPlanner::new().plan_fft(n, direction)
        })
        .clone()
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Unnormalized in-place 2D transform of an `n x n` row-major buffer.
///
/// Forward uses `exp(-i k.x)`, inverse `exp(+i k.x)`; neither scales.
pub fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n, "fft2 buffer is not n x n");
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(data, &mut scratch);
    transpose_square(data, n);
    fft.process_with_scratch(data, &mut scratch);
    transpose_square(data, n);
}
