//! Thin unitary-FFT helpers over rustfft.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place forward DFT with 1/sqrt(N) scaling.
pub(crate) fn forward_unitary(buf: &mut [Complex64]) {
    let n = buf.len();
    FftPlanner::new().plan_fft_forward(n).process(buf);
    let scale = 1.0 / (n as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// In-place inverse DFT with 1/sqrt(N) scaling (inverse of [`forward_unitary`]).
pub(crate) fn inverse_unitary(buf: &mut [Complex64]) {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(buf);
    let scale = 1.0 / (n as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Unnormalized forward DFT, out of place.
pub(crate) fn forward(input: &[Complex64]) -> Vec<Complex64> {
    let mut buf = input.to_vec();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf
}

/// Unnormalized inverse DFT, out of place.
pub(crate) fn inverse(input: &[Complex64]) -> Vec<Complex64> {
    let mut buf = input.to_vec();
    FftPlanner::new()
        .plan_fft_inverse(buf.len())
        .process(&mut buf);
    buf
}
