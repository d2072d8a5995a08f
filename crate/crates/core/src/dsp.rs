//! Small FFT helpers over `rustfft`.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Forward transform of a real sequence zero-padded to `n` points.
pub fn fft_real(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

/// Unnormalized inverse transform in place.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(buf);
}

pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos())
        .collect()
}

pub fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Value of `x` at fractional index `pos` by linear interpolation; zero
/// outside the sequence.
#[inline]
pub fn sample_linear(x: &[f64], pos: f64) -> f64 {
    if pos < 0.0 {
        // allow the tail of the first sample to fade in
        if pos > -1.0 && !x.is_empty() {
            return x[0] * (1.0 + pos);
        }
        return 0.0;
    }
    let k = pos.floor();
    let i = k as usize;
    let frac = pos - k;
    let a = x.get(i).copied().unwrap_or(0.0);
    if frac == 0.0 {
        return a;
    }
    let b = x.get(i + 1).copied().unwrap_or(0.0);
    a + frac * (b - a)
}
