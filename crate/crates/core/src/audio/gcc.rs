//! GCC-PHAT time-delay estimation.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative floor on the cross-spectrum magnitude before whitening.
pub const PHAT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeakInterp {
    None,
    Parabolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GccConfig {
    /// Analysis window in samples.
    pub window: usize,
    /// Frame advance in samples.
    pub hop: usize,
    pub peak_interp: PeakInterp,
    /// Largest lag searched, in samples.
    pub max_lag: usize,
    /// Measurements with a lower normalized peak are dropped.
    #[serde(default = "default_threshold")]
    pub score_threshold: f64,
    /// Analysis band in Hz; bins outside it are excluded from the
    /// whitened cross-spectrum. `None` uses every bin.
    #[serde(default = "default_band")]
    pub band: Option<[f64; 2]>,
}

fn default_threshold() -> f64 {
    0.15
}

fn default_band() -> Option<[f64; 2]> {
    Some([100.0, 8000.0])
}

impl GccConfig {
    /// 4096-sample windows advanced by 10 ms (100 estimates per second).
    pub fn for_rate(sample_rate: f64) -> Self {
        Self {
            window: 4096,
            hop: (sample_rate / 100.0).round() as usize,
            peak_interp: PeakInterp::Parabolic,
            max_lag: 2047,
            score_threshold: default_threshold(),
            band: default_band(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.window {
            return Err(Error::Config(format!(
                "hop {} must be in 1..={}",
                self.hop, self.window
            )));
        }
        if 2 * self.max_lag >= self.window {
            return Err(Error::Config(format!(
                "max_lag {} must be below window/2 = {}",
                self.max_lag,
                self.window / 2
            )));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::Config("score_threshold must lie in [0, 1]".into()));
        }
        if let Some([lo, hi]) = self.band {
            if !(lo >= 0.0 && lo < hi) {
                return Err(Error::Config(format!("invalid analysis band [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn fft_len(&self) -> usize {
        (2 * self.window).next_power_of_two()
    }
}

/// Delay estimate of a second signal relative to a first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayEstimate {
    /// Seconds; positive when the second signal lags the first.
    pub delay: f64,
    /// Normalized correlation peak in [0, 1].
    pub score: f64,
}

/// Reusable transforms for one window length and analysis band.
#[derive(Clone)]
pub struct GccEngine {
    n: usize,
    in_band: Vec<bool>,
    band_bins: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GccEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GccEngine").field("n", &self.n).finish()
    }
}

impl GccEngine {
    pub fn new(fft_len: usize, sample_rate: f64, band: Option<[f64; 2]>) -> Self {
        let mut planner = FftPlanner::new();
        let in_band: Vec<bool> = (0..fft_len)
            .map(|k| {
                let f = k.min(fft_len - k) as f64 * sample_rate / fft_len as f64;
                band.is_none_or(|[lo, hi]| f >= lo && f <= hi)
            })
            .collect();
        let band_bins = in_band.iter().filter(|b| **b).count();
        Self {
            n: fft_len,
            in_band,
            band_bins,
            forward: planner.plan_fft_forward(fft_len),
            inverse: planner.plan_fft_inverse(fft_len),
        }
    }

    /// Zero-padded spectrum of a window, or `None` when it is all zeros.
    pub fn spectrum(&self, x: &[f64]) -> Option<Vec<Complex64>> {
        if x.iter().all(|v| *v == 0.0) {
            return None;
        }
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(self.n, Complex64::new(0.0, 0.0));
        self.forward.process(&mut buf);
        Some(buf)
    }

    /// Phase-transform weighted cross-correlation of spectra `x` and `y`,
    /// peak-searched over `[-max_lag, max_lag]`.
    pub fn correlate(
        &self,
        x: &[Complex64],
        y: &[Complex64],
        max_lag: usize,
        interp: PeakInterp,
    ) -> Result<(f64, f64)> {
        let zero = Complex64::new(0.0, 0.0);
        let mut cross: Vec<Complex64> = x
            .iter()
            .zip(y)
            .zip(&self.in_band)
            .map(|((a, b), inside)| if *inside { a.conj() * b } else { zero })
            .collect();
        let peak_mag = cross.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if peak_mag == 0.0 || self.band_bins == 0 {
            return Err(Error::NoSignal);
        }
        let floor = PHAT_EPSILON * peak_mag;
        for c in cross.iter_mut() {
            *c /= c.norm().max(floor);
        }
        self.inverse.process(&mut cross);
        let n = self.n;
        let max_lag = max_lag.min(n / 2 - 1);
        // a fully coherent band puts exactly 1 at the peak
        let norm = self.band_bins as f64;
        let at = |lag: i64| cross[lag.rem_euclid(n as i64) as usize].re / norm;
        let mut best = (f64::MIN, 0i64);
        for lag in -(max_lag as i64)..=max_lag as i64 {
            let v = at(lag);
            if v > best.0 {
                best = (v, lag);
            }
        }
        let (peak, lag) = best;
        let mut refined = lag as f64;
        if interp == PeakInterp::Parabolic && lag.unsigned_abs() < max_lag as u64 {
            let (l, r) = (at(lag - 1), at(lag + 1));
            let denom = l - 2.0 * peak + r;
            let offset = 0.5 * (l - r) / denom;
            // sub-ulp asymmetry of the neighbours is rounding, not delay
            if denom < 0.0 && offset.abs() > 1e-9 {
                refined += offset.clamp(-0.5, 0.5);
            }
        }
        Ok((refined, peak.clamp(0.0, 1.0)))
    }
}

/// GCC-PHAT delay of `y` relative to `x`.
pub fn gcc_phat(x: &[f64], y: &[f64], sample_rate: f64, cfg: &GccConfig) -> Result<DelayEstimate> {
    if x.len() != y.len() {
        return Err(Error::shape(x.len(), y.len()));
    }
    if x.len() < 2 * cfg.max_lag {
        return Err(Error::Config(format!(
            "window of {} samples shorter than 2 * max_lag = {}",
            x.len(),
            2 * cfg.max_lag
        )));
    }
    let engine = GccEngine::new((2 * x.len()).next_power_of_two(), sample_rate, cfg.band);
    let (sx, sy) = match (engine.spectrum(x), engine.spectrum(y)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::NoSignal),
    };
    let (lag, score) = engine.correlate(&sx, &sy, cfg.max_lag, cfg.peak_interp)?;
    Ok(DelayEstimate {
        delay: lag / sample_rate,
        score,
    })
}
