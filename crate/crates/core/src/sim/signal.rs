use rand_distr::{Distribution, StandardNormal};

use crate::dsp;
use crate::error::{Error, Result};
use crate::seed;

/// Lowest chirp frequency in Hz.
pub const CHIRP_F_START: f64 = 400.0;
/// Highest chirp frequency in Hz.
pub const CHIRP_F_END: f64 = 1400.0;
/// Length of one up-chirp burst in seconds.
pub const CHIRP_BURST: f64 = 0.2;
/// Burst onsets within each second.
pub const CHIRP_ONSETS: [f64; 2] = [0.0, 0.5];
/// Minimum sample rate accepted by [`gen_chirp`].
pub const CHIRP_MIN_RATE: f64 = 4000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalKind {
    Chirp,
    Wideband,
    SilenceMixed,
}

/// A mono source waveform.
///
/// Chirps are full scale (±1). Wideband signals are normalized to unit RMS
/// instead, so their peaks exceed 1; writers rescale on export.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSignal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub kind: SignalKind,
}

impl SourceSignal {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn scaled(mut self, gain: f64) -> Self {
        self.samples.iter_mut().for_each(|s| *s *= gain);
        self
    }

    /// Prepends `n` zero samples.
    pub fn delayed(&self, n: usize) -> Self {
        let mut samples = vec![0.0; n];
        samples.extend_from_slice(&self.samples);
        Self {
            samples,
            sample_rate: self.sample_rate,
            kind: self.kind,
        }
    }
}

/// Periodic test chirp: two 200 ms linear sweeps 400 → 1400 Hz per second,
/// exact silence in between (40 % duty cycle).
pub fn gen_chirp(duration: f64, sample_rate: f64) -> Result<SourceSignal> {
    if !(sample_rate >= CHIRP_MIN_RATE) || sample_rate <= 2.0 * CHIRP_F_END {
        return Err(Error::Config(format!(
            "chirp needs a sample rate of at least {CHIRP_MIN_RATE} Hz, got {sample_rate}"
        )));
    }
    if !(duration >= 0.0) {
        return Err(Error::Config(format!("negative duration {duration}")));
    }
    let n = (duration * sample_rate).round() as usize;
    let per_second = sample_rate.round() as usize;
    let burst_len = (CHIRP_BURST * sample_rate).round() as usize;
    let onsets: Vec<usize> = CHIRP_ONSETS
        .iter()
        .map(|o| (o * sample_rate).round() as usize)
        .collect();
    let sweep = (CHIRP_F_END - CHIRP_F_START) / CHIRP_BURST;
    let samples = (0..n)
        .map(|i| {
            let within = i % per_second;
            onsets
                .iter()
                .find(|&&o| within >= o && within < o + burst_len)
                .map_or(0.0, |&o| {
                    // evaluated mid-sample so no sample inside a burst is exactly 0
                    let tau = ((within - o) as f64 + 0.5) / sample_rate;
                    let phase = std::f64::consts::TAU
                        * (CHIRP_F_START * tau + 0.5 * sweep * tau * tau);
                    phase.sin()
                })
        })
        .collect();
    Ok(SourceSignal {
        samples,
        sample_rate,
        kind: SignalKind::Chirp,
    })
}

/// Band-limited Gaussian noise with unit RMS, deterministic in `seed`.
pub fn gen_wideband(
    duration: f64,
    sample_rate: f64,
    band: [f64; 2],
    seed: u64,
) -> Result<SourceSignal> {
    let [lo, hi] = band;
    if !(lo > 0.0 && lo < hi && hi < sample_rate / 2.0) {
        return Err(Error::Config(format!(
            "band [{lo}, {hi}] Hz must satisfy 0 < lo < hi < {}",
            sample_rate / 2.0
        )));
    }
    let n = (duration * sample_rate).round() as usize;
    if n == 0 {
        return Ok(SourceSignal {
            samples: vec![],
            sample_rate,
            kind: SignalKind::Wideband,
        });
    }
    let mut rng = seed::rng(seed, "wideband");
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut spec = dsp::fft_real(&white, n);
    for (k, bin) in spec.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * sample_rate / n as f64;
        if f < lo || f > hi {
            *bin = num_complex::Complex64::new(0.0, 0.0);
        }
    }
    dsp::ifft_in_place(&mut spec);
    let mut samples: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let rms = dsp::power(&samples).sqrt();
    if rms > 0.0 {
        samples.iter_mut().for_each(|s| *s /= rms);
    }
    Ok(SourceSignal {
        samples,
        sample_rate,
        kind: SignalKind::Wideband,
    })
}
