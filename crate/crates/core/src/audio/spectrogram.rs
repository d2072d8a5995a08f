use rustfft::FftPlanner;

use crate::dsp;
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Power spectrogram: `power[frame][bin]` for bins `0..=window/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub power: Vec<Vec<f64>>,
    pub bin_hz: f64,
    /// Frame center times, seconds from the first sample.
    pub frame_times: Vec<f64>,
}

impl Spectrogram {
    /// Index of the strongest bin in each frame.
    pub fn peak_bins(&self) -> Vec<usize> {
        self.power
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::MIN), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0
            })
            .collect()
    }
}

/// Squared magnitudes of Hann-windowed DFTs.
pub fn spectrogram(x: &[f64], sample_rate: f64, window: usize, hop: usize) -> Result<Spectrogram> {
    if window < 2 || hop < 1 {
        return Err(Error::Config(format!(
            "spectrogram needs window >= 2 and hop >= 1, got {window} / {hop}"
        )));
    }
    let taper = dsp::hann(window);
    let fft = FftPlanner::new().plan_fft_forward(window);
    let frames = if x.len() < window { 0 } else { (x.len() - window) / hop + 1 };
    let mut power = Vec::with_capacity(frames);
    let mut frame_times = Vec::with_capacity(frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); window];
    for f in 0..frames {
        let seg = &x[f * hop..f * hop + window];
        for ((b, v), w) in buf.iter_mut().zip(seg).zip(&taper) {
            *b = Complex64::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        power.push(buf[..=window / 2].iter().map(|c| c.norm_sqr()).collect());
        frame_times.push((f * hop) as f64 / sample_rate + window as f64 / (2.0 * sample_rate));
    }
    Ok(Spectrogram {
        power,
        bin_hz: sample_rate / window as f64,
        frame_times,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::gen_chirp;

    #[test]
    fn pure_tone_peaks_at_its_bin() {
        let fs = 96_000.0;
        let x: Vec<f64> = (0..48_000)
            .map(|i| (std::f64::consts::TAU * 1000.0 * i as f64 / fs).sin())
            .collect();
        let s = spectrogram(&x, fs, 4096, 2048).unwrap();
        assert!(!s.power.is_empty());
        let target = 1000.0 / s.bin_hz;
        for b in s.peak_bins() {
            assert!((b as f64 - target).abs() <= 1.0);
        }
    }

    #[test]
    fn chirp_ridge_rises_within_each_burst() {
        let fs = 96_000.0;
        let x = gen_chirp(1.0, fs).unwrap().samples;
        let s = spectrogram(&x, fs, 2048, 960).unwrap();
        let peaks = s.peak_bins();
        let inside: Vec<(f64, f64)> = s
            .frame_times
            .iter()
            .zip(&peaks)
            .filter(|(t, _)| **t > 0.02 && **t < 0.18)
            .map(|(t, b)| (*t, *b as f64 * s.bin_hz))
            .collect();
        assert!(inside.len() > 10);
        for w in inside.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
        for (t, f) in &inside {
            let expected = 400.0 + 5000.0 * t;
            assert!((f - expected).abs() <= 2.0 * s.bin_hz + 25.0, "{t}: {f} vs {expected}");
        }
        let first = inside.first().unwrap().1;
        let last = inside.last().unwrap().1;
        assert!(first < 600.0 && last > 1200.0);
    }

    #[test]
    fn silence_is_zero() {
        let s = spectrogram(&vec![0.0; 10_000], 96_000.0, 512, 256).unwrap();
        assert!(s.power.iter().flatten().all(|v| *v == 0.0));
        assert!(spectrogram(&[0.0; 10], 1.0, 1, 1).is_err());
    }
}
