use rayon::prelude::*;

use super::gcc::{GccConfig, GccEngine};
use crate::error::{Error, Result};
use crate::sim::MultichannelRecording;
use crate::types::MicArray;

/// One pairwise time difference: `delay = t_j - t_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdoaMeasurement {
    pub i: usize,
    pub j: usize,
    pub delay: f64,
    pub score: f64,
}

/// Pairwise time differences for one analysis window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TdoaFrame {
    /// Window center in seconds.
    pub t: f64,
    pub measurements: Vec<TdoaMeasurement>,
}

impl TdoaFrame {
    /// Measurements against the reference microphone 0.
    pub fn reference_pairs(&self) -> impl Iterator<Item = &TdoaMeasurement> {
        self.measurements.iter().filter(|m| m.i == 0)
    }
}

pub fn frame_count(len: usize, cfg: &GccConfig) -> usize {
    if len < cfg.window {
        0
    } else {
        (len - cfg.window) / cfg.hop + 1
    }
}

/// Runs GCC-PHAT on every microphone pair of every frame.
///
/// Pairs `(0, j)` carry the reference parameterization; the remaining
/// `(i, j)` pairs with `i < j` are kept for consistency scoring. A delay is
/// retained only if its score clears `cfg.score_threshold` and it does not
/// exceed the pair's baseline divided by `c`.
pub fn extract_tdoa_frames(
    rec: &MultichannelRecording,
    mics: &MicArray,
    c: f64,
    cfg: &GccConfig,
) -> Result<Vec<TdoaFrame>> {
    cfg.validate()?;
    let nch = rec.channel_count();
    if nch < 2 {
        return Err(Error::Input(format!("need at least 2 channels, got {nch}")));
    }
    if nch != mics.len() {
        return Err(Error::shape(
            format!("{} channels", mics.len()),
            format!("{nch} channels"),
        ));
    }
    let fs = rec.sample_rate;
    let engine = GccEngine::new(cfg.fft_len(), fs, cfg.band);
    let pairs: Vec<(usize, usize, f64, usize)> = (0..nch)
        .flat_map(|i| (i + 1..nch).map(move |j| (i, j)))
        .map(|(i, j)| {
            let bound = mics.baseline(i, j) / c;
            let lag = ((bound * fs).ceil() as usize + 1).min(cfg.max_lag);
            (i, j, bound, lag)
        })
        .collect();
    let frames = (0..frame_count(rec.len(), cfg))
        .into_par_iter()
        .map(|f| {
            let start = f * cfg.hop;
            let t = rec.start_time + (start as f64 + cfg.window as f64 / 2.0) / fs;
            let spectra: Vec<_> = rec
                .channels
                .iter()
                .map(|ch| engine.spectrum(&ch[start..start + cfg.window]))
                .collect();
            let measurements = pairs
                .iter()
                .filter_map(|&(i, j, bound, max_lag)| {
                    let (x, y) = (spectra[i].as_ref()?, spectra[j].as_ref()?);
                    let (lag, score) = engine.correlate(x, y, max_lag, cfg.peak_interp).ok()?;
                    let delay = lag / fs;
                    (score >= cfg.score_threshold && delay.abs() <= bound).then_some(
                        TdoaMeasurement { i, j, delay, score },
                    )
                })
                .collect();
            TdoaFrame { t, measurements }
        })
        .collect();
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{gen_chirp, gen_wideband, synth_audio, AudioSynthOptions};
    use crate::types::{Position, SceneConfig, TimedPosition, Trajectory};

    fn static_recording(p: Position, secs: f64, chirp: bool) -> (MultichannelRecording, MicArray) {
        let scene = SceneConfig::paper_scale();
        let fs = scene.audio_sample_rate;
        let src = if chirp {
            gen_chirp(secs, fs).unwrap()
        } else {
            gen_wideband(secs, fs, [100.0, 8000.0], 7).unwrap()
        };
        let tr = Trajectory::new(vec![
            TimedPosition { t: 0.0, position: p },
            TimedPosition { t: secs, position: p },
        ])
        .unwrap();
        let rec = synth_audio(&tr, &src, &scene.mic_array, 344.0, &AudioSynthOptions::default()).unwrap();
        (rec, scene.mic_array)
    }

    #[test]
    fn framing_arithmetic() {
        let cfg = GccConfig::for_rate(96_000.0);
        assert_eq!(frame_count(4095, &cfg), 0);
        assert_eq!(frame_count(4096, &cfg), 1);
        assert_eq!(frame_count(4096 + 959, &cfg), 1);
        assert_eq!(frame_count(96_000, &cfg), (96_000 - 4096) / 960 + 1);
    }

    #[test]
    fn static_source_delays_match_geometry() {
        let p = Position::new(1.3, 0.8, 0.5);
        let (rec, mics) = static_recording(p, 0.2, false);
        let cfg = GccConfig::for_rate(rec.sample_rate);
        let frames = extract_tdoa_frames(&rec, &mics, 344.0, &cfg).unwrap();
        assert_eq!(frames.len(), frame_count(rec.len(), &cfg));
        let d: Vec<f64> = mics.positions().iter().map(|m| (p - m).norm()).collect();
        // skip the first frame where the wavefront has not reached every mic
        for f in &frames[1..] {
            assert_eq!(f.reference_pairs().count(), 11);
            assert_eq!(f.measurements.len(), 66);
            for m in f.reference_pairs() {
                let want = (d[m.j] - d[0]) / 344.0;
                assert!((m.delay - want).abs() <= 0.5 / rec.sample_rate, "{} {}", m.j, m.delay - want);
            }
            for m in &f.measurements {
                assert!(m.delay.abs() <= mics.baseline(m.i, m.j) / 344.0);
                assert!(m.i < m.j);
            }
        }
    }

    #[test]
    fn chirp_gaps_yield_empty_frames() {
        let (rec, mics) = static_recording(Position::new(2.0, 1.0, 0.5), 1.0, true);
        let mut cfg = GccConfig::for_rate(rec.sample_rate);
        cfg.band = Some([300.0, 1500.0]);
        let frames = extract_tdoa_frames(&rec, &mics, 344.0, &cfg).unwrap();
        // windows entirely inside the 200-500 ms gap (plus propagation slack)
        let gap: Vec<&TdoaFrame> = frames
            .iter()
            .filter(|f| f.t > 0.25 + 0.03 && f.t < 0.5 - 0.025)
            .collect();
        assert!(!gap.is_empty());
        assert!(gap.iter().all(|f| f.measurements.is_empty()));
        let active = frames.iter().filter(|f| f.t > 0.05 && f.t < 0.15);
        assert!(active.into_iter().all(|f| f.reference_pairs().count() == 11));
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let (rec, _) = static_recording(Position::new(2.0, 1.0, 0.5), 0.05, false);
        let mics = MicArray::new(vec![
            Position::new(0.0, 0.0, 0.0),
            Position::new(1.0, 0.0, 0.0),
            Position::new(0.0, 1.0, 0.0),
            Position::new(0.0, 0.0, 1.0),
        ])
        .unwrap();
        assert!(extract_tdoa_frames(&rec, &mics, 344.0, &GccConfig::for_rate(96e3)).is_err());
    }
}
