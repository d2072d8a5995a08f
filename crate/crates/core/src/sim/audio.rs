use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::signal::SourceSignal;
use crate::dsp;
use crate::error::{Error, Result};
use crate::seed;
use crate::types::{MicArray, Position, Room, Trajectory};

/// Amplitude is `1 / max(distance, MIN_DISTANCE)`.
pub const MIN_DISTANCE: f64 = 0.1;

/// Synchronized recordings, one channel per microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelRecording {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: f64,
    pub start_time: f64,
}

impl MultichannelRecording {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: f64, start_time: f64) -> Result<Self> {
        if let Some(first) = channels.first() {
            if channels.iter().any(|c| c.len() != first.len()) {
                return Err(Error::Input("channels differ in length".into()));
            }
        }
        if !(sample_rate > 0.0) {
            return Err(Error::Config(format!("sample rate must be > 0, got {sample_rate}")));
        }
        Ok(Self {
            channels,
            sample_rate,
            start_time,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A second source at a fixed position, e.g. a fan.
#[derive(Debug, Clone)]
pub struct Interferer {
    pub position: Position,
    pub signal: SourceSignal,
}

/// First-order image-source echoes off the six room surfaces.
#[derive(Debug, Clone, Copy)]
pub struct Echoes {
    pub room: Room,
    /// Pressure reflection coefficient shared by all surfaces.
    pub reflection: f64,
}

#[derive(Debug, Clone, Default)]
pub struct AudioSynthOptions {
    pub interferer: Option<Interferer>,
    pub echoes: Option<Echoes>,
    /// The source must stay inside this box.
    pub bounds: Option<Room>,
    /// Per-channel SNR of added white Gaussian noise; `None` is noiseless.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

/// Renders what each microphone hears from a source moving along `traj`.
///
/// Channel `i` at time `t` carries the source sample emitted at
/// `t - d_i(t) / c`, linearly interpolated, scaled by `1 / max(d_i, 0.1)`.
/// The source starts emitting at the trajectory start, which is also the
/// recording start; recording length follows the trajectory span.
pub fn synth_audio(
    traj: &Trajectory,
    source: &SourceSignal,
    mics: &MicArray,
    c: f64,
    opts: &AudioSynthOptions,
) -> Result<MultichannelRecording> {
    if !(c > 0.0) {
        return Err(Error::Config(format!("speed of sound must be > 0, got {c}")));
    }
    if traj.duration() + 1e-9 < source.duration() {
        return Err(Error::Config(format!(
            "trajectory spans {:.3} s but the source lasts {:.3} s",
            traj.duration(),
            source.duration()
        )));
    }
    let bounds = opts.bounds.or(opts.echoes.map(|e| e.room));
    if let Some(room) = bounds {
        if let Some(p) = traj.samples().iter().find(|s| !room.contains(&s.position)) {
            return Err(Error::Geometry(format!(
                "source leaves the room at t = {:.3} s",
                p.t
            )));
        }
    }
    let fs = source.sample_rate;
    let n = (traj.duration() * fs).floor() as usize + 1;
    let t0 = traj.start();
    let positions: Vec<Position> = (0..n)
        .map(|k| traj.position_at_clamped(t0 + k as f64 / fs))
        .collect();

    let channels: Vec<Vec<f64>> = mics
        .positions()
        .par_iter()
        .enumerate()
        .map(|(i, mic)| {
            let mut ch = vec![0.0; n];
            let images: Vec<(Position, f64)> = match &opts.echoes {
                Some(e) => image_mics(mic, e),
                None => vec![],
            };
            for (k, (out, p)) in ch.iter_mut().zip(&positions).enumerate() {
                *out = propagate(&source.samples, p, mic, k, c, fs);
                for (img, gain) in &images {
                    // mirroring the microphone gives the same path length
                    // as mirroring the source
                    *out += gain * propagate(&source.samples, p, img, k, c, fs);
                }
            }
            if let Some(intf) = &opts.interferer {
                for (k, out) in ch.iter_mut().enumerate() {
                    *out += propagate(&intf.signal.samples, &intf.position, mic, k, c, fs);
                    for (img, gain) in &images {
                        *out += gain * propagate(&intf.signal.samples, &intf.position, img, k, c, fs);
                    }
                }
            }
            if let Some(snr) = opts.snr_db {
                let label = format!("audio-noise/ch{i}");
                if let Ok(noisy) = add_real_noise(&ch, snr, seed::derive(opts.seed, &label)) {
                    ch = noisy;
                }
            }
            ch
        })
        .collect();
    MultichannelRecording::new(channels, fs, t0)
}

#[inline]
fn propagate(signal: &[f64], src: &Position, mic: &Position, k: usize, c: f64, fs: f64) -> f64 {
    let d = (src - mic).norm();
    let pos = k as f64 - d / c * fs;
    dsp::sample_linear(signal, pos) / d.max(MIN_DISTANCE)
}

/// Mirror images of `mic` across the six room surfaces with their gains.
fn image_mics(mic: &Position, e: &Echoes) -> Vec<(Position, f64)> {
    let mut out = Vec::with_capacity(6);
    for axis in 0..3 {
        for wall in [e.room.min[axis], e.room.max[axis]] {
            let mut img = *mic;
            img[axis] = 2.0 * wall - mic[axis];
            out.push((img, e.reflection));
        }
    }
    out
}

pub(crate) fn add_real_noise(x: &[f64], snr_db: f64, seed: u64) -> Result<Vec<f64>> {
    let p = dsp::power(x);
    if p <= 0.0 {
        return Err(Error::ZeroPower);
    }
    let sigma = (p / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = seed::rng(seed, "awgn-real");
    Ok(x
        .iter()
        .map(|v| {
            let g: f64 = StandardNormal.sample(&mut rng);
            v + sigma * g
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::signal::gen_wideband;
    use crate::types::TimedPosition;

    fn static_traj(p: Position, secs: f64) -> Trajectory {
        Trajectory::new(vec![
            TimedPosition { t: 0.0, position: p },
            TimedPosition { t: secs, position: p },
        ])
        .unwrap()
    }

    fn square_mics() -> MicArray {
        MicArray::new(vec![
            Position::new(0.0, 0.0, 0.0),
            Position::new(2.0, 0.0, 0.0),
            Position::new(2.0, 2.0, 0.0),
            Position::new(0.0, 2.0, 1.0),
        ])
        .unwrap()
    }

    /// Integer lag maximizing the time-domain cross-correlation of y against x.
    fn brute_xcorr_lag(x: &[f64], y: &[f64], max_lag: i64) -> i64 {
        let mut best = (f64::MIN, 0);
        for lag in -max_lag..=max_lag {
            let mut acc = 0.0;
            for (i, xv) in x.iter().enumerate() {
                let j = i as i64 + lag;
                if j >= 0 && (j as usize) < y.len() {
                    acc += xv * y[j as usize];
                }
            }
            if acc > best.0 {
                best = (acc, lag);
            }
        }
        best.1
    }

    #[test]
    fn equidistant_mics_correlate_at_zero_lag() {
        let fs = 16_000.0;
        let src = gen_wideband(0.2, fs, [200.0, 6000.0], 1).unwrap();
        let rec = synth_audio(
            &static_traj(Position::new(1.0, 0.7, 0.0), 0.2),
            &src,
            &square_mics(),
            344.0,
            &AudioSynthOptions::default(),
        )
        .unwrap();
        assert_eq!(brute_xcorr_lag(&rec.channels[0], &rec.channels[1], 40), 0);
        assert_eq!(rec.channels[0], rec.channels[1]);
    }

    #[test]
    fn one_and_two_meter_paths_differ_by_2907_us() {
        let fs = 96_000.0;
        let src = gen_wideband(0.1, fs, [100.0, 8000.0], 5).unwrap();
        let mics = MicArray::new(vec![
            Position::new(1.0, 0.0, 0.0),
            Position::new(-2.0, 0.0, 0.0),
            Position::new(0.0, 3.0, 0.0),
            Position::new(0.0, 0.0, 4.0),
        ])
        .unwrap();
        let rec = synth_audio(
            &static_traj(Position::zeros(), 0.1),
            &src,
            &mics,
            344.0,
            &AudioSynthOptions::default(),
        )
        .unwrap();
        let expected: f64 = 1.0 / 344.0;
        assert!((expected - 2.907e-3).abs() < 1e-6);
        let lag = brute_xcorr_lag(&rec.channels[0], &rec.channels[1], 400) as f64 / fs;
        assert!((lag - expected).abs() <= 0.5 / fs, "{lag}");
    }

    #[test]
    fn clean_channels_are_exact_delayed_copies() {
        let fs = 8_000.0;
        let src = gen_wideband(0.05, fs, [100.0, 3000.0], 2).unwrap();
        let p = Position::new(0.3, 0.4, 0.2);
        let mics = square_mics();
        let rec = synth_audio(&static_traj(p, 0.05), &src, &mics, 340.0, &Default::default()).unwrap();
        for (i, m) in mics.positions().iter().enumerate() {
            let d = (p - m).norm();
            for k in [0usize, 17, 200, 399] {
                let want = dsp::sample_linear(&src.samples, k as f64 - d / 340.0 * fs) / d;
                assert!((rec.channels[i][k] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn source_delay_shifts_every_channel() {
        let fs = 8_000.0;
        let src = gen_wideband(0.05, fs, [100.0, 3000.0], 9).unwrap();
        let late = src.delayed(13);
        let tr = static_traj(Position::new(0.5, 1.5, 0.5), 0.06);
        let mics = square_mics();
        let a = synth_audio(&tr, &src, &mics, 343.0, &Default::default()).unwrap();
        let b = synth_audio(&tr, &late, &mics, 343.0, &Default::default()).unwrap();
        for (ca, cb) in a.channels.iter().zip(&b.channels) {
            for k in 13..ca.len() {
                assert!((cb[k] - ca[k - 13]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noise_hits_requested_snr_and_is_seeded() {
        let fs = 8_000.0;
        let src = gen_wideband(1.0, fs, [100.0, 3000.0], 9).unwrap();
        let tr = static_traj(Position::new(0.5, 1.5, 0.5), 1.0);
        let mut opts = AudioSynthOptions {
            snr_db: Some(10.0),
            seed: 4,
            ..Default::default()
        };
        let clean = synth_audio(&tr, &src, &square_mics(), 343.0, &Default::default()).unwrap();
        let a = synth_audio(&tr, &src, &square_mics(), 343.0, &opts).unwrap();
        let b = synth_audio(&tr, &src, &square_mics(), 343.0, &opts).unwrap();
        assert_eq!(a, b);
        let noise: Vec<f64> = a.channels[2].iter().zip(&clean.channels[2]).map(|(x, y)| x - y).collect();
        let snr = 10.0 * (dsp::power(&clean.channels[2]) / dsp::power(&noise)).log10();
        assert!((snr - 10.0).abs() < 0.2, "{snr}");
        opts.seed = 5;
        assert_ne!(a, synth_audio(&tr, &src, &square_mics(), 343.0, &opts).unwrap());
    }

    #[test]
    fn leaving_the_room_is_a_geometry_error() {
        let fs = 8_000.0;
        let src = gen_wideband(0.05, fs, [100.0, 3000.0], 9).unwrap();
        let room = Room {
            min: Position::new(0.0, 0.0, 0.0),
            max: Position::new(1.0, 1.0, 1.0),
        };
        let opts = AudioSynthOptions {
            bounds: Some(room),
            ..Default::default()
        };
        let tr = static_traj(Position::new(2.0, 0.5, 0.5), 0.05);
        assert!(matches!(
            synth_audio(&tr, &src, &square_mics(), 343.0, &opts),
            Err(Error::Geometry(_))
        ));
    }
}
