//! Module-level oracle experiments: GCC-PHAT against brute-force
//! correlation, multilateration on exact and corrupted TDOAs, network
//! gradients, rigid alignment and the speed-of-sound model.

use nalgebra::{DMatrix, Rotation3, Unit, Vector3};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;

use crate::audio::{gcc_phat, multilaterate_frame, speed_of_sound, GccConfig, PeakInterp, RansacConfig, TdoaFrame, TdoaMeasurement};
use crate::dsp;
use crate::error::Result;
use crate::eval::{align_rigid, stats_of, AlignMode, PairedSamples, Projection};
use crate::radio::{gradient_check, MlpModel};
use crate::seed;
use crate::sim::gen_wideband;
use crate::types::{MicArray, Position};

/// Pass count out of a number of randomized cases, plus the worst value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseTally {
    pub passed: usize,
    pub total: usize,
    pub worst: f64,
}

impl CaseTally {
    fn new() -> Self {
        Self {
            passed: 0,
            total: 0,
            worst: 0.0,
        }
    }

    fn record(&mut self, ok: bool, value: f64) {
        self.total += 1;
        self.passed += ok as usize;
        self.worst = self.worst.max(value);
    }

    pub fn all(&self) -> bool {
        self.passed == self.total
    }

    pub fn fraction(&self) -> f64 {
        self.passed as f64 / self.total.max(1) as f64
    }
}

const GCC_RATE: f64 = 96_000.0;
const GCC_WINDOW: usize = 4096;
const GCC_MAX_LAG: usize = 400;

/// Time-domain cross-correlation peak of `y` against `x` over
/// `|lag| ≤ max_lag`, refined by a parabola through the neighbours.
pub fn brute_force_delay(x: &[f64], y: &[f64], max_lag: usize) -> f64 {
    let n = x.len() as isize;
    let r = |lag: isize| -> f64 {
        (0.max(-lag)..n.min(n - lag))
            .map(|k| x[k as usize] * y[(k + lag) as usize])
            .sum()
    };
    let m = max_lag as isize;
    let values: Vec<f64> = (-m..=m).map(r).collect();
    let best = (0..values.len()).max_by(|a, b| values[*a].total_cmp(&values[*b])).expect("non-empty");
    let mut lag = best as f64 - m as f64;
    if best > 0 && best + 1 < values.len() {
        let (a, b, c) = (values[best - 1], values[best], values[best + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            lag += (0.5 * (a - c) / den).clamp(-0.5, 0.5);
        }
    }
    lag
}

/// Circular band-limited delay of a periodic signal by `d` samples.
fn fractional_shift(s: &[f64], d: f64) -> Vec<f64> {
    let n = s.len();
    let mut spec = dsp::fft_real(s, n);
    for (k, bin) in spec.iter_mut().enumerate() {
        let f = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        *bin *= Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * d / n as f64);
    }
    if n % 2 == 0 {
        // the Nyquist bin of a real signal cannot carry a phase
        spec[n / 2] = Complex64::new(0.0, 0.0);
    }
    dsp::ifft_in_place(&mut spec);
    spec.iter().map(|c| c.re / n as f64).collect()
}

/// Integer and fractional delays of wideband noise, each checked against
/// the truth and against the brute-force oracle.
pub fn gcc_cases(cases: usize, root: u64) -> Result<CaseTally> {
    let cfg = GccConfig {
        window: GCC_WINDOW,
        hop: GCC_WINDOW,
        peak_interp: PeakInterp::Parabolic,
        max_lag: GCC_MAX_LAG,
        score_threshold: 0.0,
        band: Some([100.0, 8000.0]),
    };
    let exact = GccConfig {
        peak_interp: PeakInterp::None,
        ..cfg
    };
    let mut tally = CaseTally::new();
    for case in 0..cases {
        let mut rng = seed::rng(root, &format!("gcc/{case}"));
        let len = 4 * GCC_WINDOW;
        let s = gen_wideband(len as f64 / GCC_RATE, GCC_RATE, [100.0, 8000.0], rng.random())?.samples;
        let start = GCC_WINDOW;
        let x = &s[start..start + GCC_WINDOW];

        // integer delay: y lags x by d samples
        let d = rng.random_range(-(GCC_MAX_LAG as i64 - 1)..GCC_MAX_LAG as i64);
        let y_start = (start as i64 - d) as usize;
        let y = &s[y_start..y_start + GCC_WINDOW];
        // exact: the same division the estimator performs, bit for bit
        let got = gcc_phat(x, y, GCC_RATE, &exact)?.delay;
        let oracle = brute_force_delay(x, y, GCC_MAX_LAG).round();
        let int_ok = got == d as f64 / GCC_RATE && oracle == d as f64;

        // fractional delay through a band-limited phase ramp
        let f = rng.random_range(-(GCC_MAX_LAG as f64 - 1.0)..GCC_MAX_LAG as f64 - 1.0);
        let shifted = fractional_shift(&s, f);
        let y = &shifted[start..start + GCC_WINDOW];
        let got = gcc_phat(x, y, GCC_RATE, &cfg)?.delay * GCC_RATE;
        let oracle = brute_force_delay(x, y, GCC_MAX_LAG);
        let err = (got - f).abs();
        let frac_ok = err <= 0.5 && (got - oracle).abs() <= 0.5;
        tally.record(int_ok && frac_ok, err);
    }
    Ok(tally)
}

fn exact_frame(p: &Position, mics: &MicArray, c: f64) -> TdoaFrame {
    let m = mics.positions();
    let n = m.len();
    let measurements = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| TdoaMeasurement {
            i,
            j,
            delay: ((p - m[j]).norm() - (p - m[i]).norm()) / c,
            score: 1.0,
        })
        .collect();
    TdoaFrame { t: 0.0, measurements }
}

fn interior_point(rng: &mut impl Rng, area: [f64; 2]) -> Position {
    Position::new(
        rng.random_range(0.0..area[0]),
        rng.random_range(0.0..area[1]),
        rng.random_range(0.2..1.5),
    )
}

/// `(exact, corrupted)`: errors on exact TDOAs must stay below 1 µm; with a
/// fraction `outliers` of pairs replaced by uniform delays, below 1 cm.
pub fn multilateration_cases(
    cases: usize,
    mics: &MicArray,
    area: [f64; 2],
    outliers: f64,
    root: u64,
) -> Result<(CaseTally, CaseTally)> {
    let c = speed_of_sound(22.0)?;
    let cfg = RansacConfig::for_rate(GCC_RATE, seed::derive(root, "multilat/ransac"));
    let (mut exact, mut corrupt) = (CaseTally::new(), CaseTally::new());
    for case in 0..cases {
        let mut rng = seed::rng(root, &format!("multilat/{case}"));
        let p = interior_point(&mut rng, area);
        let mut frame = exact_frame(&p, mics, c);
        let err = multilaterate_frame(&frame, mics, c, &cfg, None)
            .map(|l| (l.position - p).norm())
            .unwrap_or(f64::INFINITY);
        exact.record(err < 1e-6, err);

        let n = frame.measurements.len();
        for idx in sample(&mut rng, n, (outliers * n as f64).round() as usize) {
            let m = &mut frame.measurements[idx];
            let bound = mics.baseline(m.i, m.j) / c;
            m.delay = rng.random_range(-bound..bound);
        }
        let err = multilaterate_frame(&frame, mics, c, &cfg, None)
            .map(|l| (l.position - p).norm())
            .unwrap_or(f64::INFINITY);
        corrupt.record(err < 0.01, err);
    }
    Ok((exact, corrupt))
}

/// Randomized 2-layer probes; the tally's `worst` is the largest relative
/// gradient error.
pub fn gradient_cases(trials: usize, root: u64) -> CaseTally {
    let mut tally = CaseTally::new();
    for trial in 0..trials {
        let mut rng = seed::rng(root, &format!("grad/{trial}"));
        let (d, h, o, n) = (
            rng.random_range(2..8),
            rng.random_range(2..10),
            rng.random_range(1..4),
            rng.random_range(2..8),
        );
        let model = MlpModel::init(d, &[h], o, rng.random());
        let x = DMatrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0));
        let y = DMatrix::from_fn(o, n, |_, _| rng.random_range(-1.0..1.0));
        let err = gradient_check(&model, &x, &y, 1e-5);
        tally.record(err < 1e-4, err);
    }
    tally
}

/// Constructed rigid transforms must be undone to 1 nm.
pub fn alignment_cases(cases: usize, root: u64) -> Result<CaseTally> {
    let mut tally = CaseTally::new();
    for case in 0..cases {
        let mut rng = seed::rng(root, &format!("align/{case}"));
        let gt: Vec<Position> = (0..rng.random_range(4..30))
            .map(|_| Position::new(rng.random_range(0.0..4.2), rng.random_range(0.0..2.5), rng.random_range(0.0..2.0)))
            .collect();
        let axis = Unit::new_normalize(Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.1..1.0),
        ));
        let r = Rotation3::from_axis_angle(&axis, rng.random_range(-3.1..3.1));
        let t = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let est: Vec<Position> = gt.iter().map(|g| r * g + t).collect();
        let pairs = PairedSamples {
            t: (0..gt.len()).map(|i| i as f64).collect(),
            est,
            gt,
            drops: 0,
        };
        let worst = align_rigid(&pairs, AlignMode::Rigid)?
            .est
            .iter()
            .zip(&pairs.gt)
            .map(|(e, g)| (e - g).norm())
            .fold(0.0, f64::max);
        tally.record(worst < 1e-9, worst);
    }
    Ok(tally)
}

/// Statistics of the {3 cm, 4 cm} example, in centimeters.
pub fn three_four_example() -> Result<[f64; 3]> {
    let s = stats_of(&[0.03, 0.04], Projection::TwoD)?;
    Ok([100.0 * s.mean, 100.0 * s.sd, 100.0 * s.median])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SceneConfig;

    #[test]
    fn oracle_finds_a_plain_shift() {
        let s = gen_wideband(0.2, GCC_RATE, [100.0, 8000.0], 4).unwrap().samples;
        assert_eq!(brute_force_delay(&s[500..2548], &s[480..2528], 50).round(), 20.0);
        assert_eq!(brute_force_delay(&s[500..2548], &s[530..2578], 50).round(), -30.0);
    }

    #[test]
    fn fractional_shift_of_whole_samples_is_a_rotation() {
        let s = gen_wideband(0.05, GCC_RATE, [100.0, 8000.0], 4).unwrap().samples;
        let y = fractional_shift(&s, 3.0);
        for k in 3..s.len() {
            assert!((y[k] - s[k - 3]).abs() < 1e-9);
        }
    }

    #[test]
    fn small_batches_pass() {
        assert!(gcc_cases(3, 1).unwrap().all());
        let mics = SceneConfig::paper_scale().mic_array;
        let (exact, corrupt) = multilateration_cases(3, &mics, [4.2, 2.5], 0.3, 1).unwrap();
        assert!(exact.all() && corrupt.all());
        assert!(gradient_cases(3, 1).all());
        assert!(alignment_cases(3, 1).unwrap().all());
        let [m, sd, med] = three_four_example().unwrap();
        assert!((m - 3.5).abs() < 1e-12 && (sd - 0.7071).abs() < 1e-4 && (med - 3.5).abs() < 1e-12);
    }
}
