//! Shared domain types: timed positions, trajectories, microphone arrays and
//! scene descriptions, plus the trajectory CSV format.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Position = Vector3<f64>;

/// A 3D position stamped with a monotone clock time in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPosition {
    pub t: f64,
    pub position: Position,
}

impl TimedPosition {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        Self {
            t,
            position: Position::new(x, y, z),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.position.iter().all(|v| v.is_finite())
    }
}

/// Time-ordered positions with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<TimedPosition>,
    pub frame_rate_hint: Option<f64>,
}

impl Trajectory {
    pub fn new(samples: Vec<TimedPosition>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::DegenerateInput("trajectory has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Input(format!("sample {i} is not finite")));
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::Input(format!(
                "timestamps not strictly increasing at sample {}",
                i + 1
            )));
        }
        Ok(Self {
            samples,
            frame_rate_hint: None,
        })
    }

    pub fn with_rate_hint(mut self, rate: f64) -> Self {
        self.frame_rate_hint = Some(rate);
        self
    }

    pub fn samples(&self) -> &[TimedPosition] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn positions(&self) -> impl Iterator<Item = Position> + '_ {
        self.samples.iter().map(|s| s.position)
    }

    /// Piecewise-linear position at `t`, or `None` outside the sampled span.
    pub fn position_at(&self, t: f64) -> Option<Position> {
        let s = &self.samples;
        if t < self.start() || t > self.end() {
            return None;
        }
        // first index with time > t
        let hi = s.partition_point(|p| p.t <= t);
        if hi == 0 {
            return Some(s[0].position);
        }
        let a = &s[hi - 1];
        if a.t == t || hi == s.len() {
            return Some(a.position);
        }
        let b = &s[hi];
        let w = (t - a.t) / (b.t - a.t);
        Some(lerp_clamped(&a.position, &b.position, w))
    }

    /// Position at `t`, holding the first/last sample outside the span.
    pub fn position_at_clamped(&self, t: f64) -> Position {
        self.position_at(t.clamp(self.start(), self.end()))
            .expect("clamped time lies inside the span")
    }

    /// Resamples onto a uniform grid at `rate` Hz spanning the input range.
    ///
    /// Grid times past the last input sample are dropped rather than
    /// extrapolated.
    pub fn resample(&self, rate: f64) -> Result<Trajectory> {
        if self.samples.len() < 2 {
            return Err(Error::DegenerateInput(
                "resampling needs at least 2 samples".into(),
            ));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Config(format!("resample rate must be > 0, got {rate}")));
        }
        let t0 = self.start();
        let span = self.duration();
        let n = (span * rate + 1e-9).floor() as usize + 1;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut t = t0 + k as f64 / rate;
            if t > self.end() {
                t = self.end();
            }
            // snap onto an input timestamp when the grid lands on it
            let hi = self.samples.partition_point(|p| p.t < t);
            for idx in [hi.saturating_sub(1), hi] {
                if let Some(s) = self.samples.get(idx) {
                    if (s.t - t).abs() <= 1e-9 * (1.0 + t.abs()) {
                        t = s.t;
                    }
                }
            }
            if out.last().is_some_and(|p: &TimedPosition| p.t >= t) {
                continue;
            }
            let position = self.position_at(t).expect("grid inside span");
            out.push(TimedPosition { t, position });
        }
        Ok(Trajectory::new(out)?.with_rate_hint(rate))
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("t,x,y,z\n");
        for p in &self.samples {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                p.t, p.position.x, p.position.y, p.position.z
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text).map_err(|e| match e {
            Error::Input(msg) => Error::format(path, msg),
            other => other,
        })
    }

    pub fn parse_csv(text: &str) -> Result<Trajectory> {
        let rows = parse_numeric_csv(text, &["t", "x", "y", "z"])?;
        let samples = rows
            .into_iter()
            .map(|r| TimedPosition::new(r[0], r[1], r[2], r[3]))
            .collect();
        Trajectory::new(samples)
    }
}

fn lerp_clamped(a: &Position, b: &Position, w: f64) -> Position {
    let w = w.clamp(0.0, 1.0);
    Position::from_fn(|i, _| {
        let (lo, hi) = if a[i] <= b[i] { (a[i], b[i]) } else { (b[i], a[i]) };
        (a[i] + w * (b[i] - a[i])).clamp(lo, hi)
    })
}

/// Parses a headed CSV of numbers. The header must equal `columns`.
pub(crate) fn parse_numeric_csv(text: &str, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Input("empty file".into()))?;
    let got: Vec<&str> = header.split(',').map(str::trim).collect();
    if got != columns {
        return Err(Error::Input(format!(
            "expected header `{}`, got `{}`",
            columns.join(","),
            header.trim()
        )));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != columns.len() {
                return Err(Error::Input(format!(
                    "row {}: expected {} fields, got {}",
                    i + 2,
                    columns.len(),
                    fields.len()
                )));
            }
            fields
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Input(format!("row {}: `{f}`: {e}", i + 2)))
                })
                .collect()
        })
        .collect()
}

/// Ordered microphone positions in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct MicArray {
    positions: Vec<Position>,
}

impl MicArray {
    /// Minimum microphone count for planar solving; 3D needs one more.
    pub const MIN_PLANAR: usize = 4;
    pub const MIN_3D: usize = 5;

    pub fn new(positions: Vec<Position>) -> Result<Self> {
        if positions.len() < Self::MIN_PLANAR {
            return Err(Error::Geometry(format!(
                "need at least {} microphones, got {}",
                Self::MIN_PLANAR,
                positions.len()
            )));
        }
        if positions.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Geometry("microphone position not finite".into()));
        }
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                if (positions[i] - positions[j]).norm() < 1e-9 {
                    return Err(Error::Geometry(format!(
                        "microphones {i} and {j} coincide"
                    )));
                }
            }
        }
        let a = positions[0];
        let dir = (positions[1] - a).normalize();
        let spread = positions
            .iter()
            .map(|p| (p - a).cross(&dir).norm())
            .fold(0.0, f64::max);
        if spread < 1e-9 {
            return Err(Error::Geometry("microphones are collinear".into()));
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn baseline(&self, i: usize, j: usize) -> f64 {
        (self.positions[i] - self.positions[j]).norm()
    }

    pub fn centroid(&self) -> Position {
        self.positions.iter().sum::<Position>() / self.positions.len() as f64
    }

    pub fn translated(&self, offset: &Position) -> MicArray {
        MicArray {
            positions: self.positions.iter().map(|p| p + offset).collect(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("mic,x,y,z\n");
        for (i, p) in self.positions.iter().enumerate() {
            let _ = writeln!(s, "{i},{},{},{}", p.x, p.y, p.z);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Reads the `mic,x,y,z` geometry file; rows may come in any order.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<MicArray> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows = parse_numeric_csv(&text, &["mic", "x", "y", "z"])
            .map_err(|e| Error::format(path, e))?;
        rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for (i, r) in rows.iter().enumerate() {
            if r[0] != i as f64 {
                return Err(Error::format(path, format!("microphone ids must be 0..n, missing {i}")));
            }
        }
        MicArray::new(rows.iter().map(|r| Position::new(r[1], r[2], r[3])).collect())
    }
}

impl TryFrom<Vec<[f64; 3]>> for MicArray {
    type Error = Error;

    fn try_from(value: Vec<[f64; 3]>) -> Result<Self> {
        MicArray::new(value.into_iter().map(Position::from).collect())
    }
}

impl From<MicArray> for Vec<[f64; 3]> {
    fn from(value: MicArray) -> Self {
        value.positions.iter().map(|p| [p.x, p.y, p.z]).collect()
    }
}

/// Full description of a synthetic measurement campaign.
///
/// The measurement area is `[0, area_x] × [0, area_y]`; the room extends
/// `room_margin` beyond it on every side and is `room_height` tall. The
/// radio array is a half-wavelength uniform linear array parallel to the x
/// axis, centered at `x = area_x / 2`, `array_standoff` meters below `y = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub area_x: f64,
    pub area_y: f64,
    pub mic_array: MicArray,
    pub antenna_count: usize,
    pub subcarrier_count: usize,
    pub center_frequency: f64,
    pub bandwidth: f64,
    pub audio_sample_rate: f64,
    pub temperature: f64,
    pub rng_seed: u64,
    #[serde(default = "defaults::room_margin")]
    pub room_margin: f64,
    #[serde(default = "defaults::room_height")]
    pub room_height: f64,
    #[serde(default = "defaults::source_height")]
    pub source_height: f64,
    #[serde(default = "defaults::antenna_height")]
    pub antenna_height: f64,
    #[serde(default = "defaults::array_standoff")]
    pub array_standoff: f64,
    #[serde(default = "defaults::max_source_frequency")]
    pub max_source_frequency: f64,
}

mod defaults {
    pub fn room_margin() -> f64 {
        1.0
    }
    pub fn room_height() -> f64 {
        3.0
    }
    pub fn source_height() -> f64 {
        0.5
    }
    pub fn antenna_height() -> f64 {
        1.0
    }
    pub fn array_standoff() -> f64 {
        0.5
    }
    pub fn max_source_frequency() -> f64 {
        8000.0
    }
}

/// Axis-aligned room box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Room {
    pub min: Position,
    pub max: Position,
}

impl Room {
    pub fn contains(&self, p: &Position) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

impl SceneConfig {
    /// The measured campaign's geometry: a 4.2 × 2.5 m area watched by 12
    /// microphones at 96 kHz, and a 100-antenna array at 3.7 GHz / 20 MHz.
    pub fn paper_scale() -> SceneConfig {
        let mics = [
            [-0.5, -0.5, 0.5],
            [1.0, -0.6, 1.4],
            [2.1, -0.6, 2.0],
            [4.7, -0.5, 1.0],
            [4.8, 1.25, 2.2],
            [4.7, 3.0, 0.6],
            [3.2, 3.1, 0.9],
            [2.1, 3.1, 1.8],
            [1.2, 3.1, 2.6],
            [-0.5, 3.0, 1.2],
            [-0.6, 1.25, 2.4],
            [2.1, 1.25, 2.8],
        ];
        SceneConfig {
            area_x: 4.2,
            area_y: 2.5,
            mic_array: MicArray::new(mics.iter().map(|m| Position::from(*m)).collect())
                .expect("valid built-in array"),
            antenna_count: 100,
            subcarrier_count: 100,
            center_frequency: 3.7e9,
            bandwidth: 20e6,
            audio_sample_rate: 96_000.0,
            temperature: 22.0,
            rng_seed: 2023,
            room_margin: defaults::room_margin(),
            room_height: defaults::room_height(),
            source_height: defaults::source_height(),
            antenna_height: defaults::antenna_height(),
            array_standoff: defaults::array_standoff(),
            max_source_frequency: defaults::max_source_frequency(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_x", self.area_x),
            ("area_y", self.area_y),
            ("center_frequency", self.center_frequency),
            ("bandwidth", self.bandwidth),
            ("audio_sample_rate", self.audio_sample_rate),
            ("room_height", self.room_height),
            ("max_source_frequency", self.max_source_frequency),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.room_margin < 0.0 || self.array_standoff < 0.0 {
            return Err(Error::Config("room_margin and array_standoff must be >= 0".into()));
        }
        if self.antenna_count < 1 || self.subcarrier_count < 1 {
            return Err(Error::Config(
                "antenna_count and subcarrier_count must be >= 1".into(),
            ));
        }
        if self.audio_sample_rate <= 2.0 * self.max_source_frequency {
            return Err(Error::Config(format!(
                "audio_sample_rate {} must exceed twice the max source frequency {}",
                self.audio_sample_rate, self.max_source_frequency
            )));
        }
        if self.bandwidth >= self.center_frequency {
            return Err(Error::Config("bandwidth must be below the center frequency".into()));
        }
        let room = self.room();
        for (i, m) in self.mic_array.positions().iter().enumerate() {
            if !room.contains(m) {
                return Err(Error::Geometry(format!("microphone {i} lies outside the room")));
            }
        }
        Ok(())
    }

    pub fn room(&self) -> Room {
        Room {
            min: Position::new(-self.room_margin, -self.room_margin, 0.0),
            max: Position::new(
                self.area_x + self.room_margin,
                self.area_y + self.room_margin,
                self.room_height,
            ),
        }
    }

    pub fn wavelength(&self) -> f64 {
        crate::SPEED_OF_LIGHT / self.center_frequency
    }

    pub fn antenna_positions(&self) -> Vec<Position> {
        let spacing = self.wavelength() / 2.0;
        let n = self.antenna_count;
        let x0 = self.area_x / 2.0 - spacing * (n as f64 - 1.0) / 2.0;
        (0..n)
            .map(|a| {
                Position::new(
                    x0 + a as f64 * spacing,
                    -self.array_standoff,
                    self.antenna_height,
                )
            })
            .collect()
    }

    /// Subcarrier frequencies spanning `center ± bandwidth/2`, equally spaced.
    pub fn subcarrier_frequencies(&self) -> Vec<f64> {
        let k = self.subcarrier_count;
        if k == 1 {
            return vec![self.center_frequency];
        }
        let lo = self.center_frequency - self.bandwidth / 2.0;
        let step = self.bandwidth / (k as f64 - 1.0);
        (0..k).map(|i| lo + i as f64 * step).collect()
    }

    pub fn in_area(&self, p: &Position) -> bool {
        const EPS: f64 = 1e-9;
        p.x >= -EPS && p.x <= self.area_x + EPS && p.y >= -EPS && p.y <= self.area_y + EPS
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn traj(points: &[(f64, f64)]) -> Trajectory {
        Trajectory::new(
            points
                .iter()
                .map(|&(t, x)| TimedPosition::new(t, x, 0.0, 0.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_increasing_timestamps() {
        let samples = vec![TimedPosition::new(0.0, 0.0, 0.0, 0.0); 2];
        assert!(matches!(Trajectory::new(samples), Err(Error::Input(_))));
        assert!(Trajectory::new(vec![]).is_err());
    }

    #[test]
    fn resample_uniform_input_is_identity() {
        let samples: Vec<_> = (0..11)
            .map(|k| TimedPosition::new(k as f64 * 0.1, k as f64, -(k as f64), 1.0))
            .collect();
        let t = Trajectory::new(samples.clone()).unwrap();
        let r = t.resample(10.0).unwrap();
        assert_eq!(r.samples(), &samples[..]);
    }

    #[test]
    fn resample_linear_midpoint() {
        let r = traj(&[(0.0, 0.0), (1.0, 2.0)]).resample(2.0).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.samples()[1].t, 0.5);
        assert_eq!(r.samples()[1].position.x, 1.0);
    }

    #[test]
    fn resample_needs_two_samples() {
        assert!(matches!(
            traj(&[(0.0, 1.0)]).resample(10.0),
            Err(Error::DegenerateInput(_))
        ));
        assert!(traj(&[(0.0, 1.0), (1.0, 1.0)]).resample(0.0).is_err());
    }

    #[test]
    fn resample_matches_brute_force_interpolation() {
        // independent evaluator: scan every segment for the one containing t
        fn oracle(pts: &[(f64, [f64; 3])], t: f64) -> [f64; 3] {
            for w in pts.windows(2) {
                let ((t0, a), (t1, b)) = (w[0], w[1]);
                if t >= t0 && t <= t1 {
                    let f = (t - t0) / (t1 - t0);
                    return [0, 1, 2].map(|i| a[i] * (1.0 - f) + b[i] * f);
                }
            }
            panic!("t outside span");
        }
        let pts = [
            (0.0, [0.3, 1.2, 0.5]),
            (0.37, [1.9, 0.4, 0.5]),
            (1.05, [-0.8, 2.2, 0.7]),
        ];
        let t = Trajectory::new(
            pts.iter()
                .map(|(t, p)| TimedPosition::new(*t, p[0], p[1], p[2]))
                .collect(),
        )
        .unwrap();
        let r = t.resample(10.0).unwrap();
        assert_eq!(r.len(), 11);
        for s in r.samples() {
            let want = oracle(&pts, s.t);
            for i in 0..3 {
                assert!((s.position[i] - want[i]).abs() < 1e-12, "{} {i}", s.t);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let t = traj(&[(0.0, 0.1), (0.01, 1.0 / 3.0), (0.02, -2.5e-7)]);
        let back = Trajectory::parse_csv(&t.to_csv_string()).unwrap();
        assert_eq!(t, back);
        assert!(Trajectory::parse_csv("t,x,y\n0,0,0\n").is_err());
    }

    #[test]
    fn mic_array_guards() {
        let line: Vec<_> = (0..5).map(|i| Position::new(i as f64, 0.0, 0.0)).collect();
        assert!(MicArray::new(line).is_err());
        let mut pts: Vec<_> = (0..5)
            .map(|i| Position::new(i as f64, (i * i) as f64, 0.0))
            .collect();
        pts[4] = pts[2];
        assert!(MicArray::new(pts).is_err());
        assert!(MicArray::new(vec![Position::zeros(); 3]).is_err());
    }

    #[test]
    fn paper_scene_is_valid_and_round_trips_json() {
        let s = SceneConfig::paper_scale();
        s.validate().unwrap();
        assert_eq!(s.mic_array.len(), 12);
        let json = serde_json::to_string(&s).unwrap();
        let back: SceneConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
        let ants = s.antenna_positions();
        assert!(((ants[1] - ants[0]).norm() - s.wavelength() / 2.0).abs() < 1e-12);
        let f = s.subcarrier_frequencies();
        assert!((f[0] - 3.69e9).abs() < 1e-3 && (f[99] - 3.71e9).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn resample_reproduces_original_samples_and_stays_in_bracket(
            steps in prop::collection::vec((0.01f64..0.5, -5.0f64..5.0), 2..12),
            rate in 1.0f64..60.0,
        ) {
            let mut t = 0.0;
            let mut pts = vec![(0.0, 0.0)];
            for (dt, x) in steps {
                t += dt;
                pts.push((t, x));
            }
            let tr = traj(&pts);
            for s in tr.samples() {
                prop_assert_eq!(tr.position_at(s.t).unwrap(), s.position);
            }
            let r = tr.resample(rate).unwrap();
            for s in r.samples() {
                let hi = pts.partition_point(|p| p.0 < s.t).max(1).min(pts.len() - 1);
                let (a, b) = (pts[hi - 1].1, pts[hi].1);
                prop_assert!(s.position.x >= a.min(b) && s.position.x <= a.max(b));
            }
        }
    }
}
