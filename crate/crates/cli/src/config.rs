//! Experiment configuration: JSON file, `--set` overrides and field-level
//! validation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use multiloc::audio::AudioPipelineConfig;
use multiloc::eval::EvalConfig;
use multiloc::radio::RadioTrainConfig;
use multiloc::repro::radio::RadioSuiteConfig;
use multiloc::repro::SuiteConfig;
use multiloc::sim::{MultipathRegime, Pattern};
use multiloc::SceneConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::FieldError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub id: u32,
    /// Walking speed, m/s.
    pub speed: f64,
    #[serde(flatten)]
    pub pattern: Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Wideband,
    Chirp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfererSpec {
    pub position: [f64; 3],
    /// RMS relative to the unit-RMS wideband source.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateOptions {
    pub audio: bool,
    pub radio: bool,
    /// First-order echoes with this reflection coefficient.
    pub echo_reflection: Option<f64>,
    pub interferer: Option<InterfererSpec>,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            audio: true,
            radio: true,
            echo_reflection: None,
            interferer: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioOptions {
    pub regime: MultipathRegime,
    /// Channel snapshots per second.
    pub snapshot_rate: f64,
    pub train: RadioTrainConfig,
}

impl Default for RadioOptions {
    fn default() -> Self {
        let suite = RadioSuiteConfig::default();
        Self {
            regime: suite.regime,
            snapshot_rate: suite.snapshot_rate,
            train: suite.train,
        }
    }
}

/// An explicit estimate/ground-truth pair for `evaluate`, e.g. an external
/// SLAM trajectory. Relative paths resolve against the input directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalJob {
    pub trajectory: String,
    pub sensor: String,
    pub est: PathBuf,
    pub gt: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scene: SceneConfig,
    pub trajectories: Vec<TrajectorySpec>,
    pub source: SourceKind,
    /// Noise levels; data is produced and processed once per level in
    /// addition to, or (for the processing commands) instead of, the clean
    /// variant.
    pub snr_db: Vec<f64>,
    pub simulate: SimulateOptions,
    /// Audio pipeline settings; derived from the sample rate when absent.
    pub audio: Option<AudioPipelineConfig>,
    pub radio: RadioOptions,
    pub eval: EvalConfig,
    /// Where processing commands read their inputs; defaults to `--out`.
    pub input_dir: Option<PathBuf>,
    /// Trained radio model; defaults to `<input>/model<variant>`.
    pub model_dir: Option<PathBuf>,
    pub jobs: Vec<EvalJob>,
    pub suite: SuiteConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let suite = SuiteConfig::default();
        let radio = RadioSuiteConfig::default();
        Self {
            seed: suite.seed,
            scene: radio.scene(&SceneConfig::paper_scale()),
            trajectories: (1..=radio.trajectories)
                .map(|id| TrajectorySpec {
                    id,
                    speed: radio.speed,
                    pattern: radio.grid_pattern(id),
                })
                .collect(),
            source: SourceKind::Wideband,
            snr_db: vec![],
            simulate: SimulateOptions::default(),
            audio: None,
            radio: RadioOptions::default(),
            eval: EvalConfig::default(),
            input_dir: None,
            model_dir: None,
            jobs: vec![],
            suite,
        }
    }
}

/// Loads a config file, accepting either a bare config or a run manifest
/// (whose `config` member is used).
pub fn load(path: Option<&Path>) -> Result<Value, Vec<FieldError>> {
    let Some(path) = path else {
        return Ok(serde_json::to_value(ExperimentConfig::default()).expect("config serializes"));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![FieldError::new("--config", format!("{}: {e}", path.display()))])?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| vec![FieldError::new("--config", format!("{}: {e}", path.display()))])?;
    if let Some(inner) = value.get("config").filter(|_| value.get("command").is_some()) {
        value = inner.clone();
    }
    // fill absent members with defaults so `--set` can reach them
    let mut full = serde_json::to_value(ExperimentConfig::default()).expect("config serializes");
    merge(&mut full, value);
    Ok(full)
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    // nested sections merge; enums and lists are replaced whole
                    Some(slot) if slot.is_object() && v.is_object() && !is_tagged(slot) => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Internally tagged enums (patterns) must not mix fields of two variants.
fn is_tagged(v: &Value) -> bool {
    v.get("pattern").is_some()
}

/// Applies one `key.path=value` override. The value is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_set(config: &mut Value, assignment: &str) -> Result<(), FieldError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| FieldError::new("--set", format!("expected KEY=VALUE, got {assignment:?}")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = config;
    for part in key.split('.') {
        slot = match slot {
            Value::Object(map) => map
                .get_mut(part)
                .ok_or_else(|| FieldError::new(key, format!("unknown field {part:?}")))?,
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| FieldError::new(key, format!("{part:?} is not a list index")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| FieldError::new(key, format!("index {idx} out of range for {len} items")))?
            }
            _ => return Err(FieldError::new(key, format!("cannot descend into {part:?}"))),
        };
    }
    *slot = value;
    Ok(())
}

/// Parses `10,20` into a list of SNRs.
pub fn parse_snr_list(list: &str) -> Result<Vec<f64>, FieldError> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| FieldError::new("--snr-db", format!("{s:?} is not a number")))
        })
        .collect()
}

pub fn from_value(value: Value) -> Result<ExperimentConfig, Vec<FieldError>> {
    serde_json::from_value(value).map_err(|e| vec![FieldError::new("config", e.to_string())])
}

impl ExperimentConfig {
    pub fn input_dir(&self, out: &Path) -> PathBuf {
        self.input_dir.clone().unwrap_or_else(|| out.to_path_buf())
    }

    pub fn audio_config(&self) -> AudioPipelineConfig {
        self.audio.unwrap_or_else(|| {
            AudioPipelineConfig::for_rate(
                self.scene.audio_sample_rate,
                multiloc::seed::derive(self.seed, "audio/ransac"),
            )
        })
    }

    /// File-name suffixes of the data variants to process: the clean data
    /// when no SNR is given, otherwise one per SNR.
    pub fn variants(&self) -> Vec<String> {
        if self.snr_db.is_empty() {
            vec![String::new()]
        } else {
            self.snr_db.iter().map(|s| snr_suffix(*s)).collect()
        }
    }

    /// Field-level problems; relative job paths resolve against the input
    /// directory for an output directory `out`.
    pub fn validate(&self, out: &Path) -> Vec<FieldError> {
        let mut errs = vec![];
        let mut check = |ok: bool, field: &str, msg: String| {
            if !ok {
                errs.push(FieldError::new(field, msg));
            }
        };
        if let Err(e) = self.scene.validate() {
            check(false, "scene", e.to_string());
        }
        let mut ids = BTreeSet::new();
        for (i, t) in self.trajectories.iter().enumerate() {
            check(ids.insert(t.id), &format!("trajectories.{i}.id"), format!("duplicate id {}", t.id));
            check(
                t.speed > 0.0 && t.speed.is_finite(),
                &format!("trajectories.{i}.speed"),
                format!("must be > 0, got {}", t.speed),
            );
        }
        for (i, s) in self.snr_db.iter().enumerate() {
            check(s.is_finite(), &format!("snr_db.{i}"), format!("must be finite, got {s}"));
        }
        if let Some(r) = self.simulate.echo_reflection {
            check((0.0..1.0).contains(&r), "simulate.echo_reflection", format!("must lie in [0, 1), got {r}"));
        }
        if let Some(a) = &self.audio {
            if let Err(e) = a.gcc.validate() {
                check(false, "audio.gcc", e.to_string());
            }
            if let Err(e) = a.ransac.validate() {
                check(false, "audio.ransac", e.to_string());
            }
        }
        check(
            self.radio.snapshot_rate > 0.0 && self.radio.snapshot_rate.is_finite(),
            "radio.snapshot_rate",
            format!("must be > 0, got {}", self.radio.snapshot_rate),
        );
        if let Err(e) = self.radio.train.hyper.validate() {
            check(false, "radio.train.hyper", e.to_string());
        }
        check(
            self.radio.train.features.cir_taps >= 1 && self.radio.train.features.covariance_window >= 1,
            "radio.train.features",
            "cir_taps and covariance_window must be >= 1".into(),
        );
        check(
            self.eval.max_dt >= 0.0 && self.eval.max_dt.is_finite(),
            "eval.max_dt",
            format!("must be finite and >= 0, got {}", self.eval.max_dt),
        );
        if let Some(dir) = &self.input_dir {
            check(dir.is_dir(), "input_dir", format!("{} is not a directory", dir.display()));
        }
        if let Some(dir) = &self.model_dir {
            check(dir.is_dir(), "model_dir", format!("{} is not a directory", dir.display()));
        }
        for (i, j) in self.jobs.iter().enumerate() {
            check(!j.trajectory.trim().is_empty(), &format!("jobs.{i}.trajectory"), "empty label".into());
            check(!j.sensor.trim().is_empty(), &format!("jobs.{i}.sensor"), "empty label".into());
            for (name, p) in [("est", &j.est), ("gt", &j.gt)] {
                let resolved = self.input_dir(out).join(p);
                check(
                    resolved.is_file(),
                    &format!("jobs.{i}.{name}"),
                    format!("{} does not exist", resolved.display()),
                );
            }
        }
        if let Err(e) = self.suite.validate() {
            check(false, "suite", e.to_string());
        }
        errs
    }
}

pub fn snr_suffix(snr: f64) -> String {
    format!("_snr{snr}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_value() -> Value {
        serde_json::to_value(ExperimentConfig::default()).unwrap()
    }

    #[test]
    fn default_round_trips_and_validates() {
        let cfg = from_value(default_value()).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert!(cfg.validate(Path::new(".")).is_empty());
    }

    #[test]
    fn set_overrides_nested_and_indexed_fields() {
        let mut v = default_value();
        apply_set(&mut v, "scene.temperature=28").unwrap();
        apply_set(&mut v, "trajectories.0.speed=0.25").unwrap();
        apply_set(&mut v, "source=chirp").unwrap();
        let cfg = from_value(v).unwrap();
        assert_eq!(cfg.scene.temperature, 28.0);
        assert_eq!(cfg.trajectories[0].speed, 0.25);
        assert_eq!(cfg.source, SourceKind::Chirp);
    }

    #[test]
    fn set_rejects_unknown_paths() {
        let mut v = default_value();
        assert_eq!(apply_set(&mut v, "scene.temprature=1").unwrap_err().field, "scene.temprature");
        assert!(apply_set(&mut v, "trajectories.99.speed=1").is_err());
        assert!(apply_set(&mut v, "seed").is_err());
    }

    #[test]
    fn validation_names_fields() {
        let mut cfg = ExperimentConfig::default();
        cfg.trajectories[1].speed = -1.0;
        cfg.trajectories[2].id = cfg.trajectories[0].id;
        cfg.eval.max_dt = f64::NAN;
        let fields: Vec<String> = cfg.validate(Path::new(".")).into_iter().map(|e| e.field).collect();
        assert_eq!(fields, vec!["trajectories.1.speed", "trajectories.2.id", "eval.max_dt"]);
    }

    #[test]
    fn partial_files_merge_onto_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 5, "scene": {"temperature": 25.0}}"#).unwrap();
        let cfg = from_value(load(Some(&path)).unwrap()).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.scene.temperature, 25.0);
        assert_eq!(cfg.scene.area_x, 4.2);
        // a manifest is accepted in place of a config
        let manifest = serde_json::json!({"command": "simulate", "config": {"seed": 9}});
        std::fs::write(&path, manifest.to_string()).unwrap();
        assert_eq!(from_value(load(Some(&path)).unwrap()).unwrap().seed, 9);
    }

    #[test]
    fn snr_lists() {
        assert_eq!(parse_snr_list("10,20").unwrap(), vec![10.0, 20.0]);
        assert!(parse_snr_list("10,x").is_err());
        assert_eq!(snr_suffix(10.0), "_snr10");
    }
}
