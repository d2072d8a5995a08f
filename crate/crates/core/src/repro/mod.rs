//! The reproduction suite: seeded experiments whose outcomes are checked
//! against fixed acceptance criteria and written as report files.
//!
//! Every number in the written CSVs depends only on the configuration and
//! the root seed, so two runs produce byte-identical files; the suite
//! verifies this itself by running a second time into a scratch directory.

pub mod audio;
pub mod radio;
pub mod units;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::speed_of_sound;
use crate::error::{Error, Result};
use crate::eval::{write_report, ReportEntry};
use crate::types::SceneConfig;
use audio::{run_audio, AudioOutcome, AudioSuiteConfig};
use radio::{run_radio, RadioOutcome, RadioSuiteConfig};
use units::CaseTally;

pub const CRITERIA_CSV: &str = "criteria.csv";
pub const CRITERIA_TABLE: &str = "criteria.txt";
/// Subdirectory receiving the second run of the determinism check.
pub const RERUN_DIR: &str = "rerun";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub scene: SceneConfig,
    pub audio: AudioSuiteConfig,
    pub radio: RadioSuiteConfig,
    /// Randomized cases for the GCC, multilateration and alignment checks.
    pub unit_cases: usize,
    pub outlier_fraction: f64,
    pub gradient_trials: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 2023,
            scene: SceneConfig::paper_scale(),
            audio: AudioSuiteConfig::default(),
            radio: RadioSuiteConfig::default(),
            unit_cases: 100,
            outlier_fraction: 0.3,
            gradient_trials: 10,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.radio.train.hyper.validate()?;
        if self.unit_cases == 0 || self.gradient_trials == 0 {
            return Err(Error::Config("unit_cases and gradient_trials must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::Config(format!(
                "outlier_fraction must lie in [0, 1), got {}",
                self.outlier_fraction
            )));
        }
        if self.radio.trajectories < 2 {
            return Err(Error::Config("the radio grid needs at least 2 trajectories".into()));
        }
        Ok(())
    }
}

/// Outcome of one acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub name: String,
    pub passed: bool,
    /// What was measured, formatted deterministically.
    pub measured: String,
    pub requirement: String,
}

impl Check {
    fn new(id: impl ToString, name: &str, passed: bool, measured: String, requirement: &str) -> Self {
        Self {
            id: id.to_string(),
            name: name.into(),
            passed,
            measured,
            requirement: requirement.into(),
        }
    }

    /// `[PASS] 3 TDOA unit accuracy: 100/100 cases (requires ...)`.
    pub fn line(&self) -> String {
        format!(
            "[{}] {} {}: {} (requires {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.requirement
        )
    }
}

/// Everything one suite run measured.
pub struct SuiteResults {
    /// Criteria 1–10 in order.
    pub criteria: Vec<Check>,
    /// Fused error against the better single network on the clean split.
    pub ablation: Check,
    pub entries: Vec<ReportEntry>,
    pub audio: AudioOutcome,
    pub radio: RadioOutcome,
}

fn cm(v: f64) -> String {
    format!("{:.2} cm", 100.0 * v)
}

fn tally(t: &CaseTally) -> String {
    format!("{}/{} cases", t.passed, t.total)
}

/// Runs criteria 1–10 and the fusion ablation.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteResults> {
    cfg.validate()?;
    let root = cfg.seed;
    let scene = &cfg.scene;
    let mut criteria = vec![];

    let audio = run_audio(scene, &cfg.audio, crate::seed::derive(root, "suite/audio"))?;
    let (w, c) = (&audio.wideband.stats, &audio.chirp.stats);
    criteria.push(Check::new(
        1,
        "audio clean-scene accuracy",
        w.mean < 0.05 && w.median < 0.03,
        format!("mean {}, median {}", cm(w.mean), cm(w.median)),
        "mean < 5 cm and median < 3 cm",
    ));
    criteria.push(Check::new(
        2,
        "chirp degradation",
        c.mean >= 2.0 * w.mean,
        format!("chirp mean {} vs wideband {} ({:.1}x)", cm(c.mean), cm(w.mean), c.mean / w.mean),
        ">= 2x the wideband mean",
    ));

    let gcc = units::gcc_cases(cfg.unit_cases, crate::seed::derive(root, "suite/gcc"))?;
    criteria.push(Check::new(
        3,
        "TDOA unit accuracy",
        gcc.all(),
        format!("{}, worst fractional error {:.4} samples", tally(&gcc), gcc.worst),
        "all cases: integer delays exact, fractional within 0.5 sample, oracle agreement",
    ));

    let area = [scene.area_x, scene.area_y];
    let (exact, corrupt) = units::multilateration_cases(
        cfg.unit_cases,
        &scene.mic_array,
        area,
        cfg.outlier_fraction,
        crate::seed::derive(root, "suite/multilat"),
    )?;
    criteria.push(Check::new(
        4,
        "multilateration exactness",
        exact.all() && corrupt.fraction() >= 0.95,
        format!(
            "exact {} (worst {:.1e} m), {:.0} % outliers {}",
            tally(&exact),
            exact.worst,
            100.0 * cfg.outlier_fraction,
            tally(&corrupt)
        ),
        "every exact case < 1e-6 m; >= 95 % of outlier cases < 1 cm",
    ));

    let radio = run_radio(scene, &cfg.radio, crate::seed::derive(root, "suite/radio"))?;
    let diagonal = scene.area_x.hypot(scene.area_y);
    let (clean, noisy) = (&radio.clean, &radio.noisy);
    let monotone = clean.losses_monotone();
    criteria.push(Check::new(
        5,
        "radio in-support accuracy",
        clean.fused.mean < 0.1 * diagonal && monotone,
        format!(
            "fused mean {} vs limit {}, smoothed losses {}",
            cm(clean.fused.mean),
            cm(0.1 * diagonal),
            if monotone { "non-increasing" } else { "not monotone" }
        ),
        "< 10 % of the area diagonal and non-increasing window-10 loss",
    ));
    let ratio = noisy.fused.mean / clean.fused.mean;
    criteria.push(Check::new(
        6,
        "radio SNR robustness",
        (ratio - 1.0).abs() <= 0.2,
        format!(
            "{} dB mean {} vs clean {} ({:+.1} %)",
            cfg.radio.snr_db,
            cm(noisy.fused.mean),
            cm(clean.fused.mean),
            100.0 * (ratio - 1.0)
        ),
        "within 20 % of the noise-free mean",
    ));
    let out = radio.circle.stats.mean;
    criteria.push(Check::new(
        7,
        "radio out-of-support failure",
        out >= 2.0 * clean.fused.mean,
        format!("circle mean {} vs in-support {} ({:.1}x)", cm(out), cm(clean.fused.mean), out / clean.fused.mean),
        ">= 2x the in-support mean",
    ));

    let grads = units::gradient_cases(cfg.gradient_trials, crate::seed::derive(root, "suite/gradient"));
    criteria.push(Check::new(
        8,
        "gradient correctness",
        grads.all(),
        format!("{}, worst relative error {:.1e}", tally(&grads), grads.worst),
        "every trial below 1e-4",
    ));

    let align = units::alignment_cases(cfg.unit_cases, crate::seed::derive(root, "suite/align"))?;
    let [m, sd, med] = units::three_four_example()?;
    let example_ok = (m - 3.5).abs() < 1e-9 && (sd - 0.7071).abs() < 1e-4 && (med - 3.5).abs() < 1e-9;
    criteria.push(Check::new(
        9,
        "alignment exactness",
        align.all() && example_ok,
        format!(
            "{} (worst residual {:.1e} m); {{3, 4}} cm -> mean {m:.4}, sd {sd:.4}, median {med:.4}",
            tally(&align),
            align.worst
        ),
        "all residuals < 1e-9 m; example 3.5 / 0.7071 / 3.5",
    ));

    let (c22, c28) = (speed_of_sound(22.0)?, speed_of_sound(28.0)?);
    criteria.push(Check::new(
        10,
        "speed-of-sound model",
        (c22 - 344.0).abs() <= 1.0 && (c28 - c22 - 3.6).abs() <= 0.1,
        format!("c(22) = {c22:.3} m/s, c(28) - c(22) = {:.3} m/s", c28 - c22),
        "c(22) within 1 m/s of 344; difference within 0.1 of 3.6",
    ));

    let best_single = clean.cov.mean.min(clean.cir.mean);
    let ablation = Check::new(
        "A",
        "fusion ablation",
        clean.fused.mean <= 1.1 * best_single,
        format!(
            "fused {} vs covariance {} and impulse response {}",
            cm(clean.fused.mean),
            cm(clean.cov.mean),
            cm(clean.cir.mean)
        ),
        "fused <= best single network + 10 %",
    );

    let entries = report_entries(&audio, &radio, cfg);
    Ok(SuiteResults {
        criteria,
        ablation,
        entries,
        audio,
        radio,
    })
}

fn report_entries(audio: &AudioOutcome, radio: &RadioOutcome, cfg: &SuiteConfig) -> Vec<ReportEntry> {
    let entry = |trajectory: &str, sensor: &str, e: &crate::eval::Evaluation| ReportEntry {
        trajectory: trajectory.into(),
        sensor: sensor.into(),
        stats: e.stats,
        drops: e.pairs.drops,
        overlay: Some(e.pairs.clone()),
    };
    let mut out = vec![
        entry("rectangle", "audio-wideband", &audio.wideband),
        entry("rectangle", "audio-chirp", &audio.chirp),
    ];
    let noisy_label = format!("radio-{}dB", cfg.radio.snr_db);
    for (scores, sensor) in [(&radio.clean, "radio"), (&radio.noisy, noisy_label.as_str())] {
        for (id, e) in &scores.per_trajectory {
            out.push(entry(&format!("grid-{id}"), sensor, e));
        }
    }
    for (sensor, stats) in [
        ("radio", radio.clean.fused),
        ("radio-cov", radio.clean.cov),
        ("radio-cir", radio.clean.cir),
        (noisy_label.as_str(), radio.noisy.fused),
    ] {
        out.push(ReportEntry {
            trajectory: "grid-test".into(),
            sensor: sensor.into(),
            stats,
            drops: 0,
            overlay: None,
        });
    }
    out.push(entry("circle", "radio", &radio.circle));
    out
}

fn criteria_csv(checks: &[Check]) -> String {
    let mut out = String::from("id,criterion,passed,measured,requirement\n");
    for c in checks {
        out.push_str(&format!(
            "{},{},{},\"{}\",\"{}\"\n",
            c.id,
            c.name,
            c.passed,
            c.measured.replace('"', "'"),
            c.requirement.replace('"', "'")
        ));
    }
    out
}

/// Writes the report files and the criteria table of one run.
pub fn write_suite(dir: &Path, results: &SuiteResults, extra: &[Check]) -> Result<Vec<PathBuf>> {
    let mut paths = write_report(dir, &results.entries)?;
    let mut checks = results.criteria.clone();
    checks.extend_from_slice(extra);
    checks.push(results.ablation.clone());
    let files = [
        (CRITERIA_CSV, criteria_csv(&checks)),
        (
            CRITERIA_TABLE,
            checks.iter().map(|c| c.line() + "\n").collect::<String>(),
        ),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Summary of a full suite run including the determinism check.
pub struct SuiteSummary {
    /// Criteria 1–11 in order.
    pub criteria: Vec<Check>,
    pub ablation: Check,
    pub files: Vec<PathBuf>,
    pub results: SuiteResults,
}

impl SuiteSummary {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

fn csv_files(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    Ok(names)
}

/// Runs the suite into `dir`, reruns it into `dir/rerun` and compares the
/// report CSVs byte for byte (criterion 11). With `check_determinism` off
/// the second run is skipped and criterion 11 is reported as not run.
pub fn repro_suite(cfg: &SuiteConfig, dir: &Path, check_determinism: bool) -> Result<SuiteSummary> {
    let first = run_suite(cfg)?;
    // criteria.csv is rewritten below once criterion 11 is known, so the
    // comparison covers the files written here
    let mut files = write_suite(dir, &first, &[])?;
    let determinism = if check_determinism {
        let rerun_dir = dir.join(RERUN_DIR);
        let second = run_suite(cfg)?;
        write_suite(&rerun_dir, &second, &[])?;
        let names = csv_files(dir)?;
        let mut differing = vec![];
        for name in &names {
            let a = std::fs::read(dir.join(name)).map_err(|e| Error::io(dir.join(name), e))?;
            let b = std::fs::read(rerun_dir.join(name)).map_err(|e| Error::io(rerun_dir.join(name), e))?;
            if a != b {
                differing.push(name.clone());
            }
        }
        Check::new(
            11,
            "determinism",
            differing.is_empty() && !names.is_empty(),
            if differing.is_empty() {
                format!("{} report CSVs byte-identical across two runs", names.len())
            } else {
                format!("differing: {}", differing.join(" "))
            },
            "byte-identical report CSVs for the same seed",
        )
    } else {
        Check::new(11, "determinism", false, "not run".into(), "byte-identical report CSVs for the same seed")
    };
    files = write_suite(dir, &first, std::slice::from_ref(&determinism))?
        .into_iter()
        .chain(files)
        .collect();
    files.sort();
    files.dedup();
    let mut criteria = first.criteria.clone();
    criteria.push(determinism);
    Ok(SuiteSummary {
        criteria,
        ablation: first.ablation.clone(),
        files,
        results: first,
    })
}
