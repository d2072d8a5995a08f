//! One function per subcommand. Each returns the files it wrote so the
//! caller can record them in the manifest.
//!
//! File layout of a campaign directory:
//!
//! * `mics.csv`, `gt_<id>.csv`
//! * `audio_<id><variant>/mic00.wav ...`
//! * `radio_<id><variant>.csnp` with timestamps in `radio_<id><variant>_t.csv`
//! * `est_<sensor>_<id><variant>.csv`, sensors `audio`, `radio`,
//!   `radio-cov`, `radio-cir`
//! * `model<variant>/` from `train-radio`
//!
//! `<variant>` is empty for clean data and `_snr<S>` for data with noise at
//! `S` dB.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use multiloc::audio::localize_audio;
use multiloc::eval::{evaluate_all, report_table, ErrorStats, Projection, ReportEntry, REPORT_CSV, REPORT_TABLE};
use multiloc::radio::{
    add_snapshot_noise, build_dataset, build_split, localize_radio, read_training, simulate_snapshots, train_radio,
    write_training, RadioRecording, RadioTrainConfig, TrainHyper,
};
use multiloc::repro::{repro_suite, SuiteConfig};
use multiloc::seed;
use multiloc::sim::io::{read_snapshots, read_wav_set, wav_path, write_csnp, write_timestamps, write_wav_set};
use multiloc::sim::{gen_chirp, gen_trajectory, gen_wideband, synth_audio, AudioSynthOptions, Echoes, Interferer, SourceSignal};
use multiloc::{MicArray, Position, Trajectory};
use rayon::prelude::*;

use crate::config::{snr_suffix, ExperimentConfig, SourceKind};
use crate::error::{CliError, Stage};

/// Passband of the simulated wideband source and interferer, Hz.
const SOURCE_BAND: [f64; 2] = [100.0, 8000.0];
/// Sample rate of the generated ground truth, Hz.
const TRUTH_RATE: f64 = 100.0;
pub const MICS_FILE: &str = "mics.csv";

pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub out: &'a Path,
}

impl Ctx<'_> {
    fn input(&self) -> PathBuf {
        self.cfg.input_dir(self.out)
    }

    fn mics(&self) -> Result<MicArray, CliError> {
        let path = self.input().join(MICS_FILE);
        if path.is_file() {
            MicArray::read_csv(&path).stage("read-mics")
        } else {
            Ok(self.cfg.scene.mic_array.clone())
        }
    }

    fn truth(&self, id: u32) -> Result<Trajectory, CliError> {
        Trajectory::read_csv(self.input().join(gt_name(id))).stage("read-ground-truth")
    }

    fn model_dir(&self, variant: &str) -> PathBuf {
        self.cfg
            .model_dir
            .clone()
            .unwrap_or_else(|| self.input().join(format!("model{variant}")))
    }

    fn ids(&self) -> Vec<u32> {
        self.cfg.trajectories.iter().map(|t| t.id).collect()
    }
}

pub fn gt_name(id: u32) -> String {
    format!("gt_{id}.csv")
}

pub fn audio_dir_name(id: u32, variant: &str) -> String {
    format!("audio_{id}{variant}")
}

pub fn csnp_name(id: u32, variant: &str) -> String {
    format!("radio_{id}{variant}.csnp")
}

pub fn timestamps_name(id: u32, variant: &str) -> String {
    format!("radio_{id}{variant}_t.csv")
}

pub fn est_name(sensor: &str, id: u32, variant: &str) -> String {
    format!("est_{sensor}_{id}{variant}.csv")
}

fn flatten(groups: Vec<Vec<PathBuf>>) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = groups.into_iter().flatten().collect();
    files.sort();
    files
}

/// Ground truth, recordings and channel snapshots for every trajectory:
/// the clean variant plus one per configured SNR.
pub fn simulate(ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    let cfg = ctx.cfg;
    let out = ctx.out;
    let scene = &cfg.scene;
    let mics_path = out.join(MICS_FILE);
    scene.mic_array.write_csv(&mics_path).stage("simulate")?;
    let c = multiloc::audio::speed_of_sound(scene.temperature).stage("simulate")?;
    let mut variants = vec![(String::new(), None)];
    variants.extend(cfg.snr_db.iter().map(|s| (snr_suffix(*s), Some(*s))));

    let groups = cfg
        .trajectories
        .par_iter()
        .map(|spec| -> Result<Vec<PathBuf>, CliError> {
            let id = spec.id;
            let mut files = vec![];
            let truth = gen_trajectory(&spec.pattern, scene, spec.speed, TRUTH_RATE).stage("trajectory")?;
            let gt_path = out.join(gt_name(id));
            truth.write_csv(&gt_path).stage("simulate")?;
            files.push(gt_path);

            if cfg.simulate.audio {
                let fs = scene.audio_sample_rate;
                let duration = truth.duration();
                let source: SourceSignal = match cfg.source {
                    SourceKind::Wideband => {
                        gen_wideband(duration, fs, SOURCE_BAND, seed::derive(cfg.seed, &format!("sim/source/{id}")))
                    }
                    SourceKind::Chirp => gen_chirp(duration, fs),
                }
                .stage("audio-source")?;
                let interferer = match &cfg.simulate.interferer {
                    Some(spec) => Some(Interferer {
                        position: Position::from(spec.position),
                        signal: gen_wideband(
                            duration,
                            fs,
                            SOURCE_BAND,
                            seed::derive(cfg.seed, &format!("sim/interferer/{id}")),
                        )
                        .stage("audio-source")?
                        .scaled(spec.gain),
                    }),
                    None => None,
                };
                for (variant, snr) in &variants {
                    let opts = AudioSynthOptions {
                        interferer: interferer.clone(),
                        echoes: cfg.simulate.echo_reflection.map(|reflection| Echoes {
                            room: scene.room(),
                            reflection,
                        }),
                        bounds: Some(scene.room()),
                        snr_db: *snr,
                        seed: seed::derive(cfg.seed, &format!("sim/audio/{id}{variant}")),
                    };
                    let rec = synth_audio(&truth, &source, &scene.mic_array, c, &opts).stage("audio-synthesis")?;
                    let dir = out.join(audio_dir_name(id, variant));
                    write_wav_set(&rec, &dir).stage("audio-synthesis")?;
                    files.extend((0..rec.channel_count()).map(|i| wav_path(&dir, i)));
                }
            }

            if cfg.simulate.radio {
                let clean = simulate_snapshots(&truth, scene, &cfg.radio.regime, cfg.radio.snapshot_rate)
                    .stage("channel-synthesis")?;
                let noise_root = seed::derive(cfg.seed, "sim/radio-noise");
                for (variant, snr) in &variants {
                    let snaps = match snr {
                        Some(s) => add_snapshot_noise(&clean, *s, noise_root, &format!("traj/{id}"))
                            .stage("channel-synthesis")?,
                        None => clean.clone(),
                    };
                    let csnp = out.join(csnp_name(id, variant));
                    let ts = out.join(timestamps_name(id, variant));
                    write_csnp(&csnp, &snaps).stage("channel-synthesis")?;
                    write_timestamps(&ts, &snaps).stage("channel-synthesis")?;
                    files.extend([csnp, ts]);
                }
            }
            Ok(files)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut files = flatten(groups);
    files.push(mics_path);
    Ok(files)
}

/// Localizes every recording and writes the trajectory plus a per-frame
/// JSON report.
pub fn localize_audio_cmd(ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    let cfg = ctx.cfg;
    let mics = ctx.mics()?;
    let pipeline = cfg.audio_config();
    let input = ctx.input();
    let jobs: Vec<(u32, String)> = ctx
        .ids()
        .into_iter()
        .flat_map(|id| cfg.variants().into_iter().map(move |v| (id, v)))
        .collect();
    let groups = jobs
        .par_iter()
        .map(|(id, variant)| -> Result<Vec<PathBuf>, CliError> {
            let rec = read_wav_set(&input.join(audio_dir_name(*id, variant)), mics.len()).stage("read-audio")?;
            let run = localize_audio(&rec, &mics, cfg.scene.temperature, &pipeline).stage("localize-audio")?;
            let est = ctx.out.join(est_name("audio", *id, variant));
            run.trajectory.write_csv(&est).stage("localize-audio")?;
            let report = ctx.out.join(format!("audio_report_{id}{variant}.json"));
            let json = serde_json::to_string_pretty(&run.report).expect("report serializes");
            std::fs::write(&report, json + "\n").stage("localize-audio")?;
            Ok(vec![est, report])
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(flatten(groups))
}

fn load_recordings(ctx: &Ctx, variant: &str) -> Result<Vec<RadioRecording>, CliError> {
    let input = ctx.input();
    ctx.ids()
        .into_iter()
        .map(|id| {
            let snapshots = read_snapshots(
                &input.join(csnp_name(id, variant)),
                &input.join(timestamps_name(id, variant)),
            )
            .stage("read-channel")?;
            Ok(RadioRecording {
                id,
                truth: ctx.truth(id)?,
                snapshots,
            })
        })
        .collect()
}

fn seeded_train_config(cfg: &ExperimentConfig) -> RadioTrainConfig {
    RadioTrainConfig {
        hyper: TrainHyper {
            seed: seed::derive(cfg.seed, "radio/train"),
            ..cfg.radio.train.hyper.clone()
        },
        ..cfg.radio.train.clone()
    }
}

/// Trains on the odd/even split of the configured trajectories, once per
/// data variant.
pub fn train_radio_cmd(ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    let cfg = ctx.cfg;
    let train_cfg = seeded_train_config(cfg);
    let mut files = vec![];
    for variant in cfg.variants() {
        let recs = load_recordings(ctx, &variant)?;
        let split = build_split(&ctx.ids()).stage("split")?;
        for w in &split.warnings {
            eprintln!("warning: {w}");
        }
        let set = build_dataset(&recs, &split.train, &train_cfg.features).stage("features")?;
        let training = train_radio(&set, &train_cfg).stage("train-radio")?;
        let dir = if cfg.model_dir.is_some() {
            ctx.model_dir(&variant)
        } else {
            ctx.out.join(format!("model{variant}"))
        };
        files.extend(write_training(&dir, &training, &set, &train_cfg).stage("train-radio")?);
    }
    files.sort();
    Ok(files)
}

/// Runs the trained model on every trajectory of each data variant.
pub fn localize_radio_cmd(ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    let cfg = ctx.cfg;
    let mut files = vec![];
    for variant in cfg.variants() {
        let (model, meta) = read_training(&ctx.model_dir(&variant)).stage("read-model")?;
        let recs = load_recordings(ctx, &variant)?;
        let groups = recs
            .par_iter()
            .map(|rec| -> Result<Vec<PathBuf>, CliError> {
                let est = localize_radio(&model, &rec.snapshots, &meta.config.features).stage("localize-radio")?;
                let mut written = vec![];
                for (sensor, traj) in [("radio", &est.fused), ("radio-cov", &est.cov), ("radio-cir", &est.cir)] {
                    let path = ctx.out.join(est_name(sensor, rec.id, &variant));
                    traj.write_csv(&path).stage("localize-radio")?;
                    written.push(path);
                }
                Ok(written)
            })
            .collect::<Result<Vec<_>, _>>()?;
        files.extend(flatten(groups));
    }
    Ok(files)
}

/// One report row to compute: labels plus the two trajectory files.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub trajectory: String,
    pub sensor: String,
    pub est: PathBuf,
    pub gt: PathBuf,
}

/// Splits `est_<sensor>_<id><variant>.csv` into sensor, trajectory label
/// and numeric id.
pub fn parse_est_name(name: &str) -> Option<(String, String, u32)> {
    let stem = name.strip_prefix("est_")?.strip_suffix(".csv")?;
    let (sensor, label) = stem.split_once('_')?;
    let id_part = label.split_once("_snr").map_or(label, |(id, _)| id);
    let id = id_part.parse().ok()?;
    Some((sensor.to_string(), label.to_string(), id))
}

/// Estimate files in `dir` with a matching `gt_<id>.csv`, in name order.
pub fn discover_jobs(dir: &Path) -> Result<Vec<Job>, CliError> {
    let names: BTreeSet<String> = std::fs::read_dir(dir)
        .stage("discover")?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    Ok(names
        .iter()
        .filter_map(|n| parse_est_name(n).map(|p| (n, p)))
        .filter(|(_, (_, _, id))| names.contains(&gt_name(*id)))
        .map(|(n, (sensor, trajectory, id))| Job {
            trajectory,
            sensor,
            est: dir.join(n),
            gt: dir.join(gt_name(id)),
        })
        .collect())
}

/// Scores explicit jobs, or every discovered estimate, and writes the report.
pub fn evaluate_cmd(ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    let cfg = ctx.cfg;
    let input = ctx.input();
    let jobs: Vec<Job> = if cfg.jobs.is_empty() {
        discover_jobs(&input)?
    } else {
        cfg.jobs
            .iter()
            .map(|j| Job {
                trajectory: j.trajectory.clone(),
                sensor: j.sensor.clone(),
                est: input.join(&j.est),
                gt: input.join(&j.gt),
            })
            .collect()
    };
    if jobs.is_empty() {
        return Err(CliError::runtime(
            "evaluate",
            format!("no estimate files with ground truth in {}", input.display()),
        ));
    }
    let trajectories = jobs
        .iter()
        .map(|j| {
            let est = Trajectory::read_csv(&j.est).stage("read-trajectory")?;
            let gt = Trajectory::read_csv(&j.gt).stage("read-trajectory")?;
            Ok((est, gt))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let refs: Vec<(&Trajectory, &Trajectory)> = trajectories.iter().map(|(e, g)| (e, g)).collect();
    let mut entries = vec![];
    for (job, result) in jobs.iter().zip(evaluate_all(&refs, &cfg.eval)) {
        let ev = result.map_err(|e| CliError::runtime("evaluate", format!("{}: {e}", job.est.display())))?;
        entries.push(ReportEntry {
            trajectory: job.trajectory.clone(),
            sensor: job.sensor.clone(),
            stats: ev.stats,
            drops: ev.pairs.drops,
            overlay: Some(ev.pairs),
        });
    }
    let files = multiloc::eval::write_report(ctx.out, &entries).stage("report")?;
    print!("{}", report_table(&entries).stage("report")?);
    Ok(files)
}

/// Parses a `report.csv` back into entries (without overlays).
pub fn parse_report_csv(text: &str, projection: Projection) -> Result<Vec<ReportEntry>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == multiloc::eval::CSV_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(format!("row {}: expected 7 fields, got {}", i + 1, f.len()));
            }
            let num = |k: usize| -> Result<f64, String> {
                f[k].trim().parse().map_err(|_| format!("row {}: bad number {:?}", i + 1, f[k]))
            };
            let int = |k: usize| -> Result<usize, String> {
                f[k].trim().parse().map_err(|_| format!("row {}: bad count {:?}", i + 1, f[k]))
            };
            Ok(ReportEntry {
                trajectory: f[0].to_string(),
                sensor: f[1].to_string(),
                stats: ErrorStats {
                    mean: num(2)? / 100.0,
                    sd: num(3)? / 100.0,
                    median: num(4)? / 100.0,
                    count: int(5)?,
                    projection,
                },
                drops: int(6)?,
                overlay: None,
            })
        })
        .collect()
}

/// Re-renders the table from an existing `report.csv`.
pub fn report_cmd(ctx: &Ctx) -> Result<Vec<PathBuf>, CliError> {
    let src = ctx.input().join(REPORT_CSV);
    let text = std::fs::read_to_string(&src).stage("read-report")?;
    let entries = parse_report_csv(&text, ctx.cfg.eval.projection)
        .map_err(|e| CliError::runtime("read-report", format!("{}: {e}", src.display())))?;
    let table = report_table(&entries).stage("report")?;
    let path = ctx.out.join(REPORT_TABLE);
    std::fs::write(&path, &table).stage("report")?;
    print!("{table}");
    Ok(vec![path])
}

/// Runs the acceptance suite; fails unless every criterion passes.
pub fn repro_suite_cmd(ctx: &Ctx, check_determinism: bool) -> Result<Vec<PathBuf>, CliError> {
    let suite = SuiteConfig {
        seed: ctx.cfg.seed,
        ..ctx.cfg.suite.clone()
    };
    let summary = repro_suite(&suite, ctx.out, check_determinism).stage("repro-suite")?;
    for c in &summary.criteria {
        println!("{}", c.line());
    }
    println!("{}", summary.ablation.line());
    if !summary.all_passed() {
        let failed: Vec<String> = summary
            .criteria
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.id.to_string())
            .collect();
        return Err(CliError::runtime(
            "repro-suite",
            format!("criteria failed: {}", failed.join(", ")),
        ));
    }
    Ok(summary.files)
}
