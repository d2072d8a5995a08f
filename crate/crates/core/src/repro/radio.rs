//! Radio experiments on the synthetic grid scene: in-support accuracy,
//! robustness to AWGN on train and test, out-of-support behaviour and the
//! fusion ablation.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::{evaluate, pair_errors, stats_of, EvalConfig, Evaluation, ErrorStats};
use crate::radio::{
    add_snapshot_noise, build_dataset, build_split, localize_radio, simulate_snapshots, smoothed_nonincreasing,
    train_radio, FeatureConfig, Optimizer, RadioModel, RadioRecording, RadioTrainConfig, TrainHyper,
};
use crate::seed;
use crate::sim::{gen_trajectory, MultipathRegime, Pattern};
use crate::types::{SceneConfig, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioSuiteConfig {
    pub antenna_count: usize,
    /// Snapshots per second along each trajectory.
    pub snapshot_rate: f64,
    pub speed: f64,
    /// Number of interleaved grid trajectories, ids `1..=n`.
    pub trajectories: u32,
    /// Distance between neighbouring grid lines of consecutive ids, meters.
    pub line_step: f64,
    pub grid_margin: f64,
    pub regime: MultipathRegime,
    pub circle: Pattern,
    /// Regime of the out-of-support circle.
    pub circle_regime: MultipathRegime,
    pub snr_db: f64,
    pub train: RadioTrainConfig,
}

impl Default for RadioSuiteConfig {
    fn default() -> Self {
        let regime = MultipathRegime {
            wall_reflection: 0.05,
            body_reflection: 0.3,
            ..MultipathRegime::facing_array()
        };
        Self {
            antenna_count: 32,
            snapshot_rate: 20.0,
            speed: 0.5,
            trajectories: 6,
            line_step: 0.05,
            grid_margin: 0.1,
            regime,
            circle: Pattern::Circle {
                center: [2.1, 1.25],
                radius: 1.0,
                turns: 1.0,
            },
            circle_regime: MultipathRegime {
                los_gain: 1.0,
                body_bearing: Some(0.0),
                ..regime
            },
            snr_db: 10.0,
            train: RadioTrainConfig {
                features: FeatureConfig {
                    cir_taps: 1,
                    covariance_window: 1,
                },
                cov_hidden: vec![128; 8],
                cir_hidden: vec![128; 8],
                hyper: TrainHyper {
                    learning_rate: 1e-3,
                    epochs: 15,
                    lr_decay: 0.9,
                    optimizer: Optimizer::Adam,
                    ..TrainHyper::default()
                },
            },
        }
    }
}

impl RadioSuiteConfig {
    pub fn scene(&self, base: &SceneConfig) -> SceneConfig {
        SceneConfig {
            antenna_count: self.antenna_count,
            ..base.clone()
        }
    }

    /// Grid pattern of trajectory `id`: sweeps every `n · line_step` meters,
    /// shifted by `(id − 1) · line_step`.
    pub fn grid_pattern(&self, id: u32) -> Pattern {
        Pattern::Grid {
            margin: self.grid_margin,
            line_spacing: self.line_step * self.trajectories as f64,
            offset: self.grid_margin + (id - 1) as f64 * self.line_step,
        }
    }
}

/// Test-split scores of one trained model.
pub struct SplitScores {
    pub fused: ErrorStats,
    pub cov: ErrorStats,
    pub cir: ErrorStats,
    /// Fused evaluation per test trajectory, in id order.
    pub per_trajectory: Vec<(u32, Evaluation)>,
    pub cov_losses: Vec<f64>,
    pub cir_losses: Vec<f64>,
}

impl SplitScores {
    pub fn losses_monotone(&self) -> bool {
        smoothed_nonincreasing(&self.cov_losses, 10) && smoothed_nonincreasing(&self.cir_losses, 10)
    }
}

pub struct RadioOutcome {
    pub clean: SplitScores,
    pub noisy: SplitScores,
    pub circle_truth: Trajectory,
    pub circle: Evaluation,
}

fn train_and_score(recs: &[RadioRecording], cfg: &RadioSuiteConfig) -> Result<(RadioModel, SplitScores)> {
    let ids: Vec<u32> = recs.iter().map(|r| r.id).collect();
    let split = build_split(&ids)?;
    let set = build_dataset(recs, &split.train, &cfg.train.features)?;
    let training = train_radio(&set, &cfg.train)?;
    let eval_cfg = EvalConfig::default();
    let mut errors = [vec![], vec![], vec![]];
    let mut per_trajectory = vec![];
    for rec in recs.iter().filter(|r| split.test.contains(&r.id)) {
        let est = localize_radio(&training.model, &rec.snapshots, &cfg.train.features)?;
        for (k, traj) in [&est.fused, &est.cov, &est.cir].into_iter().enumerate() {
            let e = evaluate(traj, &rec.truth, &eval_cfg)?;
            errors[k].extend(pair_errors(&e.pairs, eval_cfg.projection));
            if k == 0 {
                per_trajectory.push((rec.id, e));
            }
        }
    }
    let p = eval_cfg.projection;
    Ok((
        training.model,
        SplitScores {
            fused: stats_of(&errors[0], p)?,
            cov: stats_of(&errors[1], p)?,
            cir: stats_of(&errors[2], p)?,
            per_trajectory,
            cov_losses: training.cov_losses,
            cir_losses: training.cir_losses,
        },
    ))
}

/// Simulates the grid campaign, trains on clean and on noisy snapshots and
/// scores the clean model on the out-of-support circle.
pub fn run_radio(base: &SceneConfig, cfg: &RadioSuiteConfig, root: u64) -> Result<RadioOutcome> {
    let scene = cfg.scene(base);
    let mut recs = Vec::with_capacity(cfg.trajectories as usize);
    for id in 1..=cfg.trajectories {
        let truth = gen_trajectory(&cfg.grid_pattern(id), &scene, cfg.speed, 100.0)?;
        let snapshots = simulate_snapshots(&truth, &scene, &cfg.regime, cfg.snapshot_rate)?;
        recs.push(RadioRecording { id, truth, snapshots });
    }
    let train_cfg = RadioSuiteConfig {
        train: RadioTrainConfig {
            hyper: TrainHyper {
                seed: seed::derive(root, "radio/train"),
                ..cfg.train.hyper.clone()
            },
            ..cfg.train.clone()
        },
        ..cfg.clone()
    };
    let (model, clean) = train_and_score(&recs, &train_cfg)?;

    let noise_root = seed::derive(root, "radio/noise");
    let noisy_recs = recs
        .iter()
        .map(|r| {
            Ok(RadioRecording {
                id: r.id,
                truth: r.truth.clone(),
                snapshots: add_snapshot_noise(&r.snapshots, cfg.snr_db, noise_root, &format!("grid/{}", r.id))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (_, noisy) = train_and_score(&noisy_recs, &train_cfg)?;

    let circle_truth = gen_trajectory(&cfg.circle, &scene, cfg.speed, 100.0)?;
    let snaps = simulate_snapshots(&circle_truth, &scene, &cfg.circle_regime, cfg.snapshot_rate)?;
    let est = localize_radio(&model, &snaps, &cfg.train.features)?;
    let circle = evaluate(&est.fused, &circle_truth, &EvalConfig::default())?;
    Ok(RadioOutcome {
        clean,
        noisy,
        circle_truth,
        circle,
    })
}
