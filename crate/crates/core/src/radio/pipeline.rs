//! Training and inference of the fused covariance/CIR networks, and their
//! on-disk artifacts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::LabeledSet;
use super::features::{extract_features, FeatureConfig, FeatureVector};
use super::mlp::{train_fcnn, MlpModel, TrainHyper};
use super::model_io::{read_mlpm, write_mlpm};
use crate::error::{Error, Result};
use crate::seed;
use crate::sim::ChannelSnapshot;
use crate::types::{Position, TimedPosition, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioTrainConfig {
    pub features: FeatureConfig,
    pub cov_hidden: Vec<usize>,
    pub cir_hidden: Vec<usize>,
    pub hyper: TrainHyper,
}

impl Default for RadioTrainConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            cov_hidden: vec![512; 8],
            cir_hidden: vec![256; 8],
            hyper: TrainHyper::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioModel {
    pub cov: MlpModel,
    pub cir: MlpModel,
}

fn to_position(v: &[f64]) -> Result<Position> {
    if v.len() != 3 {
        return Err(Error::shape(3, v.len()));
    }
    Ok(Position::new(v[0], v[1], v[2]))
}

/// Average of the two network outputs.
pub fn predict_fused(cov: &MlpModel, cir: &MlpModel, fv: &FeatureVector) -> Result<Position> {
    let a = to_position(&cov.predict(&fv.cov)?)?;
    let b = to_position(&cir.predict(&fv.cir)?)?;
    Ok((a + b) / 2.0)
}

pub struct RadioTraining {
    pub model: RadioModel,
    pub cov_losses: Vec<f64>,
    pub cir_losses: Vec<f64>,
    /// SHA-256 over the training features and labels.
    pub fingerprint: String,
}

pub fn fingerprint(set: &LabeledSet) -> String {
    let mut h = Sha256::new();
    for (fv, l) in set.features.iter().zip(&set.labels) {
        for v in fv.cov.iter().chain(&fv.cir).chain(l.iter()) {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Trains both networks on `set`; they run concurrently and draw from
/// separate seed streams.
pub fn train_radio(set: &LabeledSet, cfg: &RadioTrainConfig) -> Result<RadioTraining> {
    if set.is_empty() {
        return Err(Error::Input("empty training set".into()));
    }
    let labels: Vec<Vec<f64>> = set.labels.iter().map(|p| p.iter().copied().collect()).collect();
    let cov_x: Vec<Vec<f64>> = set.features.iter().map(|f| f.cov.clone()).collect();
    let cir_x: Vec<Vec<f64>> = set.features.iter().map(|f| f.cir.clone()).collect();
    let hyper_for = |label: &str| TrainHyper {
        seed: seed::derive(cfg.hyper.seed, label),
        ..cfg.hyper.clone()
    };
    let (cov, cir) = rayon::join(
        || train_fcnn(&cov_x, &labels, &cfg.cov_hidden, &hyper_for("fcnn/cov")),
        || train_fcnn(&cir_x, &labels, &cfg.cir_hidden, &hyper_for("fcnn/cir")),
    );
    let (cov, cir) = (cov?, cir?);
    Ok(RadioTraining {
        model: RadioModel {
            cov: cov.model,
            cir: cir.model,
        },
        cov_losses: cov.losses,
        cir_losses: cir.losses,
        fingerprint: fingerprint(set),
    })
}

/// Fused and single-network trajectories for one snapshot sequence.
#[derive(Debug, Clone)]
pub struct RadioEstimates {
    pub fused: Trajectory,
    pub cov: Trajectory,
    pub cir: Trajectory,
}

pub fn localize_radio(model: &RadioModel, snapshots: &[ChannelSnapshot], cfg: &FeatureConfig) -> Result<RadioEstimates> {
    if snapshots.is_empty() {
        return Err(Error::Input("no snapshots to localize".into()));
    }
    let features = extract_features(snapshots, cfg)?;
    let cov_x: Vec<Vec<f64>> = features.iter().map(|f| f.cov.clone()).collect();
    let cir_x: Vec<Vec<f64>> = features.iter().map(|f| f.cir.clone()).collect();
    let a = model.cov.predict_batch(&cov_x)?;
    let b = model.cir.predict_batch(&cir_x)?;
    let build = |f: &dyn Fn(usize) -> Result<Position>| -> Result<Trajectory> {
        let samples = snapshots
            .iter()
            .enumerate()
            .map(|(i, s)| Ok(TimedPosition { t: s.t, position: f(i)? }))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(samples)
    };
    Ok(RadioEstimates {
        fused: build(&|i| Ok((to_position(&a[i])? + to_position(&b[i])?) / 2.0))?,
        cov: build(&|i| to_position(&a[i]))?,
        cir: build(&|i| to_position(&b[i]))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub config: RadioTrainConfig,
    pub cov_input: usize,
    pub cir_input: usize,
    pub samples: usize,
    pub train_ids: Vec<u32>,
    pub data_fingerprint: String,
    pub final_cov_loss: f64,
    pub final_cir_loss: f64,
}

pub const COV_MODEL_FILE: &str = "fcnn_cov.mlpm";
pub const CIR_MODEL_FILE: &str = "fcnn_cir.mlpm";
pub const LOSS_FILE: &str = "loss.csv";
pub const METADATA_FILE: &str = "training.json";

/// Writes both models, the loss curve and the metadata record into `dir`.
pub fn write_training(dir: &Path, training: &RadioTraining, set: &LabeledSet, cfg: &RadioTrainConfig) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths: Vec<PathBuf> = [COV_MODEL_FILE, CIR_MODEL_FILE, LOSS_FILE, METADATA_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    write_mlpm(&paths[0], &training.model.cov)?;
    write_mlpm(&paths[1], &training.model.cir)?;
    let mut csv = String::from("epoch,cov_loss,cir_loss\n");
    for (e, (a, b)) in training.cov_losses.iter().zip(&training.cir_losses).enumerate() {
        csv.push_str(&format!("{e},{a},{b}\n"));
    }
    std::fs::write(&paths[2], csv).map_err(|e| Error::io(&paths[2], e))?;
    let mut train_ids: Vec<u32> = set.ids.clone();
    train_ids.dedup();
    let meta = TrainingMetadata {
        config: cfg.clone(),
        cov_input: training.model.cov.input_dim(),
        cir_input: training.model.cir.input_dim(),
        samples: set.len(),
        train_ids,
        data_fingerprint: training.fingerprint.clone(),
        final_cov_loss: training.cov_losses.last().copied().unwrap_or(f64::NAN),
        final_cir_loss: training.cir_losses.last().copied().unwrap_or(f64::NAN),
    };
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    std::fs::write(&paths[3], json).map_err(|e| Error::io(&paths[3], e))?;
    Ok(paths)
}

/// Reads a directory written by [`write_training`].
pub fn read_training(dir: &Path) -> Result<(RadioModel, TrainingMetadata)> {
    let meta_path = dir.join(METADATA_FILE);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: TrainingMetadata = serde_json::from_str(&text).map_err(|e| Error::format(&meta_path, e))?;
    let model = RadioModel {
        cov: read_mlpm(&dir.join(COV_MODEL_FILE))?,
        cir: read_mlpm(&dir.join(CIR_MODEL_FILE))?,
    };
    Ok((model, meta))
}
