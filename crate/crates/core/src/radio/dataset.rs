use std::collections::BTreeSet;

use rayon::prelude::*;

use super::features::{extract_features, FeatureConfig, FeatureVector};
use crate::error::{Error, Result};
use crate::seed;
use crate::sim::{build_paths, synth_channel, Awgn, ChannelSnapshot, MultipathRegime};
use crate::types::{Position, SceneConfig, Trajectory};

/// Channel snapshots of one numbered trajectory with its ground truth.
#[derive(Debug, Clone)]
pub struct RadioRecording {
    pub id: u32,
    pub truth: Trajectory,
    pub snapshots: Vec<ChannelSnapshot>,
}

/// Snapshots along `truth` at `rate` Hz under `regime`.
pub fn simulate_snapshots(
    truth: &Trajectory,
    scene: &SceneConfig,
    regime: &MultipathRegime,
    rate: f64,
) -> Result<Vec<ChannelSnapshot>> {
    let grid = truth.resample(rate)?;
    for s in grid.samples() {
        if !scene.in_area(&s.position) {
            return Err(Error::Geometry(format!(
                "transmitter at t = {} leaves the measurement area",
                s.t
            )));
        }
    }
    grid.samples()
        .par_iter()
        .map(|p| synth_channel(p, scene, &build_paths(&p.position, scene, regime)))
        .collect()
}

/// Independent AWGN on every snapshot; snapshot `i` draws from the stream
/// labeled `radio-noise/{label}/{i}` so the result does not depend on
/// scheduling.
pub fn add_snapshot_noise(
    snapshots: &[ChannelSnapshot],
    snr_db: f64,
    root: u64,
    label: &str,
) -> Result<Vec<ChannelSnapshot>> {
    snapshots
        .par_iter()
        .enumerate()
        .map(|(i, s)| s.add_awgn(snr_db, seed::derive(root, &format!("radio-noise/{label}/{i}"))))
        .collect()
}

/// Features with ground-truth labels, in recording order.
#[derive(Debug, Clone, Default)]
pub struct LabeledSet {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<Position>,
    pub times: Vec<f64>,
    pub ids: Vec<u32>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Labels each snapshot with the ground truth interpolated at its time.
pub fn label_recording(rec: &RadioRecording, cfg: &FeatureConfig) -> Result<LabeledSet> {
    let features = extract_features(&rec.snapshots, cfg)?;
    let mut labels = Vec::with_capacity(features.len());
    for s in &rec.snapshots {
        labels.push(rec.truth.position_at(s.t).ok_or_else(|| {
            Error::Input(format!(
                "snapshot at t = {} lies outside the ground truth of trajectory {}",
                s.t, rec.id
            ))
        })?);
    }
    Ok(LabeledSet {
        times: rec.snapshots.iter().map(|s| s.t).collect(),
        ids: vec![rec.id; features.len()],
        features,
        labels,
    })
}

/// Concatenates the labeled sets of the recordings whose ids are in `ids`.
pub fn build_dataset(recordings: &[RadioRecording], ids: &BTreeSet<u32>, cfg: &FeatureConfig) -> Result<LabeledSet> {
    let mut out = LabeledSet::default();
    for rec in recordings.iter().filter(|r| ids.contains(&r.id)) {
        let part = label_recording(rec, cfg)?;
        out.features.extend(part.features);
        out.labels.extend(part.labels);
        out.times.extend(part.times);
        out.ids.extend(part.ids);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{gen_trajectory, Pattern};

    fn scene() -> SceneConfig {
        SceneConfig {
            antenna_count: 4,
            subcarrier_count: 16,
            ..SceneConfig::paper_scale()
        }
    }

    fn recording(id: u32) -> RadioRecording {
        let s = scene();
        let pat = Pattern::ManualWaypoints {
            points: vec![[1.0, 1.0], [1.0 + 0.1 * id as f64, 1.5]],
        };
        let truth = gen_trajectory(&pat, &s, 0.5, 100.0).unwrap();
        let snapshots = simulate_snapshots(&truth, &s, &MultipathRegime::facing_array(), 20.0).unwrap();
        RadioRecording { id, truth, snapshots }
    }

    #[test]
    fn labels_follow_the_ground_truth() {
        let rec = recording(1);
        let set = label_recording(&rec, &FeatureConfig { cir_taps: 4, covariance_window: 1 }).unwrap();
        assert_eq!(set.len(), rec.snapshots.len());
        assert_eq!(set.features[0].cov.len(), 16);
        assert_eq!(set.features[0].cir.len(), 16);
        for (t, l) in set.times.iter().zip(&set.labels) {
            assert!((rec.truth.position_at(*t).unwrap() - l).norm() < 1e-12);
        }
    }

    #[test]
    fn dataset_selects_by_id() {
        let recs = vec![recording(1), recording(2), recording(3)];
        let cfg = FeatureConfig { cir_taps: 4, covariance_window: 1 };
        let odd = build_dataset(&recs, &BTreeSet::from([1, 3]), &cfg).unwrap();
        assert!(odd.ids.iter().all(|id| *id != 2));
        assert_eq!(odd.len(), recs[0].snapshots.len() + recs[2].snapshots.len());
    }

    #[test]
    fn noise_is_deterministic_per_label() {
        let rec = recording(1);
        let a = add_snapshot_noise(&rec.snapshots, 10.0, 7, "x").unwrap();
        let b = add_snapshot_noise(&rec.snapshots, 10.0, 7, "x").unwrap();
        let c = add_snapshot_noise(&rec.snapshots, 10.0, 7, "y").unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
