use serde::{Deserialize, Serialize};

use super::gcc::GccConfig;
use super::multilat::{multilaterate_frame, RansacConfig};
use super::smoother::{smooth_trajectory, RawEstimate, SmootherConfig};
use super::sound_speed::speed_of_sound;
use super::tdoa::extract_tdoa_frames;
use crate::error::{Error, Result};
use crate::sim::MultichannelRecording;
use crate::types::{MicArray, Position, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioPipelineConfig {
    pub gcc: GccConfig,
    pub ransac: RansacConfig,
    #[serde(default)]
    pub smoother: SmootherConfig,
}

impl AudioPipelineConfig {
    pub fn for_rate(sample_rate: f64, seed: u64) -> Self {
        Self {
            gcc: GccConfig::for_rate(sample_rate),
            ransac: RansacConfig::for_rate(sample_rate, seed),
            smoother: SmootherConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameStatus {
    Localized,
    /// Refinement failed; the linear RANSAC hypothesis was used.
    LocalizedLinear,
    Unlocalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub t: f64,
    pub status: FrameStatus,
    pub measurements: usize,
    pub inliers: usize,
    pub residual_m: Option<f64>,
    pub raw: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Per-run report written next to the estimated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioRunReport {
    pub temperature: f64,
    pub speed_of_sound: f64,
    pub seed: u64,
    pub config: AudioPipelineConfig,
    pub total_frames: usize,
    pub localized_frames: usize,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone)]
pub struct AudioRun {
    pub trajectory: Trajectory,
    pub report: AudioRunReport,
}

/// Extracts TDOAs, localizes each frame with the previous fix as prior, and
/// smooths the fixes onto the frame grid.
pub fn localize_audio(
    rec: &MultichannelRecording,
    mics: &MicArray,
    temperature: f64,
    cfg: &AudioPipelineConfig,
) -> Result<AudioRun> {
    if rec.channel_count() != mics.len() {
        return Err(Error::shape(
            format!("{} channels", mics.len()),
            format!("{} channels", rec.channel_count()),
        ));
    }
    let c = speed_of_sound(temperature)?;
    let frames = extract_tdoa_frames(rec, mics, c, &cfg.gcc)?;
    if frames.is_empty() {
        return Err(Error::Pipeline(format!(
            "recording of {} samples is shorter than one {}-sample window",
            rec.len(),
            cfg.gcc.window
        )));
    }
    let mut prior: Option<Position> = None;
    let mut raw = Vec::with_capacity(frames.len());
    let mut records = Vec::with_capacity(frames.len());
    for frame in &frames {
        let outcome = multilaterate_frame(frame, mics, c, &cfg.ransac, prior);
        let (estimate, record) = match outcome {
            Ok(loc) => {
                prior = Some(loc.position);
                (
                    Some(loc.position),
                    FrameRecord {
                        t: frame.t,
                        status: if loc.fallback {
                            FrameStatus::LocalizedLinear
                        } else {
                            FrameStatus::Localized
                        },
                        measurements: frame.measurements.len(),
                        inliers: loc.inliers,
                        residual_m: Some(loc.residual),
                        raw: Some([loc.position.x, loc.position.y, loc.position.z]),
                        reason: None,
                    },
                )
            }
            Err(e) => (
                None,
                FrameRecord {
                    t: frame.t,
                    status: FrameStatus::Unlocalized,
                    measurements: frame.measurements.len(),
                    inliers: 0,
                    residual_m: None,
                    raw: None,
                    reason: Some(e.to_string()),
                },
            ),
        };
        raw.push(RawEstimate {
            t: frame.t,
            position: estimate,
            inliers: record.inliers,
        });
        records.push(record);
    }
    let trajectory = smooth_trajectory(&raw, &cfg.smoother)?;
    let localized = records
        .iter()
        .filter(|r| r.status != FrameStatus::Unlocalized)
        .count();
    Ok(AudioRun {
        trajectory: trajectory.with_rate_hint(rec.sample_rate / cfg.gcc.hop as f64),
        report: AudioRunReport {
            temperature,
            speed_of_sound: c,
            seed: cfg.ransac.seed,
            config: *cfg,
            total_frames: frames.len(),
            localized_frames: localized,
            frames: records,
        },
    })
}
