//! Trajectory scoring: timestamp association, rigid alignment, error
//! statistics and report files.

mod align;
mod associate;
mod report;
mod stats;

pub use align::{align_rigid, AlignMode, AlignedPairSet, Transform};
pub use associate::{associate, PairedSamples};
pub use report::{
    format_sig2, overlay_svg, report_csv, report_table, write_report, ReportEntry, CSV_HEADER, REPORT_CSV,
    REPORT_TABLE,
};
pub use stats::{compute_error_stats, pair_errors, stats_of, ErrorStats, Projection};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::types::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// How far outside the ground-truth span an estimate may lie, seconds.
    pub max_dt: f64,
    pub mode: AlignMode,
    pub projection: Projection,
}

impl Default for EvalConfig {
    /// Absolute-frame scoring in the horizontal plane, as for the audio and
    /// radio localizers.
    fn default() -> Self {
        Self {
            max_dt: 0.05,
            mode: AlignMode::None,
            projection: Projection::TwoD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub pairs: AlignedPairSet,
    pub stats: ErrorStats,
}

/// Associates, aligns and summarizes one estimate against its ground truth.
pub fn evaluate(est: &Trajectory, gt: &Trajectory, cfg: &EvalConfig) -> Result<Evaluation> {
    let pairs = align_rigid(&associate(est, gt, cfg.max_dt)?, cfg.mode)?;
    let stats = compute_error_stats(&pairs, cfg.projection)?;
    Ok(Evaluation { pairs, stats })
}

/// [`evaluate`] over many (estimate, ground truth) pairs in parallel;
/// results keep the input order.
pub fn evaluate_all(jobs: &[(&Trajectory, &Trajectory)], cfg: &EvalConfig) -> Vec<Result<Evaluation>> {
    jobs.par_iter().map(|(e, g)| evaluate(e, g, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TimedPosition;

    #[test]
    fn absolute_frame_identity_scores_zero() {
        let gt = Trajectory::new((0..20).map(|i| TimedPosition::new(i as f64 * 0.01, i as f64, 1.0, 0.5)).collect())
            .unwrap();
        let r = evaluate(&gt, &gt, &EvalConfig::default()).unwrap();
        assert_eq!((r.stats.mean, r.stats.sd, r.stats.median), (0.0, 0.0, 0.0));
        assert_eq!(r.stats.count, 20);
    }

    #[test]
    fn batch_keeps_order() {
        let a = Trajectory::new(vec![TimedPosition::new(0.0, 0.0, 0.0, 0.0), TimedPosition::new(1.0, 0.0, 0.0, 0.0)])
            .unwrap();
        let b = Trajectory::new(vec![TimedPosition::new(0.0, 1.0, 0.0, 0.0), TimedPosition::new(1.0, 1.0, 0.0, 0.0)])
            .unwrap();
        let out = evaluate_all(&[(&a, &a), (&b, &a)], &EvalConfig::default());
        assert_eq!(out[0].as_ref().unwrap().stats.mean, 0.0);
        assert_eq!(out[1].as_ref().unwrap().stats.mean, 1.0);
    }
}
