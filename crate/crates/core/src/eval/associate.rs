use crate::error::{Error, Result};
use crate::types::{Position, Trajectory};

/// Estimates paired with ground truth at the estimate timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSamples {
    pub t: Vec<f64>,
    pub est: Vec<Position>,
    pub gt: Vec<Position>,
    /// Estimates dropped for lying too far outside the ground-truth span.
    pub drops: usize,
}

impl PairedSamples {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Pairs every estimate with the ground truth linearly interpolated at its
/// timestamp.
///
/// Estimates up to `max_dt` outside the ground-truth span are paired with
/// the nearest end sample; anything further out is dropped and counted.
pub fn associate(est: &Trajectory, gt: &Trajectory, max_dt: f64) -> Result<PairedSamples> {
    if !(max_dt >= 0.0 && max_dt.is_finite()) {
        return Err(Error::Config(format!("max_dt must be finite and >= 0, got {max_dt}")));
    }
    let (lo, hi) = (gt.start() - max_dt, gt.end() + max_dt);
    let mut out = PairedSamples {
        t: vec![],
        est: vec![],
        gt: vec![],
        drops: 0,
    };
    for s in est.samples() {
        if s.t < lo || s.t > hi {
            out.drops += 1;
            continue;
        }
        out.t.push(s.t);
        out.est.push(s.position);
        out.gt.push(gt.position_at_clamped(s.t));
    }
    if out.is_empty() {
        return Err(Error::Association(format!(
            "no estimate within {max_dt} s of the ground-truth span [{}, {}]; {} dropped",
            gt.start(),
            gt.end(),
            out.drops
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TimedPosition;

    fn traj(pts: &[(f64, f64)]) -> Trajectory {
        Trajectory::new(pts.iter().map(|(t, x)| TimedPosition::new(*t, *x, 0.0, 0.0)).collect()).unwrap()
    }

    #[test]
    fn identical_grids_pair_everything() {
        let a = traj(&[(0.0, 1.0), (0.01, 2.0), (0.02, 3.0)]);
        let p = associate(&a, &a, 0.0).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.drops, 0);
        assert_eq!(p.est, p.gt);
    }

    #[test]
    fn midpoint_is_interpolated() {
        let gt = traj(&[(0.0, 0.0), (0.01, 1.0)]);
        let est = traj(&[(0.005, 7.0)]);
        let p = associate(&est, &gt, 0.0).unwrap();
        assert!((p.gt[0].x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn far_estimates_are_dropped() {
        let gt = traj(&[(0.0, 0.0), (1.0, 1.0)]);
        let est = traj(&[(0.5, 0.0), (1.05, 0.0), (2.0, 0.0)]);
        let p = associate(&est, &gt, 0.1).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.drops, 1);
        // within the margin: held at the last ground-truth sample
        assert_eq!(p.gt[1].x, 1.0);
    }

    #[test]
    fn nothing_paired_is_an_error() {
        let gt = traj(&[(0.0, 0.0), (1.0, 1.0)]);
        let est = traj(&[(5.0, 0.0)]);
        assert!(matches!(associate(&est, &gt, 0.1), Err(Error::Association(_))));
        assert!(matches!(associate(&gt, &gt, -1.0), Err(Error::Config(_))));
    }
}
