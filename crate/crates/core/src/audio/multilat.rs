//! Robust TDOA multilateration with known microphone positions.
//!
//! Hypotheses come from a linear solver on minimal subsets of reference
//! pairs `(0, j)`: with `R0 = ‖p − m0‖` treated as an extra unknown, the
//! range difference `r_j = c τ_0j` gives the linear equation
//!
//! ```text
//! 2 (m_j − m_0)ᵀ (p − m_0) + 2 r_j R0 = ‖m_j − m_0‖² − r_j²
//! ```
//!
//! RANSAC scores each hypothesis on all retained pairs; the best consensus
//! set is refined by Levenberg–Marquardt on the range-difference residuals.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::tdoa::{TdoaFrame, TdoaMeasurement};
use crate::error::{Error, Result};
use crate::seed;
use crate::types::{MicArray, Position};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Largest TDOA residual, in seconds, counted as an inlier.
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    pub seed: u64,
    /// Fixes the source height and solves in the plane.
    #[serde(default)]
    pub planar_height: Option<f64>,
}

impl RansacConfig {
    /// 500 iterations, 3-sample inlier threshold, consensus of at least 4.
    pub fn for_rate(sample_rate: f64, seed: u64) -> Self {
        Self {
            iterations: 500,
            inlier_threshold: 3.0 / sample_rate,
            min_inliers: 4,
            seed,
            planar_height: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::Config("RANSAC needs at least one iteration".into()));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::Config("inlier_threshold must be > 0".into()));
        }
        Ok(())
    }

    fn minimal(&self) -> usize {
        if self.planar_height.is_some() {
            3
        } else {
            4
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Localization {
    pub position: Position,
    pub inliers: usize,
    /// RMS range-difference residual over the consensus set, meters.
    pub residual: f64,
    /// Refinement failed and the linear hypothesis was kept.
    pub fallback: bool,
}

/// RMS of `‖p − m_j‖ − ‖p − m_i‖ − c τ_ij` over `measurements`.
pub fn range_residual(p: &Position, measurements: &[TdoaMeasurement], mics: &MicArray, c: f64) -> f64 {
    if measurements.is_empty() {
        return 0.0;
    }
    let m = mics.positions();
    let ss: f64 = measurements
        .iter()
        .map(|x| {
            let r = (p - m[x.j]).norm() - (p - m[x.i]).norm() - c * x.delay;
            r * r
        })
        .sum();
    (ss / measurements.len() as f64).sqrt()
}

fn tdoa_error(p: &Position, x: &TdoaMeasurement, mics: &[Position], c: f64) -> f64 {
    (((p - mics[x.j]).norm() - (p - mics[x.i]).norm()) / c - x.delay).abs()
}

/// Least-squares solution of the linearized reference-pair system.
fn linear_hypothesis(
    subset: &[&TdoaMeasurement],
    mics: &[Position],
    c: f64,
    planar: Option<f64>,
) -> Option<Position> {
    let m0 = mics[0];
    let cols = if planar.is_some() { 3 } else { 4 };
    let mut a = DMatrix::zeros(subset.len(), cols);
    let mut b = DVector::zeros(subset.len());
    for (row, x) in subset.iter().enumerate() {
        let d = mics[x.j] - m0;
        let r = c * x.delay;
        let mut rhs = d.norm_squared() - r * r;
        match planar {
            Some(h) => {
                a[(row, 0)] = 2.0 * d.x;
                a[(row, 1)] = 2.0 * d.y;
                rhs -= 2.0 * d.z * (h - m0.z);
            }
            None => {
                a[(row, 0)] = 2.0 * d.x;
                a[(row, 1)] = 2.0 * d.y;
                a[(row, 2)] = 2.0 * d.z;
            }
        }
        a[(row, cols - 1)] = 2.0 * r;
        b[row] = rhs;
    }
    let sol = a.svd(true, true).solve(&b, 1e-10).ok()?;
    let p = match planar {
        Some(h) => Position::new(sol[0] + m0.x, sol[1] + m0.y, h),
        None => Position::new(sol[0], sol[1], sol[2]) + m0,
    };
    p.iter().all(|v| v.is_finite()).then_some(p)
}

/// Levenberg–Marquardt on range-difference residuals. Returns `None` when
/// the iteration produces non-finite values.
fn refine(
    start: Position,
    set: &[TdoaMeasurement],
    mics: &[Position],
    c: f64,
    planar: Option<f64>,
) -> Option<Position> {
    let cost = |p: &Position| -> f64 {
        set.iter()
            .map(|x| {
                let r = (p - mics[x.j]).norm() - (p - mics[x.i]).norm() - c * x.delay;
                r * r
            })
            .sum()
    };
    let mut p = start;
    let mut f = cost(&p);
    let mut lambda = 1e-3;
    for _ in 0..100 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for x in set {
            let (vi, vj) = (p - mics[x.i], p - mics[x.j]);
            let (di, dj) = (vi.norm(), vj.norm());
            if di < 1e-12 || dj < 1e-12 {
                continue;
            }
            let r = dj - di - c * x.delay;
            let mut g = vj / dj - vi / di;
            if planar.is_some() {
                g.z = 0.0;
            }
            jtj += g * g.transpose();
            jtr += g * r;
        }
        if planar.is_some() {
            jtj[(2, 2)] = 1.0;
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let cand = p + step;
            let fc = cost(&cand);
            if !fc.is_finite() {
                return None;
            }
            if fc <= f {
                let done = step.norm() < 1e-13 || (f - fc) <= 1e-30;
                p = cand;
                f = fc;
                lambda = (lambda * 0.3).max(1e-12);
                improved = !done;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    p.iter().all(|v| v.is_finite()).then_some(p)
}

/// Localizes one frame.
///
/// `prior`, when given, is tried as an extra refinement seed and breaks
/// ties between hypotheses with equal consensus (closest wins).
pub fn multilaterate_frame(
    frame: &TdoaFrame,
    mics: &MicArray,
    c: f64,
    cfg: &RansacConfig,
    prior: Option<Position>,
) -> Result<Localization> {
    cfg.validate()?;
    let m = mics.positions();
    let refs: Vec<&TdoaMeasurement> = frame.reference_pairs().collect();
    let k = cfg.minimal();
    if refs.len() < k {
        return Err(Error::Pipeline(format!(
            "{} reference measurements, need {k}",
            refs.len()
        )));
    }
    let all = &frame.measurements;
    let inliers_of = |p: &Position| -> Vec<TdoaMeasurement> {
        all.iter()
            .filter(|x| tdoa_error(p, x, m, c) <= cfg.inlier_threshold)
            .copied()
            .collect()
    };
    let mut rng = seed::rng(cfg.seed, &format!("ransac/{}", frame.t.to_bits()));

    // (inlier count, tie-break key, position); smaller key wins ties
    let mut best: Option<(usize, f64, Position)> = None;
    let consider = |p: Position, best: &mut Option<(usize, f64, Position)>| {
        let inl = inliers_of(&p);
        let key = match prior {
            Some(q) => (p - q).norm(),
            None => inl.iter().map(|x| tdoa_error(&p, x, m, c)).sum(),
        };
        let better = match best {
            None => true,
            Some((n, kb, _)) => inl.len() > *n || (inl.len() == *n && key < *kb),
        };
        if better {
            *best = Some((inl.len(), key, p));
        }
    };
    if refs.len() == k {
        if let Some(p) = linear_hypothesis(&refs, m, c, cfg.planar_height) {
            consider(p, &mut best);
        }
    } else {
        for _ in 0..cfg.iterations {
            let idx = sample(&mut rng, refs.len(), k);
            let subset: Vec<&TdoaMeasurement> = idx.iter().map(|i| refs[i]).collect();
            if let Some(p) = linear_hypothesis(&subset, m, c, cfg.planar_height) {
                consider(p, &mut best);
            }
        }
    }
    if let Some(q) = prior {
        consider(q, &mut best);
    }
    let Some((count, _, hypothesis)) = best else {
        return Err(Error::Pipeline("no hypothesis could be formed".into()));
    };
    if count < cfg.min_inliers.max(1) {
        return Err(Error::Pipeline(format!(
            "best consensus {count} below minimum {}",
            cfg.min_inliers
        )));
    }

    let mut set = inliers_of(&hypothesis);
    let mut position = hypothesis;
    let mut fallback = false;
    for _ in 0..3 {
        let mut seeds = vec![position];
        seeds.extend(prior);
        let refined = seeds
            .into_iter()
            .filter_map(|s| refine(s, &set, m, c, cfg.planar_height))
            .min_by(|a, b| {
                range_residual(a, &set, mics, c).total_cmp(&range_residual(b, &set, mics, c))
            });
        match refined {
            Some(p) if range_residual(&p, &set, mics, c) <= range_residual(&hypothesis, &set, mics, c) => {
                position = p;
            }
            _ => {
                fallback = true;
                position = hypothesis;
                break;
            }
        }
        let next = inliers_of(&position);
        if next.len() < set.len() || next == set {
            break;
        }
        set = next;
    }
    Ok(Localization {
        position,
        inliers: set.len(),
        residual: range_residual(&position, &set, mics, c),
        fallback,
    })
}
