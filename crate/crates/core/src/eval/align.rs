use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::associate::PairedSamples;
use crate::error::{Error, Result};
use crate::types::Position;

/// How an estimate is mapped into the ground-truth frame before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AlignMode {
    /// Rotation and translation.
    #[default]
    Rigid,
    /// Rotation, translation and one uniform scale.
    RigidScale,
    /// Identity: the estimate is already in the ground-truth frame.
    None,
}

/// `p ↦ scale · rotation · p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Position) -> Position {
        self.scale * (self.rotation * p) + self.translation
    }
}

/// Aligned estimates and their ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPairSet {
    pub t: Vec<f64>,
    /// Estimates after applying `transform`.
    pub est: Vec<Position>,
    pub gt: Vec<Position>,
    pub transform: Transform,
    pub drops: usize,
}

impl AlignedPairSet {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Σ‖est − gt‖² after alignment.
    pub fn sum_squared_residual(&self) -> f64 {
        self.est.iter().zip(&self.gt).map(|(e, g)| (e - g).norm_squared()).sum()
    }
}

/// Relative size below which a singular value of the cross-covariance
/// counts as zero.
const RANK_TOLERANCE: f64 = 1e-10;

fn centroid(ps: &[Position]) -> Position {
    ps.iter().fold(Position::zeros(), |a, p| a + p) / ps.len() as f64
}

/// Closed-form least-squares alignment of `pairs.est` onto `pairs.gt`.
///
/// The cross-covariance of the centred point sets is decomposed as U·D·Vᵀ,
/// and the rotation is U·S·Vᵀ, where S flips the weakest axis when needed
/// to keep det R = +1. Planar point sets (rank 2) still give a unique
/// rotation; collinear or coincident ones do not.
pub fn align_rigid(pairs: &PairedSamples, mode: AlignMode) -> Result<AlignedPairSet> {
    if pairs.is_empty() {
        return Err(Error::Association("no pairs to align".into()));
    }
    let transform = match mode {
        AlignMode::None => Transform::identity(),
        AlignMode::Rigid | AlignMode::RigidScale => solve(&pairs.est, &pairs.gt, mode == AlignMode::RigidScale)?,
    };
    Ok(AlignedPairSet {
        t: pairs.t.clone(),
        est: pairs.est.iter().map(|p| transform.apply(p)).collect(),
        gt: pairs.gt.clone(),
        transform,
        drops: pairs.drops,
    })
}

fn solve(est: &[Position], gt: &[Position], with_scale: bool) -> Result<Transform> {
    let n = est.len();
    if n < 3 {
        return Err(Error::RankDeficient(format!(
            "{n} pairs cannot fix a rotation; at least 3 non-collinear pairs are needed"
        )));
    }
    let (mu_e, mu_g) = (centroid(est), centroid(gt));
    let mut sigma = Matrix3::zeros();
    let mut var_e = 0.0;
    for (e, g) in est.iter().zip(gt) {
        let (de, dg) = (e - mu_e, g - mu_g);
        sigma += dg * de.transpose();
        var_e += de.norm_squared();
    }
    sigma /= n as f64;
    var_e /= n as f64;

    let svd = sigma.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let d = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|a, b| d[*b].total_cmp(&d[*a]));
    if !(d[order[0]] > 0.0) || d[order[1]] <= RANK_TOLERANCE * d[order[0]] {
        return Err(Error::RankDeficient(
            "pairs are collinear or coincident; the rotation about their common line is undetermined".into(),
        ));
    }
    let mut s = Vector3::repeat(1.0);
    if (u.determinant() * v_t.determinant()) < 0.0 {
        s[order[2]] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&s) * v_t;
    let scale = if with_scale {
        d.component_mul(&s).sum() / var_e
    } else {
        1.0
    };
    Ok(Transform {
        rotation,
        translation: mu_g - scale * (rotation * mu_e),
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn pairs(est: Vec<Position>, gt: Vec<Position>) -> PairedSamples {
        PairedSamples {
            t: (0..est.len()).map(|i| i as f64).collect(),
            est,
            gt,
            drops: 0,
        }
    }

    fn cloud() -> Vec<Position> {
        vec![
            Position::new(0.0, 0.0, 0.0),
            Position::new(1.0, 0.2, 0.1),
            Position::new(0.3, 2.0, -0.4),
            Position::new(-1.0, 0.5, 0.8),
            Position::new(0.7, -0.9, 0.3),
        ]
    }

    #[test]
    fn identical_sets_give_identity() {
        let a = align_rigid(&pairs(cloud(), cloud()), AlignMode::Rigid).unwrap();
        assert!((a.transform.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(a.transform.translation.norm() < 1e-12);
        assert!(a.sum_squared_residual() < 1e-24);
    }

    #[test]
    fn recovers_rotation_about_z_plus_translation() {
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), 30f64.to_radians());
        let t = Vector3::new(1.0, 2.0, 0.0);
        let gt = cloud();
        let est: Vec<Position> = gt.iter().map(|g| r * g + t).collect();
        let a = align_rigid(&pairs(est, gt.clone()), AlignMode::Rigid).unwrap();
        assert!((a.transform.rotation - r.inverse().matrix()).norm() < 1e-12);
        for (e, g) in a.est.iter().zip(&gt) {
            assert!((e - g).norm() < 1e-9);
        }
    }

    #[test]
    fn planar_trajectories_are_aligned() {
        // every point at the same height, as for a person walking on a floor
        let gt: Vec<Position> = cloud().iter().map(|p| Position::new(p.x, p.y, 1.2)).collect();
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), -1.1);
        let est: Vec<Position> = gt.iter().map(|g| r * g + Vector3::new(0.5, 0.0, 0.1)).collect();
        let a = align_rigid(&pairs(est, gt), AlignMode::Rigid).unwrap();
        assert!((a.transform.rotation.determinant() - 1.0).abs() < 1e-12);
        assert!(a.sum_squared_residual() < 1e-20);
    }

    #[test]
    fn scale_mode_recovers_uniform_scale() {
        let gt = cloud();
        let est: Vec<Position> = gt.iter().map(|g| g * 0.5 + Vector3::new(0.0, 1.0, 0.0)).collect();
        let a = align_rigid(&pairs(est.clone(), gt.clone()), AlignMode::RigidScale).unwrap();
        assert!((a.transform.scale - 2.0).abs() < 1e-12);
        assert!(a.sum_squared_residual() < 1e-20);
        // without scale the residual cannot vanish
        let b = align_rigid(&pairs(est, gt), AlignMode::Rigid).unwrap();
        assert!(b.sum_squared_residual() > 1.0);
    }

    #[test]
    fn none_mode_is_identity_even_for_two_pairs() {
        let p = pairs(cloud()[..2].to_vec(), cloud()[..2].to_vec());
        let a = align_rigid(&p, AlignMode::None).unwrap();
        assert_eq!(a.transform, Transform::identity());
        assert_eq!(a.est, a.gt);
    }

    #[test]
    fn collinear_points_are_rank_deficient() {
        let line: Vec<Position> = (0..3).map(|i| Position::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        let err = align_rigid(&pairs(line.clone(), line), AlignMode::Rigid).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(ref m) if m.contains("collinear")));
        let two = pairs(cloud()[..2].to_vec(), cloud()[..2].to_vec());
        assert!(matches!(align_rigid(&two, AlignMode::Rigid), Err(Error::RankDeficient(_))));
    }

    fn arb_point() -> impl Strategy<Value = Position> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y, z)| Position::new(x, y, z))
    }

    fn arb_rigid() -> impl Strategy<Value = (Rotation3<f64>, Vector3<f64>)> {
        (arb_point(), -3.1..3.1f64, arb_point()).prop_filter_map("axis", |(axis, angle, t)| {
            let axis = nalgebra::Unit::try_new(axis, 1e-3)?;
            Some((Rotation3::from_axis_angle(&axis, angle), t))
        })
    }

    proptest! {
        #[test]
        fn perturbing_the_optimum_never_helps(
            gt in prop::collection::vec(arb_point(), 4..12),
            noise in prop::collection::vec(arb_point(), 12),
            (r, t) in arb_rigid(),
            (dr, dt) in (arb_point(), arb_point()),
        ) {
            let est: Vec<Position> = gt.iter().zip(&noise).map(|(g, n)| r * g + t + 0.05 * n).collect();
            let p = pairs(est.clone(), gt.clone());
            let a = match align_rigid(&p, AlignMode::Rigid) {
                Ok(a) => a,
                Err(Error::RankDeficient(_)) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            let best = a.sum_squared_residual();
            let small = Rotation3::new(dr * 1e-3);
            let rot = small.matrix() * a.transform.rotation;
            let tr = a.transform.translation + dt * 1e-3;
            let perturbed: f64 = est.iter().zip(&gt).map(|(e, g)| (rot * e + tr - g).norm_squared()).sum();
            prop_assert!(perturbed >= best - 1e-9 * (1.0 + best));
        }

        #[test]
        fn residual_is_invariant_under_a_common_isometry(
            gt in prop::collection::vec(arb_point(), 4..12),
            noise in prop::collection::vec(arb_point(), 12),
            (r, t) in arb_rigid(),
            (q, s) in arb_rigid(),
        ) {
            let est: Vec<Position> = gt.iter().zip(&noise).map(|(g, n)| r * g + t + 0.1 * n).collect();
            let moved = |ps: &[Position]| ps.iter().map(|p| q * p + s).collect::<Vec<_>>();
            let (Ok(a), Ok(b)) = (
                align_rigid(&pairs(est.clone(), gt.clone()), AlignMode::Rigid),
                align_rigid(&pairs(moved(&est), moved(&gt)), AlignMode::Rigid),
            ) else {
                return Ok(());
            };
            for ((ea, ga), (eb, gb)) in a.est.iter().zip(&a.gt).zip(b.est.iter().zip(&b.gt)) {
                prop_assert!(((ea - ga).norm() - (eb - gb).norm()).abs() < 1e-9);
            }
        }
    }
}
