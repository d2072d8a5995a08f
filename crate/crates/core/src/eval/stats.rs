use serde::{Deserialize, Serialize};

use super::align::AlignedPairSet;
use crate::error::{Error, Result};

/// Whether heights take part in the error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Projection {
    /// Horizontal plane only; z is dropped before measuring.
    #[default]
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

/// Summary of per-sample Euclidean errors, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single sample.
    pub sd: f64,
    /// Midpoint of the two central values for even counts.
    pub median: f64,
    pub count: usize,
    pub projection: Projection,
}

/// Per-pair distances after alignment.
pub fn pair_errors(pairs: &AlignedPairSet, projection: Projection) -> Vec<f64> {
    pairs
        .est
        .iter()
        .zip(&pairs.gt)
        .map(|(e, g)| match projection {
            Projection::TwoD => (e - g).xy().norm(),
            Projection::ThreeD => (e - g).norm(),
        })
        .collect()
}

pub fn compute_error_stats(pairs: &AlignedPairSet, projection: Projection) -> Result<ErrorStats> {
    stats_of(&pair_errors(pairs, projection), projection)
}

/// Mean, sample SD and median of non-negative errors.
pub fn stats_of(errors: &[f64], projection: Projection) -> Result<ErrorStats> {
    if errors.is_empty() {
        return Err(Error::DegenerateInput("no errors to summarize".into()));
    }
    if let Some(e) = errors.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::Input(format!("error value {e} is not a finite distance")));
    }
    let n = errors.len();
    let mean = errors.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(ErrorStats {
        mean,
        sd,
        median,
        count: n,
        projection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::align::Transform;
    use crate::types::Position;
    use proptest::prelude::*;

    fn set(est: Vec<Position>, gt: Vec<Position>) -> AlignedPairSet {
        AlignedPairSet {
            t: (0..est.len()).map(|i| i as f64).collect(),
            est,
            gt,
            transform: Transform::identity(),
            drops: 0,
        }
    }

    #[test]
    fn zero_error() {
        let p = vec![Position::new(1.0, 2.0, 3.0); 4];
        let s = compute_error_stats(&set(p.clone(), p), Projection::ThreeD).unwrap();
        assert_eq!((s.mean, s.sd, s.median, s.count), (0.0, 0.0, 0.0, 4));
    }

    #[test]
    fn three_and_four_centimeters() {
        let s = stats_of(&[0.03, 0.04], Projection::TwoD).unwrap();
        assert!((s.mean - 0.035).abs() < 1e-15);
        assert!((s.median - 0.035).abs() < 1e-15);
        assert!((s.sd - 0.007_071_067_811_865_475).abs() < 1e-15);
    }

    #[test]
    fn two_d_ignores_height() {
        let est = vec![Position::new(1.0, 1.0, 0.0), Position::new(2.0, 0.0, 5.0)];
        let gt = vec![Position::new(1.0, 1.0, 2.0), Position::new(2.0, 0.0, -1.0)];
        let pairs = set(est, gt);
        assert_eq!(compute_error_stats(&pairs, Projection::TwoD).unwrap().mean, 0.0);
        assert_eq!(compute_error_stats(&pairs, Projection::ThreeD).unwrap().mean, 4.0);
    }

    #[test]
    fn odd_median_and_single_sample() {
        assert_eq!(stats_of(&[5.0, 1.0, 3.0], Projection::TwoD).unwrap().median, 3.0);
        let one = stats_of(&[2.0], Projection::TwoD).unwrap();
        assert_eq!((one.mean, one.sd, one.median), (2.0, 0.0, 2.0));
        assert!(stats_of(&[], Projection::TwoD).is_err());
        assert!(stats_of(&[f64::NAN], Projection::TwoD).is_err());
    }

    proptest! {
        #[test]
        fn constant_errors_have_zero_sd(v in 0.0..10.0f64, n in 1usize..50) {
            let s = stats_of(&vec![v; n], Projection::TwoD).unwrap();
            prop_assert!(s.sd.abs() < 1e-12);
            prop_assert!((s.mean - v).abs() < 1e-12);
        }

        #[test]
        fn median_is_permutation_invariant(mut v in prop::collection::vec(0.0..10.0f64, 1..40), seed in any::<u64>()) {
            let a = stats_of(&v, Projection::TwoD).unwrap();
            use rand::seq::SliceRandom;
            v.shuffle(&mut crate::seed::rng(seed, "shuffle"));
            let b = stats_of(&v, Projection::TwoD).unwrap();
            prop_assert_eq!(a.median, b.median);
            let max = v.iter().cloned().fold(0.0, f64::max);
            prop_assert!(a.median <= max && a.sd >= 0.0 && a.mean >= 0.0);
        }
    }
}
