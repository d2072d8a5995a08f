//! Covariance and impulse-response features of channel snapshots.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::ChannelSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Leading impulse-response taps kept per antenna.
    pub cir_taps: usize,
    /// Snapshots averaged into one covariance, ending at the current one.
    pub covariance_window: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            cir_taps: 16,
            covariance_window: 1,
        }
    }
}

/// Inputs of the two networks for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub cov: Vec<f64>,
    pub cir: Vec<f64>,
}

/// Sample covariance `R = 1/(S K) Σ_s Σ_k h_{s,k} h_{s,k}^H` of the antenna
/// vectors (columns) over all snapshots and subcarriers.
pub fn spatial_covariance(snapshots: &[ChannelSnapshot]) -> Result<DMatrix<Complex64>> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::Input("covariance needs at least one snapshot".into()))?;
    let (n, k) = first.h.shape();
    let mut r = DMatrix::zeros(n, n);
    for s in snapshots {
        if s.h.shape() != (n, k) {
            return Err(Error::shape(format!("{n}x{k}"), format!("{:?}", s.h.shape())));
        }
        r += &s.h * s.h.adjoint();
    }
    Ok(r / Complex64::new((snapshots.len() * k) as f64, 0.0))
}

/// Upper triangle of a Hermitian matrix, row by row: the real diagonal
/// entry, then `(re, im)` of each off-diagonal entry. Length `n²`.
pub fn vectorize_covariance(r: &DMatrix<Complex64>) -> Vec<f64> {
    let n = r.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(r[(i, i)].re);
        for j in i + 1..n {
            out.push(r[(i, j)].re);
            out.push(r[(i, j)].im);
        }
    }
    out
}

pub fn covariance_feature_len(antennas: usize) -> usize {
    antennas + antennas * (antennas - 1)
}

/// Magnitudes of the first `taps` taps of each antenna's impulse response,
/// obtained with the unitary inverse DFT across subcarriers.
pub fn cir_features(snapshot: &ChannelSnapshot, taps: usize) -> Result<Vec<f64>> {
    let (n, k) = snapshot.h.shape();
    if taps == 0 || taps > k {
        return Err(Error::Config(format!("cir taps must lie in 1..={k}, got {taps}")));
    }
    let ifft = FftPlanner::new().plan_fft_inverse(k);
    let scale = 1.0 / (k as f64).sqrt();
    let mut out = Vec::with_capacity(n * taps);
    let mut row = vec![Complex64::new(0.0, 0.0); k];
    for a in 0..n {
        for (dst, src) in row.iter_mut().zip(snapshot.h.row(a).iter()) {
            *dst = *src;
        }
        ifft.process(&mut row);
        out.extend(row[..taps].iter().map(|c| c.norm() * scale));
    }
    Ok(out)
}

/// Features for every snapshot of one trajectory. The covariance of frame
/// `i` averages the `covariance_window` snapshots ending at `i`.
pub fn extract_features(snapshots: &[ChannelSnapshot], cfg: &FeatureConfig) -> Result<Vec<FeatureVector>> {
    if cfg.covariance_window == 0 {
        return Err(Error::Config("covariance_window must be >= 1".into()));
    }
    (0..snapshots.len())
        .into_par_iter()
        .map(|i| {
            let lo = (i + 1).saturating_sub(cfg.covariance_window);
            let r = spatial_covariance(&snapshots[lo..=i])?;
            Ok(FeatureVector {
                cov: vectorize_covariance(&r),
                cir: cir_features(&snapshots[i], cfg.cir_taps)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn snap(h: DMatrix<Complex64>) -> ChannelSnapshot {
        ChannelSnapshot { t: 0.0, h }
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rank_one_outer_product() {
        let h = DMatrix::from_column_slice(3, 1, &[c(1.0, 0.5), c(-0.2, 2.0), c(0.0, -1.0)]);
        let r = spatial_covariance(&[snap(h.clone())]).unwrap();
        assert!((&r - &h * h.adjoint()).norm() < 1e-15);
        assert!((r.trace().re - h.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn two_vectors_match_hand_average() {
        // u = (1, j), v = (2, 1 - j)
        // u u^H = [[1, -j], [j, 1]],  v v^H = [[4, 2 + 2j], [2 - 2j, 2]]
        let u = DMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 1.0)]);
        let v = DMatrix::from_column_slice(2, 1, &[c(2.0, 0.0), c(1.0, -1.0)]);
        let r = spatial_covariance(&[snap(u), snap(v)]).unwrap();
        let want = [[c(2.5, 0.0), c(1.0, 0.5)], [c(1.0, -0.5), c(1.5, 0.0)]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((r[(i, j)] - want[i][j]).norm() < 1e-15, "{i}{j}");
            }
        }
        assert_eq!(vectorize_covariance(&r), vec![2.5, 1.0, 0.5, 1.5]);
    }

    #[test]
    fn feature_length_for_full_array() {
        assert_eq!(covariance_feature_len(100), 10_000);
        let h = DMatrix::from_element(100, 4, c(1.0, 0.0));
        let r = spatial_covariance(&[snap(h)]).unwrap();
        assert_eq!(vectorize_covariance(&r).len(), 10_000);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = snap(DMatrix::from_element(2, 3, c(1.0, 0.0)));
        let b = snap(DMatrix::from_element(3, 3, c(1.0, 0.0)));
        assert!(matches!(spatial_covariance(&[a, b]), Err(Error::Shape { .. })));
        assert!(spatial_covariance(&[]).is_err());
    }

    #[test]
    fn flat_spectrum_is_an_impulse() {
        let k = 64;
        let f = cir_features(&snap(DMatrix::from_element(2, k, c(1.0, 0.0))), 16).unwrap();
        for a in 0..2 {
            assert!((f[a * 16] - (k as f64).sqrt()).abs() < 1e-12);
            assert!(f[a * 16 + 1..(a + 1) * 16].iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn linear_phase_is_a_shifted_impulse() {
        let (k, d) = (32, 5);
        let h = DMatrix::from_fn(1, k, |_, i| {
            Complex64::from_polar(1.0, -std::f64::consts::TAU * (i * d) as f64 / k as f64)
        });
        let f = cir_features(&snap(h), k).unwrap();
        for (t, v) in f.iter().enumerate() {
            let want = if t == d { (k as f64).sqrt() } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "tap {t}: {v}");
        }
    }

    #[test]
    fn tap_count_is_checked() {
        let s = snap(DMatrix::from_element(1, 8, c(1.0, 0.0)));
        assert!(matches!(cir_features(&s, 9), Err(Error::Config(_))));
        assert!(matches!(cir_features(&s, 0), Err(Error::Config(_))));
    }

    fn arb_snapshot() -> impl Strategy<Value = ChannelSnapshot> {
        (1usize..5, 1usize..9).prop_flat_map(|(n, k)| {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * k)
                .prop_map(move |v| snap(DMatrix::from_iterator(n, k, v.into_iter().map(|(a, b)| c(a, b)))))
        })
    }

    proptest! {
        #[test]
        fn covariance_is_hermitian_psd_and_phase_blind(s in arb_snapshot(), phi in 0.0f64..6.3) {
            let r = spatial_covariance(std::slice::from_ref(&s)).unwrap();
            prop_assert!((&r - r.adjoint()).norm() < 1e-12);
            let eig = r.clone().symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|e| *e > -1e-12));
            let rot = snap(s.h.map(|z| z * Complex64::from_polar(1.0, phi)));
            let r2 = spatial_covariance(&[rot]).unwrap();
            prop_assert!((&r - &r2).norm() < 1e-12);
        }

        #[test]
        fn parseval_and_phase_offset_invariance(s in arb_snapshot(), phi in 0.0f64..6.3) {
            let k = s.subcarriers();
            let f = cir_features(&s, k).unwrap();
            for a in 0..s.antennas() {
                let time: f64 = f[a * k..(a + 1) * k].iter().map(|v| v * v).sum();
                let freq: f64 = s.h.row(a).iter().map(|z| z.norm_sqr()).sum();
                prop_assert!((time - freq).abs() <= 1e-9 * freq.max(1e-300));
            }
            let rot = snap(s.h.map(|z| z * Complex64::from_polar(1.0, phi)));
            let g = cir_features(&rot, k).unwrap();
            for (x, y) in f.iter().zip(&g) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
