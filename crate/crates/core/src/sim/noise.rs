use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use super::audio::add_real_noise;
use super::channel::ChannelSnapshot;
use super::signal::SourceSignal;
use crate::error::{Error, Result};
use crate::seed;

/// Additive white Gaussian noise at a target SNR relative to the data's
/// own mean power. Deterministic in `seed`.
pub trait Awgn: Sized {
    fn add_awgn(&self, snr_db: f64, seed: u64) -> Result<Self>;
}

impl Awgn for Vec<f64> {
    fn add_awgn(&self, snr_db: f64, seed: u64) -> Result<Self> {
        add_real_noise(self, snr_db, seed)
    }
}

impl Awgn for SourceSignal {
    fn add_awgn(&self, snr_db: f64, seed: u64) -> Result<Self> {
        Ok(SourceSignal {
            samples: add_real_noise(&self.samples, snr_db, seed)?,
            ..self.clone()
        })
    }
}

impl Awgn for ChannelSnapshot {
    /// Circularly symmetric complex noise, half the power per component.
    fn add_awgn(&self, snr_db: f64, seed: u64) -> Result<Self> {
        let p = self.power();
        if p <= 0.0 {
            return Err(Error::ZeroPower);
        }
        let sigma = (p / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
        let mut rng = seed::rng(seed, "awgn-complex");
        let mut h = self.h.clone();
        for v in h.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(sigma * re, sigma * im);
        }
        Ok(ChannelSnapshot { t: self.t, h })
    }
}
