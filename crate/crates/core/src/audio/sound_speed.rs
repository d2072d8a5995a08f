use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Valid temperature range of the linear model, °C.
pub const TEMPERATURE_RANGE: (f64, f64) = (-20.0, 50.0);

/// Speed of sound in dry air, `c = 331.3 + 0.606 T` m/s.
pub fn speed_of_sound(temperature: f64) -> Result<f64> {
    let (lo, hi) = TEMPERATURE_RANGE;
    if !(lo..=hi).contains(&temperature) {
        return Err(Error::Config(format!(
            "temperature {temperature} °C outside [{lo}, {hi}]"
        )));
    }
    Ok(331.3 + 0.606 * temperature)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoundSpeedModel {
    pub temperature: f64,
    pub c: f64,
}

impl SoundSpeedModel {
    pub fn at(temperature: f64) -> Result<Self> {
        Ok(Self {
            temperature,
            c: speed_of_sound(temperature)?,
        })
    }

    /// Slowest speed the model admits; bounds any physical TDOA.
    pub fn c_min() -> f64 {
        331.3 + 0.606 * TEMPERATURE_RANGE.0
    }
}
