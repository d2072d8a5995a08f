//! Multi-sensor indoor localization toolkit.
//!
//! * [`sim`] generates synthetic campaigns: trajectories, microphone
//!   recordings and massive-MIMO channel snapshots.
//! * [`audio`] localizes a sound source from synchronized recordings with
//!   GCC-PHAT time differences, RANSAC multilateration and RTS smoothing.
//! * [`radio`] turns channel snapshots into covariance and impulse-response
//!   features and fuses two fully connected networks into a position.
//! * [`eval`] associates, aligns and scores trajectories.
//! * [`repro`] runs seeded end-to-end experiments and checks their outcomes
//!   against fixed acceptance criteria.

pub mod audio;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod radio;
pub mod repro;
pub mod seed;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
pub use types::{MicArray, Position, Room, SceneConfig, TimedPosition, Trajectory};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
