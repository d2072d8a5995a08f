//! Sound-source localization with known microphone positions: GCC-PHAT
//! time differences, RANSAC multilateration and RTS smoothing.

mod gcc;
mod multilat;
mod pipeline;
mod smoother;
mod sound_speed;
mod spectrogram;
mod tdoa;

pub use gcc::{gcc_phat, DelayEstimate, GccConfig, GccEngine, PeakInterp, PHAT_EPSILON};
pub use multilat::{multilaterate_frame, range_residual, Localization, RansacConfig};
pub use pipeline::{
    localize_audio, AudioPipelineConfig, AudioRun, AudioRunReport, FrameRecord, FrameStatus,
};
pub use smoother::{
    kalman_cost, smooth_states, smooth_trajectory, MotionState, RawEstimate, SmootherConfig,
};
pub use sound_speed::{speed_of_sound, SoundSpeedModel, TEMPERATURE_RANGE};
pub use spectrogram::{spectrogram, Spectrogram};
pub use tdoa::{extract_tdoa_frames, frame_count, TdoaFrame, TdoaMeasurement};
