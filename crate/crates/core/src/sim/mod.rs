//! Synthetic measurement campaigns: trajectories, multichannel audio,
//! massive-MIMO channel snapshots and calibrated noise.

mod audio;
mod channel;
pub mod io;
mod noise;
mod signal;
mod trajectory;

pub use audio::{
    synth_audio, AudioSynthOptions, Echoes, Interferer, MultichannelRecording, MIN_DISTANCE,
};
pub use channel::{
    build_paths, synth_channel, ChannelSnapshot, MultipathRegime, PathKind, PathSet,
    PropagationPath, Surface,
};
pub use noise::Awgn;
pub use signal::{
    gen_chirp, gen_wideband, SignalKind, SourceSignal, CHIRP_BURST, CHIRP_F_END, CHIRP_F_START,
};
pub use trajectory::{gen_trajectory, Pattern};
