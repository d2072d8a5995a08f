//! Massive-MIMO positioning from channel snapshots.
//!
//! Two fully connected networks regress position, one from the spatial
//! covariance (angular structure), one from impulse-response tap magnitudes
//! (delay structure); their outputs are averaged.

mod dataset;
mod features;
mod mlp;
mod model_io;
mod pipeline;
mod split;

pub use dataset::{
    add_snapshot_noise, build_dataset, label_recording, simulate_snapshots, LabeledSet,
    RadioRecording,
};
pub use features::{
    cir_features, covariance_feature_len, extract_features, spatial_covariance,
    vectorize_covariance, FeatureConfig, FeatureVector,
};
pub use mlp::{
    gradient_check, moving_average, smoothed_nonincreasing, train_fcnn, Activation, Gradient,
    Layer, MlpModel, Optimizer, Standardizer, TrainHyper, TrainingRun,
};
pub use model_io::{decode_mlpm, encode_mlpm, read_mlpm, write_mlpm};
pub use pipeline::{
    fingerprint, localize_radio, predict_fused, read_training, train_radio, write_training,
    RadioEstimates, RadioModel, RadioTrainConfig, RadioTraining, TrainingMetadata, CIR_MODEL_FILE,
    COV_MODEL_FILE, LOSS_FILE, METADATA_FILE,
};
pub use split::{build_split, DatasetSplit};
