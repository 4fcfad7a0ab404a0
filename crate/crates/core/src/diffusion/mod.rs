//! Guided denoising diffusion over lookahead action sequences.
//!
//! A trajectory network denoises `H` frames of +-1 coded action masks
//! conditioned on the belief image. During sampling each reverse step is
//! nudged along the input gradient of a return network and, when a cost
//! coefficient is set, against the gradient of a distance network. The
//! continuous result is projected frame by frame onto the action
//! templates and the best-scoring sample's first action is executed.

mod model;
mod sampler;
mod schedule;
mod train;

pub use model::{
    BundleManifest, ModelBundle, ModelLayout, BUNDLE_FORMAT_VERSION, DISTANCE_FILE, MANIFEST_FILE,
    RETURN_FILE, TRAJECTORY_FILE,
};
pub use sampler::{
    binarize_trajectory, cdas_sample, das_sample, reverse_chains, DiffusionPlanner,
    ReverseMeanMode, SampleOutcome, SamplerConfig, TemplateSet,
};
pub use schedule::{time_embedding, NoiseSchedule, COSINE_OFFSET};
pub use train::{
    predict_returns, train_distance_model, train_return_model, train_trajectory_model,
    trajectory_loss, LossCurve, NetConfig, TrainingSample,
};
