//! Action chunks, velocity fields and flow-matching sampling/training.
//!
//! Chunks are transported along the linear path
//! `x_tau = (1 - tau) x0 + tau x1` from a Gaussian source `x0` at `tau = 0`
//! to an action chunk at `tau = 1`. The source is `N(0, I)` unless the field
//! declares per-column moments, as a trained [`MlpField`] does.

mod checkpoint;
mod chunk;
mod field;
mod gaussian;
mod mlp;
mod observation;
mod sampler;
mod setpoints;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use chunk::{ActionChunk, ACTION_DIM, DX, DY, DYAW, DZ, GRIPPER, HORIZONS, MAX_STEP_DELTA};
pub use field::{denoised_estimate, VelocityField};
pub use gaussian::GaussianField;
pub use mlp::{MlpArch, MlpField};
pub use observation::{Observation, TaskToken, FEATURE_DIM};
pub use sampler::{sample_chunk, sample_chunk_with_stats, SampleStats, DEFAULT_DENOISE_STEPS};
pub use setpoints::{actions_to_setpoints, clamp_row, Setpoint};
pub use train::{
    flow_matching_loss, train_flow_matching, velocity_matching_loss, TrainConfig, TrainReport, TrainedPolicy,
};
