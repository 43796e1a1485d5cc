//! Compact neural radiance field: positional encoding, a ReLU MLP with
//! hand-written gradients, volume rendering and Adam training.

pub mod adam;
pub mod checkpoint;
pub mod encoding;
pub mod linalg;
pub mod mlp;
pub mod render;
pub mod train;

pub use adam::Adam;
pub use checkpoint::{checkpoint_size, load_model, save_model};
pub use encoding::{positional_encode, EncodingConfig, DEFAULT_FREQS};
pub use linalg::Real;
pub use mlp::{Gradients, Layer, MlpModel, HIDDEN_WIDTHS, OUTPUT_DIM};
pub use render::{composite, composite_backward, render_view, sample_ray, Composite, RaySamples, RenderConfig};
pub use train::{
    loss_and_gradients, loss_mse, mean_color_baseline, split_frames, train, HistoryEntry, TrainConfig,
    TrainOutcome,
};
