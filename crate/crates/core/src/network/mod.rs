//! Parameter store, decoder MLPs and the full scene pipeline with its
//! hand-written reverse pass.

mod mlp;
mod model;
mod params;
mod pipeline;
mod predict;

pub use mlp::{mlp_forward, Head, Mlp, MlpTape};
pub use model::{EncoderLayout, HandFeatureMode, Layout, Model, ModelConfig};
pub use params::{logistic, BlockInfo, LayoutBuilder, Linear};
pub use pipeline::{backward_scene, forward_scene, PairRecord, SceneForward, SceneGrad, SceneInput};
pub use predict::{predict_pair, predict_pair_backward, restore, PairPrediction, RestoreOutput};
