//! Progressive attention memory network (PAMN) for multiple-choice question
//! answering over temporally aligned video and subtitle streams.
//!
//! The crate is framework-free: [`tensor`] and [`tape`] provide the dense
//! algebra and reverse-mode differentiation, and the model modules compose
//! them into the full pipeline. [`synth`] generates a planted-evidence task
//! that makes the attention and fusion mechanisms observable at desk scale.

pub mod attention;
pub mod belief;
pub mod checkpoint;
pub mod config;
pub mod encoding;
pub mod episode_io;
pub mod error;
pub mod fusion;
pub mod gradcheck;
pub mod model;
pub mod params;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::{ModelConfig, TrainConfig, Variant};
pub use encoding::{EpisodeFeatures, Modality, NUM_ANSWERS};
pub use error::{Error, Result};
pub use model::{forward, forward_on_tape, InferenceTrace, Prediction};
pub use params::{InputDims, ModelParams};
pub use synth::{EpisodeRecord, SynthSpec};
pub use tensor::Tensor;
