//! Shared-parameter Transformer encoder-decoder.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, warm_start, Checkpoint, CHECKPOINT_MAGIC};
pub use config::ModelConfig;
pub use forward::{shift_right, BoundParams, PaddedBatch};
pub use params::{
    parameter_shapes,
    AttentionIds, CrossBlockIds, LinearIds, NormIds, ParamId, SeqToSeqParams, SharedBlockIds, INIT_STD,
};
