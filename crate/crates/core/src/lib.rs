//! Question-generation pretraining for sequence-to-sequence text generation.
//!
//! The crate covers the whole pipeline at desk scale: filtering community QA
//! dumps, a byte-pair tokenizer, a Transformer encoder-decoder whose encoder
//! and decoder share their layer parameters, the training loop, greedy and
//! beam decoding, and the evaluation metrics (ROUGE, BLEU, Best-Worst
//! Scaling, paired permutation tests).

pub mod data;
pub mod decoding;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod tokenizer;
pub mod training;

pub use error::{Error, Result};
