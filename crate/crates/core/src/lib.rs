//! Cross-domain recommendation: contrastive pre-training of a GIN encoder on a
//! source-domain interaction graph, transfer of the encoder into target-domain
//! embedding initialisation, and BPR matrix-factorisation fine-tuning.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod codec;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod finetune;
pub mod graph;
pub mod io;
pub mod numerics;
pub mod pretrain;
pub mod rng;

pub use error::{Error, Result};
