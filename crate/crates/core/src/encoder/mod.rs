//! GIN graph encoder, query/key momentum pair and checkpoints.

pub mod checkpoint;
pub mod gin;
pub mod pair;

pub use checkpoint::{load_encoder, read_encoder, save_encoder, write_encoder};
pub use gin::{encode, gin_backward, gin_forward, EncoderParams, GinLayer, GinTape};
pub use pair::{init_encoder, momentum_update, EncoderPair};
