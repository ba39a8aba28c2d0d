//! Target-domain initialisation and BPR fine-tuning.

mod bpr;
mod table;
mod train;
mod transfer;

pub use bpr::{bpr_loss, lightgcn_propagate, sample_negatives, validate_triples, BprOutput, Triple};
pub use table::{score, EmbeddingTable};
pub use train::{scoring_table, train_mf, FinetuneConfig, FinetuneOutput, VALIDATION_K};
pub use transfer::{init_target_embeddings, SourceDomain, TransferConfig, TransferMode};
