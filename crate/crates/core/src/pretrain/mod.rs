//! Self-supervised contrastive pre-training with a momentum-contrast queue.

pub mod moco;
pub mod trainer;

pub use moco::{infonce_loss, MoCoQueue};
pub use trainer::{
    pretrain_step, run_pretrain, run_pretrain_with_checkpoints, write_loss_trace,
    PretrainConfig, PretrainOutput, Pretrainer,
};
