//! Edge splitting and top-K ranking metrics.

mod ablation;
mod metrics;
mod split;

pub use metrics::{
    evaluate, evaluate_lists, map_at_k, rank_items, recall_at_k, top_k_from_scores, user_scores,
    MetricsReport, DEFAULT_KS,
};
pub use split::{items_by_user, split_interactions, InteractionSplit, SplitConfig};
pub use ablation::{
    fingerprint, pretrain_encoder, run_ablations, run_experiment, standard_arms,
    transfer_and_finetune, AblationArm, AblationRow, Domains, ExperimentConfig,
};
