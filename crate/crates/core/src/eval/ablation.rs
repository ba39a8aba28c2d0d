//! End-to-end experiment runner and the transfer/depth/radius ablation grid.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoder::EncoderParams;
use crate::error::{config_err, Result};
use crate::eval::metrics::{evaluate, MetricsReport, DEFAULT_KS};
use crate::eval::split::{split_interactions, InteractionSplit, SplitConfig};
use crate::finetune::{
    init_target_embeddings, train_mf, EmbeddingTable, FinetuneConfig, SourceDomain,
    TransferConfig, TransferMode,
};
use crate::graph::{BipartiteGraph, CommonUserAlignment, SamplerConfig};
use crate::pretrain::{run_pretrain, PretrainConfig};

/// Hex SHA-256 prefix of a value's JSON serialisation.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialise to JSON");
    let digest = Sha256::digest(&bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Model-side settings of one run. `seed` and `sampler` override the
/// corresponding fields of the nested sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub pretrain: PretrainConfig,
    pub transfer: TransferConfig,
    pub finetune: FinetuneConfig,
    pub split: SplitConfig,
    pub ks: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            sampler: SamplerConfig::default(),
            pretrain: PretrainConfig::default(),
            transfer: TransferConfig::default(),
            finetune: FinetuneConfig::default(),
            split: SplitConfig::default(),
            ks: DEFAULT_KS.to_vec(),
        }
    }
}

impl ExperimentConfig {
    /// Copy with `seed` and `sampler` pushed into every section.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut c = self.clone();
        c.sampler.seed = c.seed;
        c.pretrain.seed = c.seed;
        c.pretrain.sampler = c.sampler.clone();
        c.transfer.seed = c.seed;
        c.transfer.sampler = c.sampler.clone();
        c.finetune.seed = c.seed;
        c.split.seed = c.seed;
        c
    }

    pub fn with_seed(&self, seed: u64) -> ExperimentConfig {
        ExperimentConfig { seed, ..self.clone() }.resolved()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.resolved();
        c.sampler.validate()?;
        c.pretrain.validate()?;
        c.transfer.validate()?;
        c.finetune.validate()?;
        c.split.validate()?;
        if c.ks.is_empty() || c.ks.contains(&0) {
            return config_err("evaluation cutoffs must be a nonempty list of positive integers");
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.resolved())
    }
}

/// Source and target graphs with their common-user alignment.
#[derive(Clone, Copy, Debug)]
pub struct Domains<'a> {
    pub source: &'a BipartiteGraph,
    pub target: &'a BipartiteGraph,
    pub alignment: &'a CommonUserAlignment,
}

impl<'a> Domains<'a> {
    fn source_domain(&self) -> SourceDomain<'a> {
        SourceDomain { graph: self.source, alignment: self.alignment }
    }
}

pub fn pretrain_encoder(source: &BipartiteGraph, cfg: &ExperimentConfig) -> Result<EncoderParams> {
    Ok(run_pretrain(source, &cfg.resolved().pretrain)?.encoder.query)
}

/// Initial table for `cfg.transfer.mode`, fine-tuned unless the mode is
/// `PreOnly`. Returns the scoring embeddings.
pub fn transfer_and_finetune(
    encoder: &EncoderParams,
    domains: &Domains<'_>,
    split: &InteractionSplit,
    cfg: &ExperimentConfig,
) -> Result<EmbeddingTable> {
    let cfg = cfg.resolved();
    let init =
        init_target_embeddings(encoder, domains.target, Some(domains.source_domain()), &cfg.transfer)?;
    if !cfg.transfer.mode.fine_tunes() {
        return Ok(init);
    }
    Ok(train_mf(&init, split, &cfg.finetune)?.scoring)
}

/// Pre-train, transfer, fine-tune and evaluate.
pub fn run_experiment(domains: &Domains<'_>, cfg: &ExperimentConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let split = split_interactions(domains.target, &cfg.split)?;
    let encoder = if cfg.transfer.mode == TransferMode::Random {
        None
    } else {
        Some(pretrain_encoder(domains.source, &cfg)?)
    };
    let table = match &encoder {
        Some(e) => transfer_and_finetune(e, domains, &split, &cfg)?,
        None => random_arm(domains, &split, &cfg)?,
    };
    evaluate(&table, &split, &cfg.ks, &cfg.fingerprint(), cfg.seed)
}

/// Random initialisation only needs the encoder's width.
fn random_arm(
    domains: &Domains<'_>,
    split: &InteractionSplit,
    cfg: &ExperimentConfig,
) -> Result<EmbeddingTable> {
    let width_only = EncoderParams::identity(cfg.pretrain.embedding_dim, 1);
    transfer_and_finetune(&width_only, domains, split, cfg)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationArm {
    pub name: String,
    pub mode: TransferMode,
    pub lgcn_layers: usize,
    /// Ego radius override for both pre-training and transfer.
    pub r: Option<usize>,
}

impl AblationArm {
    fn new(name: &str, mode: TransferMode, lgcn_layers: usize, r: Option<usize>) -> Self {
        AblationArm { name: name.to_owned(), mode, lgcn_layers, r }
    }

    pub fn apply(&self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut c = base.clone();
        c.transfer.mode = self.mode;
        c.finetune.lgcn_layers = self.lgcn_layers;
        if let Some(r) = self.r {
            c.sampler.r = r;
        }
        c.resolved()
    }
}

/// Random, Pre-Only, CU-PE, CU-PM, Full, Full with 1- and 3-layer LightGCN,
/// and Full with ego radius 2 and 3.
pub fn standard_arms() -> Vec<AblationArm> {
    use TransferMode::*;
    vec![
        AblationArm::new("random", Random, 0, None),
        AblationArm::new("pre-only", PreOnly, 0, None),
        AblationArm::new("cu-pe", CuPe, 0, None),
        AblationArm::new("cu-pm", CuPm, 0, None),
        AblationArm::new("full", Full, 0, None),
        AblationArm::new("full-l1", Full, 1, None),
        AblationArm::new("full-l3", Full, 3, None),
        AblationArm::new("full-r2", Full, 0, Some(2)),
        AblationArm::new("full-r3", Full, 0, Some(3)),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub arm: String,
    pub report: MetricsReport,
}

/// One row per arm, all sharing `base`'s split and seed. Encoders are
/// pre-trained once per distinct sampler setting.
pub fn run_ablations(
    domains: &Domains<'_>,
    base: &ExperimentConfig,
    arms: &[AblationArm],
) -> Result<Vec<AblationRow>> {
    base.validate()?;
    let base = base.resolved();
    let split = split_interactions(domains.target, &base.split)?;
    let mut encoders: HashMap<String, EncoderParams> = HashMap::new();
    let mut rows = Vec::with_capacity(arms.len());
    for arm in arms {
        let cfg = arm.apply(&base);
        cfg.validate()?;
        let table = if arm.mode == TransferMode::Random {
            random_arm(domains, &split, &cfg)?
        } else {
            let key = fingerprint(&cfg.pretrain);
            if !encoders.contains_key(&key) {
                encoders.insert(key.clone(), pretrain_encoder(domains.source, &cfg)?);
            }
            transfer_and_finetune(&encoders[&key], domains, &split, &cfg)?
        };
        let report = evaluate(&table, &split, &cfg.ks, &cfg.fingerprint(), cfg.seed)?;
        rows.push(AblationRow { arm: arm.name.clone(), report });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_synthetic_pair, SynthConfig};

    fn tiny() -> (crate::graph::SynthPair, ExperimentConfig) {
        let pair = generate_synthetic_pair(&SynthConfig {
            source_users: 60,
            source_items: 40,
            target_users: 50,
            target_items: 30,
            density: 0.15,
            seed: 2,
            ..Default::default()
        })
        .unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.pretrain.steps = 3;
        cfg.pretrain.batch_size = 4;
        cfg.pretrain.embedding_dim = 8;
        cfg.pretrain.feature_dim = 6;
        cfg.finetune.max_epochs = 3;
        cfg.sampler.max_subgraph_nodes = 12;
        (pair, cfg)
    }

    #[test]
    fn fingerprint_is_stable_and_seed_sensitive() {
        let c = ExperimentConfig::default();
        assert_eq!(c.fingerprint(), c.clone().fingerprint());
        assert_eq!(c.fingerprint().len(), 16);
        assert_ne!(c.fingerprint(), c.with_seed(1).fingerprint());
    }

    #[test]
    fn identical_arms_give_identical_rows() {
        let (p, cfg) = tiny();
        let d = Domains { source: &p.source, target: &p.target, alignment: &p.alignment };
        let full = AblationArm::new("full", TransferMode::Full, 0, None);
        let rows = run_ablations(&d, &cfg, &[full.clone(), full]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].report, rows[1].report);
    }

    #[test]
    fn experiment_matches_ablation_row() {
        let (p, cfg) = tiny();
        let d = Domains { source: &p.source, target: &p.target, alignment: &p.alignment };
        let arm = AblationArm::new("cu-pm", TransferMode::CuPm, 0, None);
        let rows = run_ablations(&d, &cfg, std::slice::from_ref(&arm)).unwrap();
        assert_eq!(run_experiment(&d, &arm.apply(&cfg)).unwrap(), rows[0].report);
    }
}
