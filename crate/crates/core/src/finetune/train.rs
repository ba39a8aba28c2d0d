//! Mini-batch BPR fine-tuning with early stopping on validation Recall@20.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::eval::{evaluate_lists, InteractionSplit};
use crate::finetune::bpr::{bpr_loss, lightgcn_propagate, sample_negatives, validate_triples, Triple};
use crate::finetune::table::EmbeddingTable;
use crate::graph::BipartiteGraph;
use crate::numerics::{adam_step, axpy, dot, AdamState};
use crate::rng::{tag, Stream};

/// Cutoff used for model selection.
pub const VALIDATION_K: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub lr: f64,
    /// L2 coefficient on the embedding rows touched by each batch.
    pub lambda: f64,
    pub negatives: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub eval_interval: usize,
    /// 0 for plain MF, otherwise LightGCN depth (1 or 3).
    pub lgcn_layers: usize,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            lr: 0.001,
            lambda: 1e-4,
            negatives: 1,
            batch_size: 256,
            max_epochs: 200,
            patience: 10,
            eval_interval: 5,
            lgcn_layers: 0,
            seed: 0,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return config_err("fine-tuning learning rate must be positive");
        }
        if !(self.lambda >= 0.0) {
            return config_err("lambda must be non-negative");
        }
        if self.negatives == 0 || self.batch_size == 0 {
            return config_err("negatives and batch_size must be positive");
        }
        if self.patience == 0 || self.eval_interval == 0 {
            return config_err("patience and eval_interval must be positive");
        }
        if ![0, 1, 3].contains(&self.lgcn_layers) {
            return config_err(format!("lgcn_layers must be 0, 1 or 3, got {}", self.lgcn_layers));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FinetuneOutput {
    /// Layer-0 parameters of the best validation snapshot.
    pub table: EmbeddingTable,
    /// Embeddings used for scoring; equals `table` for plain MF.
    pub scoring: EmbeddingTable,
    /// `(epoch, validation Recall@20)` for every evaluation, epoch 0 being the
    /// initialisation.
    pub validation: Vec<(usize, f64)>,
    /// Mean per-triple BPR loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub best_epoch: usize,
}

/// Scoring embeddings: `table` itself for MF, the propagated table otherwise.
pub fn scoring_table(
    table: &EmbeddingTable,
    train: &BipartiteGraph,
    lgcn_layers: usize,
) -> Result<EmbeddingTable> {
    if lgcn_layers == 0 {
        Ok(table.clone())
    } else {
        lightgcn_propagate(table, train, lgcn_layers)
    }
}

fn epoch_triples(
    train: &BipartiteGraph,
    root: &Stream,
    epoch: usize,
    negatives: usize,
) -> Result<Vec<Triple>> {
    let per_user: Vec<Vec<Triple>> = (0..train.num_users() as u32)
        .into_par_iter()
        .map(|u| {
            let pos = train.user_items(u);
            if pos.is_empty() {
                return Ok(Vec::new());
            }
            let mut s = root.derive_path(&[tag("negatives"), epoch as u64, u as u64]);
            let neg = sample_negatives(train, u, pos.len() * negatives, &mut s)?;
            Ok(pos
                .iter()
                .flat_map(|&i| std::iter::repeat_n(i, negatives))
                .zip(neg)
                .map(|(i, j)| (u, i, j))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut triples: Vec<Triple> = per_user.into_iter().flatten().collect();
    root.derive_path(&[tag("order"), epoch as u64]).shuffle(&mut triples);
    Ok(triples)
}

/// Loss and layer-0 gradient of one batch, routing through propagation when
/// `lgcn_layers > 0` and regularising layer-0 rows.
fn batch_gradient(
    table: &EmbeddingTable,
    train: &BipartiteGraph,
    batch: &[Triple],
    cfg: &FinetuneConfig,
) -> Result<(f64, EmbeddingTable)> {
    if cfg.lgcn_layers == 0 {
        let out = bpr_loss(table, batch, cfg.lambda)?;
        return Ok((out.loss, out.grad));
    }
    let prop = lightgcn_propagate(table, train, cfg.lgcn_layers)?;
    let out = bpr_loss(&prop, batch, 0.0)?;
    let mut grad = lightgcn_propagate(&out.grad, train, cfg.lgcn_layers)?;
    let mut loss = out.loss;
    if cfg.lambda > 0.0 {
        for &u in &out.touched_users {
            let e = table.users.row(u as usize);
            loss += cfg.lambda * dot(e, e);
            axpy(2.0 * cfg.lambda, e, grad.users.row_mut(u as usize));
        }
        for &i in &out.touched_items {
            let e = table.items.row(i as usize);
            loss += cfg.lambda * dot(e, e);
            axpy(2.0 * cfg.lambda, e, grad.items.row_mut(i as usize));
        }
    }
    Ok((loss, grad))
}

fn validation_recall(
    table: &EmbeddingTable,
    train: &BipartiteGraph,
    train_items: &[Vec<u32>],
    val_items: &[Vec<u32>],
    cfg: &FinetuneConfig,
) -> Result<(f64, EmbeddingTable)> {
    let scoring = scoring_table(table, train, cfg.lgcn_layers)?;
    let (recall, _, _) = evaluate_lists(&scoring, train_items, val_items, &[VALIDATION_K])?;
    Ok((recall[0], scoring))
}

/// Fine-tunes `init` on the split's training edges. Returns the snapshot with
/// the best validation Recall@20 (ties keep the earlier one). Without
/// validation edges no model selection happens and the last epoch is kept.
pub fn train_mf(
    init: &EmbeddingTable,
    split: &InteractionSplit,
    cfg: &FinetuneConfig,
) -> Result<FinetuneOutput> {
    cfg.validate()?;
    if split.train.is_empty() {
        return config_err("training split is empty");
    }
    if init.num_users() != split.num_users || init.num_items() != split.num_items {
        return crate::error::shape_err("initial table does not match the split's graph");
    }
    if !init.is_finite() {
        return Err(Error::Numeric("initial embeddings are not finite".into()));
    }
    let train = split.train_graph()?;
    let train_items = split.train_items();
    let val_items = split.validation_items();
    let select = !split.validation.is_empty();
    let root = Stream::new(cfg.seed).derive(tag("finetune"));

    let mut table = init.clone();
    let mut adam = AdamState::new(cfg.lr);
    let mut validation = Vec::new();
    let mut epoch_losses = Vec::new();

    let (mut best, mut best_scoring) = (table.clone(), scoring_table(&table, &train, cfg.lgcn_layers)?);
    let mut best_epoch = 0;
    let mut best_recall = f64::NEG_INFINITY;
    if select {
        let (r, s) = validation_recall(&table, &train, &train_items, &val_items, cfg)?;
        validation.push((0, r));
        best_recall = r;
        best_scoring = s;
    }
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        let triples = epoch_triples(&train, &root, epoch, cfg.negatives)?;
        if cfg!(debug_assertions) {
            validate_triples(&train, &triples)?;
        }
        let mut total = 0.0;
        for batch in triples.chunks(cfg.batch_size) {
            let (loss, grad) = batch_gradient(&table, &train, batch, cfg)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("BPR loss became {loss} in epoch {epoch}")));
            }
            total += loss;
            adam_step(&mut adam, table.tensors_mut(), grad.tensors())?;
        }
        epoch_losses.push(total / triples.len().max(1) as f64);

        if !select {
            best = table.clone();
            best_epoch = epoch;
            continue;
        }
        if epoch % cfg.eval_interval == 0 {
            let (r, s) = validation_recall(&table, &train, &train_items, &val_items, cfg)?;
            validation.push((epoch, r));
            if r > best_recall {
                best_recall = r;
                best = table.clone();
                best_scoring = s;
                best_epoch = epoch;
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
    }
    if !select {
        best_scoring = scoring_table(&best, &train, cfg.lgcn_layers)?;
    }
    Ok(FinetuneOutput { table: best, scoring: best_scoring, validation, epoch_losses, best_epoch })
}
