//! Contrastive pre-training loop on the source graph.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{Reader, Writer};
use crate::encoder::{
    encode, gin_backward, gin_forward, init_encoder, momentum_update, read_encoder,
    write_encoder, EncoderPair,
};
use crate::error::{config_err, Error, Result};
use crate::graph::{make_positive_pair, BipartiteGraph, NodeId, SamplerConfig, SubgraphPair};
use crate::numerics::{adam_step, AdamState};
use crate::pretrain::moco::{infonce_loss, MoCoQueue, DEFAULT_QUEUE_CAPACITY};
use crate::rng::{tag, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub tau: f64,
    pub momentum: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub queue_capacity: usize,
    /// Total optimisation steps; the node schedule cycles through as many
    /// epochs as this needs.
    pub steps: usize,
    pub feature_dim: usize,
    pub embedding_dim: usize,
    pub num_layers: usize,
    /// Write a training-state checkpoint every this many steps.
    pub checkpoint_every: Option<usize>,
    pub sampler: SamplerConfig,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            tau: 0.07,
            momentum: 0.999,
            lr: 0.005,
            batch_size: 32,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            steps: 2000,
            feature_dim: 18,
            embedding_dim: 64,
            num_layers: 3,
            checkpoint_every: None,
            sampler: SamplerConfig::default(),
            seed: 0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return config_err("tau must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return config_err("momentum must lie in [0, 1)");
        }
        if !(self.lr > 0.0) {
            return config_err("pre-training learning rate must be positive");
        }
        if self.batch_size == 0 || self.queue_capacity == 0 {
            return config_err("batch size and queue capacity must be positive");
        }
        if self.feature_dim < 3 || self.embedding_dim == 0 || self.num_layers == 0 {
            return config_err("feature_dim ≥ 3, embedding_dim ≥ 1 and num_layers ≥ 1 required");
        }
        if self.checkpoint_every == Some(0) {
            return config_err("checkpoint_every must be positive");
        }
        self.sampler.validate()
    }
}

/// Mean InfoNCE over `batch`, then Adam on the query encoder, momentum update
/// of the key encoder, and enqueueing of the batch's keys, in that order.
/// Subgraphs must already carry features. Returns the batch loss.
pub fn pretrain_step(
    pair: &mut EncoderPair,
    batch: &[SubgraphPair],
    queue: &mut MoCoQueue,
    cfg: &PretrainConfig,
    adam: &mut AdamState,
) -> Result<f64> {
    if batch.is_empty() {
        return config_err("pre-training batch is empty");
    }
    let query_params = &pair.query;
    let key_params = &pair.key;
    let queue_ref = &*queue;
    let per_pair: Vec<(f64, Vec<f64>, crate::encoder::EncoderParams)> = batch
        .par_iter()
        .map(|sp| {
            let (q, tape) = gin_forward(query_params, &sp.query)?;
            let k = encode(key_params, &sp.key)?;
            let (loss, dq) = infonce_loss(&q, &k, queue_ref, cfg.tau)?;
            let grads = gin_backward(query_params, &tape, &dq)?;
            Ok((loss, k, grads))
        })
        .collect::<Result<_>>()?;

    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut grads = pair.query.zeros_like();
    let mut keys = Vec::with_capacity(batch.len());
    for (l, k, g) in per_pair {
        loss += l;
        grads.add_assign(&g)?;
        keys.push(k);
    }
    loss *= scale;
    grads.scale(scale);
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite InfoNCE loss {loss}")));
    }
    adam_step(adam, pair.query.tensors_mut(), grads.tensors())?;
    momentum_update(pair)?;
    queue.enqueue(&keys)?;
    Ok(loss)
}

/// Resumable pre-training state.
#[derive(Clone, Debug, PartialEq)]
pub struct Pretrainer {
    pub pair: EncoderPair,
    pub adam: AdamState,
    pub queue: MoCoQueue,
    /// Number of completed steps.
    pub step: u64,
}

#[derive(Clone, Debug)]
pub struct PretrainOutput {
    pub encoder: EncoderPair,
    /// `(step, loss)` for every step run by this call.
    pub losses: Vec<(u64, f64)>,
}

impl Pretrainer {
    pub fn new(cfg: &PretrainConfig) -> Result<Self> {
        cfg.validate()?;
        let pair = init_encoder(
            cfg.seed,
            cfg.feature_dim,
            cfg.embedding_dim,
            cfg.num_layers,
            cfg.momentum,
        )?;
        Ok(Pretrainer {
            pair,
            adam: AdamState::new(cfg.lr),
            queue: MoCoQueue::new(cfg.queue_capacity, cfg.embedding_dim)?,
            step: 0,
        })
    }

    /// Runs until `cfg.steps` steps have completed. When `checkpoint_dir` is
    /// given and `cfg.checkpoint_every` is set, writes
    /// `pretrain-<step>.state` files there.
    pub fn run(
        &mut self,
        source: &BipartiteGraph,
        cfg: &PretrainConfig,
        checkpoint_dir: Option<&Path>,
    ) -> Result<Vec<(u64, f64)>> {
        cfg.validate()?;
        if source.num_nodes() == 0 {
            return config_err("source graph is empty");
        }
        if self.pair.query.d_in() != cfg.feature_dim || self.pair.query.dim() != cfg.embedding_dim
        {
            return config_err("encoder dimensions do not match the pre-training config");
        }
        let schedule = Schedule::new(source, cfg);
        let total = cfg.steps as u64;
        let mut losses = Vec::new();
        let mut next = (self.step < total)
            .then(|| schedule.sample_batch(source, cfg, self.step))
            .transpose()?;
        while let Some(batch) = next.take() {
            let step = self.step;
            let (result, upcoming) = rayon::join(
                || pretrain_step(&mut self.pair, &batch, &mut self.queue, cfg, &mut self.adam),
                || {
                    (step + 1 < total)
                        .then(|| schedule.sample_batch(source, cfg, step + 1))
                        .transpose()
                },
            );
            let loss = result?;
            next = upcoming?;
            self.step += 1;
            losses.push((step, loss));
            if let (Some(dir), Some(every)) = (checkpoint_dir, cfg.checkpoint_every) {
                if self.step.is_multiple_of(every as u64) {
                    self.save(&checkpoint_path(dir, self.step))?;
                }
            }
        }
        Ok(losses)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<W> {
        let mut w = Writer::new(out);
        w.bytes(STATE_MAGIC)?;
        w.u32(STATE_FORMAT_VERSION)?;
        w.u64(self.step)?;
        let mut inner = write_encoder(&self.pair, Vec::new())?;
        w.u64(inner.len() as u64)?;
        w.bytes(&inner)?;
        inner.clear();
        let a = &self.adam;
        for v in [a.lr, a.beta1, a.beta2, a.eps] {
            w.f64(v)?;
        }
        w.u64(a.step)?;
        w.u32(a.first_moment.len() as u32)?;
        for (m, v) in a.first_moment.iter().zip(&a.second_moment) {
            w.f64s(m)?;
            w.f64s(v)?;
        }
        w.u32(self.queue.capacity() as u32)?;
        w.u32(self.queue.dim() as u32)?;
        w.u32(self.queue.len() as u32)?;
        for k in self.queue.iter() {
            for &x in k {
                w.f64(x)?;
            }
        }
        w.finish()
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut r = Reader::new(input);
        r.expect_magic(STATE_MAGIC)?;
        let version = r.u32()?;
        if version != STATE_FORMAT_VERSION {
            return Err(Error::Format(format!("training state version {version} unsupported")));
        }
        let step = r.u64()?;
        let len = r.u64()? as usize;
        let mut enc = vec![0u8; len];
        for b in enc.iter_mut() {
            *b = r.u8()?;
        }
        let pair = read_encoder(enc.as_slice())?;
        let mut adam = AdamState::new(r.f64()?);
        adam.beta1 = r.f64()?;
        adam.beta2 = r.f64()?;
        adam.eps = r.f64()?;
        adam.step = r.u64()?;
        let n = r.u32()? as usize;
        for _ in 0..n {
            adam.first_moment.push(r.f64s()?);
            adam.second_moment.push(r.f64s()?);
        }
        let capacity = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let fill = r.u32()? as usize;
        let keys = (0..fill)
            .map(|_| (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        r.expect_end()?;
        let queue = MoCoQueue::from_keys(capacity, dim, keys)?;
        Ok(Pretrainer { pair, adam, queue, step })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(file)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

pub const STATE_MAGIC: &[u8; 8] = b"XDRPRE\0\0";
pub const STATE_FORMAT_VERSION: u32 = 1;

pub fn checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("pretrain-{step:08}.state"))
}

/// Shuffled per-epoch ordering of every node (users and items) of the graph.
/// Step `s` covers batch `s mod B` of epoch `s div B`, with `B` batches per
/// epoch. Each `(epoch, node)` gets its own sampling stream.
struct Schedule {
    nodes: Vec<NodeId>,
    batches_per_epoch: u64,
    root: Stream,
}

impl Schedule {
    fn new(graph: &BipartiteGraph, cfg: &PretrainConfig) -> Self {
        let nodes: Vec<NodeId> = graph.all_nodes().collect();
        let batches_per_epoch = nodes.len().div_ceil(cfg.batch_size) as u64;
        Schedule { nodes, batches_per_epoch, root: Stream::new(cfg.seed).derive(tag("pretrain")) }
    }

    fn batch_nodes(&self, step: u64, batch_size: usize) -> (u64, Vec<NodeId>) {
        let epoch = step / self.batches_per_epoch;
        let b = (step % self.batches_per_epoch) as usize;
        let mut order = self.nodes.clone();
        self.root.derive_path(&[tag("epoch"), epoch]).shuffle(&mut order);
        let end = ((b + 1) * batch_size).min(order.len());
        (epoch, order[b * batch_size..end].to_vec())
    }

    fn sample_batch(
        &self,
        graph: &BipartiteGraph,
        cfg: &PretrainConfig,
        step: u64,
    ) -> Result<Vec<SubgraphPair>> {
        let (epoch, nodes) = self.batch_nodes(step, cfg.batch_size);
        nodes
            .par_iter()
            .map(|&node| {
                let stream = self
                    .root
                    .derive_path(&[tag("pair"), epoch, graph.flat_index(node) as u64]);
                let p = make_positive_pair(graph, node, &cfg.sampler, &stream)?;
                Ok(SubgraphPair {
                    query: p.query.with_features(cfg.feature_dim)?,
                    key: p.key.with_features(cfg.feature_dim)?,
                    origin: p.origin,
                })
            })
            .collect()
    }
}

/// Pre-trains from scratch for `cfg.steps` steps.
pub fn run_pretrain(source: &BipartiteGraph, cfg: &PretrainConfig) -> Result<PretrainOutput> {
    run_pretrain_with_checkpoints(source, cfg, None)
}

pub fn run_pretrain_with_checkpoints(
    source: &BipartiteGraph,
    cfg: &PretrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<PretrainOutput> {
    let mut trainer = Pretrainer::new(cfg)?;
    let losses = trainer.run(source, cfg, checkpoint_dir)?;
    Ok(PretrainOutput { encoder: trainer.pair, losses })
}

/// `step<TAB>loss` lines.
pub fn write_loss_trace<W: Write>(losses: &[(u64, f64)], mut out: W) -> Result<()> {
    for (s, l) in losses {
        writeln!(out, "{s}\t{l}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sample_rw_subgraph;

    fn tiny_graph() -> BipartiteGraph {
        let edges: Vec<(u32, u32)> =
            (0..12u32).flat_map(|u| [(u, u % 7), (u, (u * 3 + 1) % 7)]).collect();
        BipartiteGraph::from_edges(12, 7, &edges).unwrap()
    }

    fn small_cfg() -> PretrainConfig {
        PretrainConfig {
            batch_size: 4,
            queue_capacity: 10,
            steps: 6,
            feature_dim: 6,
            embedding_dim: 8,
            num_layers: 2,
            ..Default::default()
        }
    }

    #[test]
    fn zero_steps_returns_initial_encoder() {
        let cfg = PretrainConfig { steps: 0, ..small_cfg() };
        let out = run_pretrain(&tiny_graph(), &cfg).unwrap();
        let init = init_encoder(cfg.seed, 6, 8, 2, cfg.momentum).unwrap();
        assert_eq!(out.encoder, init);
        assert!(out.losses.is_empty());
    }

    #[test]
    fn queue_fills_after_enough_steps() {
        let cfg = small_cfg();
        let mut t = Pretrainer::new(&cfg).unwrap();
        let losses = t.run(&tiny_graph(), &cfg, None).unwrap();
        assert_eq!(losses.len(), 6);
        // ceil(10 / 4) = 3 steps fill the queue.
        assert_eq!(t.queue.len(), 10);
        assert!(losses.iter().all(|(_, l)| l.is_finite() && *l >= 0.0));
        assert_eq!(losses[0].1, 0.0);
    }

    #[test]
    fn identical_pairs_with_empty_queue_have_zero_loss() {
        let g = tiny_graph();
        let cfg = small_cfg();
        let mut t = Pretrainer::new(&cfg).unwrap();
        let sub = sample_rw_subgraph(&g, NodeId::User(0), &cfg.sampler, &mut Stream::new(1))
            .unwrap()
            .with_features(cfg.feature_dim)
            .unwrap();
        let sp = SubgraphPair { query: sub.clone(), key: sub, origin: NodeId::User(0) };
        let before = t.pair.query.clone();
        let loss = pretrain_step(
            &mut t.pair,
            &[sp.clone(), sp],
            &mut t.queue,
            &cfg,
            &mut t.adam,
        )
        .unwrap();
        assert_eq!(loss, 0.0);
        // Zero gradient: Adam moves nothing.
        assert_eq!(t.pair.query, before);
    }

    #[test]
    fn state_round_trip_and_resume() {
        let g = tiny_graph();
        let cfg = small_cfg();
        let mut full = Pretrainer::new(&cfg).unwrap();
        let full_losses = full.run(&g, &cfg, None).unwrap();

        let half = PretrainConfig { steps: 3, ..cfg.clone() };
        let mut t = Pretrainer::new(&cfg).unwrap();
        t.run(&g, &half, None).unwrap();
        let bytes = t.write(Vec::new()).unwrap();
        let mut resumed = Pretrainer::read(bytes.as_slice()).unwrap();
        assert_eq!(resumed, t);
        let rest = resumed.run(&g, &cfg, None).unwrap();
        assert_eq!(rest, full_losses[3..].to_vec());
        assert_eq!(resumed.pair, full.pair);
    }

    #[test]
    fn empty_batch_rejected() {
        let cfg = small_cfg();
        let mut t = Pretrainer::new(&cfg).unwrap();
        assert!(pretrain_step(&mut t.pair, &[], &mut t.queue, &cfg, &mut t.adam).is_err());
    }
}
