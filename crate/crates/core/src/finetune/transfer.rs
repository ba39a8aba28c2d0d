//! Target-domain embedding initialisation from a pre-trained encoder.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{encode, EncoderParams};
use crate::error::{config_err, shape_err, Error, Result};
use crate::finetune::table::EmbeddingTable;
use crate::graph::{sample_rw_subgraph, BipartiteGraph, CommonUserAlignment, NodeId, SamplerConfig};
use crate::numerics::DenseMatrix;
use crate::rng::{tag, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferMode {
    /// Scaled uniform initialisation, no transfer.
    Random,
    /// Encoder output for every node, used without fine-tuning.
    PreOnly,
    /// Common users copy the encoder's output on their source-domain subgraph.
    CuPe,
    /// Common users get the encoder's output on their target-domain subgraph.
    CuPm,
    /// Encoder output for every target node, then fine-tuning.
    Full,
}

impl TransferMode {
    pub const ALL: [TransferMode; 5] = [
        TransferMode::Random,
        TransferMode::PreOnly,
        TransferMode::CuPe,
        TransferMode::CuPm,
        TransferMode::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransferMode::Random => "random",
            TransferMode::PreOnly => "pre-only",
            TransferMode::CuPe => "cu-pe",
            TransferMode::CuPm => "cu-pm",
            TransferMode::Full => "full",
        }
    }

    /// Whether this mode is followed by MF fine-tuning.
    pub fn fine_tunes(self) -> bool {
        self != TransferMode::PreOnly
    }

    pub fn needs_alignment(self) -> bool {
        matches!(self, TransferMode::CuPe | TransferMode::CuPm)
    }
}

impl fmt::Display for TransferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        TransferMode::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown transfer mode '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    pub mode: TransferMode,
    /// Random rows are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// In `Full` mode, encode common users on their source subgraph instead.
    pub source_for_common_users: bool,
    pub sampler: SamplerConfig,
    pub seed: u64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            mode: TransferMode::Full,
            init_scale: 0.1,
            source_for_common_users: false,
            sampler: SamplerConfig::default(),
            seed: 0,
        }
    }
}

impl TransferConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return config_err("init_scale must be finite and non-negative");
        }
        self.sampler.validate()
    }
}

/// Source-domain graph and its user alignment with the target.
#[derive(Clone, Copy, Debug)]
pub struct SourceDomain<'a> {
    pub graph: &'a BipartiteGraph,
    pub alignment: &'a CommonUserAlignment,
}

fn random_table(nu: usize, ni: usize, d: usize, scale: f64, seed: u64) -> EmbeddingTable {
    let mut s = Stream::new(seed).derive(tag("random-init"));
    let users = DenseMatrix::from_fn(nu, d, |_, _| s.uniform(-scale, scale));
    let items = DenseMatrix::from_fn(ni, d, |_, _| s.uniform(-scale, scale));
    EmbeddingTable { users, items }
}

/// Encodes each `(row, node)` on `graph` in parallel; node streams are keyed by
/// flat index so results do not depend on which rows are requested.
fn encode_nodes(
    encoder: &EncoderParams,
    graph: &BipartiteGraph,
    nodes: &[NodeId],
    sampler: &SamplerConfig,
    root: &Stream,
) -> Result<Vec<Vec<f64>>> {
    nodes
        .par_iter()
        .map(|&n| {
            let mut s = root.derive(graph.flat_index(n) as u64);
            let sub = sample_rw_subgraph(graph, n, sampler, &mut s)?.with_features(encoder.d_in())?;
            encode(encoder, &sub)
        })
        .collect()
}

/// Builds the target embedding table for `cfg.mode`. Every mode starts from
/// the same seeded random table and overwrites only the rows it defines.
pub fn init_target_embeddings(
    encoder: &EncoderParams,
    target: &BipartiteGraph,
    source: Option<SourceDomain<'_>>,
    cfg: &TransferConfig,
) -> Result<EmbeddingTable> {
    cfg.validate()?;
    let d = encoder.dim();
    let mut table =
        random_table(target.num_users(), target.num_items(), d, cfg.init_scale, cfg.seed);
    let root = Stream::new(cfg.seed);
    let target_stream = root.derive(tag("transfer-target"));
    let source_stream = root.derive(tag("transfer-source"));

    let mode = cfg.mode;
    if mode.needs_alignment() && source.is_none() {
        return config_err(format!("transfer mode {mode} needs a common-user alignment"));
    }
    let use_source = mode == TransferMode::CuPe
        || (mode == TransferMode::Full && cfg.source_for_common_users && source.is_some());

    // Target-side rows.
    let target_nodes: Vec<NodeId> = match mode {
        TransferMode::Random | TransferMode::CuPe => Vec::new(),
        TransferMode::CuPm => source
            .map(|s| s.alignment.pairs.iter().map(|&(_, t)| NodeId::User(t)).collect())
            .unwrap_or_default(),
        TransferMode::PreOnly | TransferMode::Full => target.all_nodes().collect(),
    };
    let rows = encode_nodes(encoder, target, &target_nodes, &cfg.sampler, &target_stream)?;
    for (n, row) in target_nodes.iter().zip(rows) {
        put(&mut table, *n, &row)?;
    }

    // Source-side rows for common users.
    if use_source {
        let src = source.expect("checked above");
        for &(s, t) in &src.alignment.pairs {
            if t as usize >= target.num_users() || s as usize >= src.graph.num_users() {
                return Err(Error::Contract(format!("alignment pair ({s}, {t}) out of range")));
            }
        }
        let nodes: Vec<NodeId> = src.alignment.pairs.iter().map(|&(s, _)| NodeId::User(s)).collect();
        let rows = encode_nodes(encoder, src.graph, &nodes, &cfg.sampler, &source_stream)?;
        for (&(_, t), row) in src.alignment.pairs.iter().zip(rows) {
            put(&mut table, NodeId::User(t), &row)?;
        }
    }
    Ok(table)
}

fn put(table: &mut EmbeddingTable, node: NodeId, row: &[f64]) -> Result<()> {
    let dst = match node {
        NodeId::User(u) if (u as usize) < table.num_users() => table.users.row_mut(u as usize),
        NodeId::Item(i) if (i as usize) < table.num_items() => table.items.row_mut(i as usize),
        _ => return Err(Error::NodeNotFound(node)),
    };
    if dst.len() != row.len() {
        return shape_err("encoder width differs from the embedding table");
    }
    dst.copy_from_slice(row);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::init_encoder;
    use crate::graph::ego_network;

    fn graphs() -> (BipartiteGraph, BipartiteGraph, CommonUserAlignment) {
        let src = BipartiteGraph::from_edges(3, 2, &[(0, 0), (1, 0), (1, 1), (2, 1)]).unwrap();
        let tgt = BipartiteGraph::from_edges(2, 2, &[(0, 0), (0, 1), (1, 1)]).unwrap();
        (src, tgt, CommonUserAlignment { pairs: vec![(2, 1)] })
    }

    fn cfg(mode: TransferMode) -> TransferConfig {
        TransferConfig { mode, seed: 11, ..Default::default() }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in TransferMode::ALL {
            assert_eq!(m.name().parse::<TransferMode>().unwrap(), m);
        }
        assert_eq!("CU_PM".parse::<TransferMode>().unwrap(), TransferMode::CuPm);
        assert!("other".parse::<TransferMode>().is_err());
    }

    #[test]
    fn modes_share_random_rows() {
        let (src, tgt, al) = graphs();
        let enc = init_encoder(1, 6, 4, 2, 0.9).unwrap().query;
        let s = Some(SourceDomain { graph: &src, alignment: &al });
        let random = init_target_embeddings(&enc, &tgt, s, &cfg(TransferMode::Random)).unwrap();
        assert_eq!(random, init_target_embeddings(&enc, &tgt, None, &cfg(TransferMode::Random)).unwrap());
        for mode in [TransferMode::CuPe, TransferMode::CuPm] {
            let t = init_target_embeddings(&enc, &tgt, s, &cfg(mode)).unwrap();
            assert_eq!(t.items, random.items);
            assert_eq!(t.users.row(0), random.users.row(0));
            assert_ne!(t.users.row(1), random.users.row(1));
        }
    }

    #[test]
    fn empty_alignment_equals_random() {
        let (src, tgt, _) = graphs();
        let enc = init_encoder(1, 6, 4, 2, 0.9).unwrap().query;
        let none = CommonUserAlignment { pairs: vec![] };
        let s = Some(SourceDomain { graph: &src, alignment: &none });
        assert_eq!(
            init_target_embeddings(&enc, &tgt, s, &cfg(TransferMode::CuPm)).unwrap(),
            init_target_embeddings(&enc, &tgt, s, &cfg(TransferMode::Random)).unwrap()
        );
    }

    #[test]
    fn cu_modes_need_alignment() {
        let (_, tgt, _) = graphs();
        let enc = init_encoder(1, 6, 4, 2, 0.9).unwrap().query;
        let err = init_target_embeddings(&enc, &tgt, None, &cfg(TransferMode::CuPe));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn full_mode_on_single_edge_matches_encoder() {
        let g = BipartiteGraph::from_edges(1, 1, &[(0, 0)]).unwrap();
        let enc = init_encoder(2, 5, 3, 1, 0.9).unwrap().query;
        let t = init_target_embeddings(&enc, &g, None, &cfg(TransferMode::Full)).unwrap();
        for (node, row) in [(NodeId::User(0), t.users.row(0)), (NodeId::Item(0), t.items.row(0))] {
            let sub = ego_network(&g, node, 2).unwrap().with_features(5).unwrap();
            let expect = encode(&enc, &sub).unwrap();
            for (a, b) in row.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
