//! Random-walk-with-restart subgraph sampling inside an r-ego network.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::graph::bipartite::{BipartiteGraph, NodeId};
use crate::graph::ego::{induced_subgraph, EgoSubgraph};
use crate::rng::{tag, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Hop radius of the ego network the walk is confined to.
    pub r: usize,
    pub restart_prob: f64,
    /// Walk length; `None` means `64 · r`.
    pub max_walk_steps: Option<usize>,
    pub max_subgraph_nodes: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            r: 2,
            restart_prob: 0.8,
            max_walk_steps: None,
            max_subgraph_nodes: 128,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn walk_steps(&self) -> usize {
        self.max_walk_steps.unwrap_or(64 * self.r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return config_err("sampler radius r must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.restart_prob) {
            return config_err(format!("restart_prob {} outside [0, 1]", self.restart_prob));
        }
        if self.max_subgraph_nodes < 1 {
            return config_err("max_subgraph_nodes must be at least 1");
        }
        Ok(())
    }
}

/// Two subgraphs sampled around the same origin node.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgraphPair {
    pub query: EgoSubgraph,
    pub key: EgoSubgraph,
    pub origin: NodeId,
}

/// Walks from `node`, restarting with probability `restart_prob` per step and
/// whenever a step would leave the r-hop ball (walk depth is counted since the
/// last restart, which bounds shortest-path distance). Stops after the step
/// budget or once `max_subgraph_nodes` distinct nodes were visited. Returns the
/// subgraph induced by the visited set, ego first, in visit order.
pub fn sample_rw_subgraph(
    graph: &BipartiteGraph,
    node: NodeId,
    cfg: &SamplerConfig,
    stream: &mut Stream,
) -> Result<EgoSubgraph> {
    graph.check_node(node)?;
    cfg.validate()?;
    let mut visited = vec![node];
    let mut seen: HashSet<NodeId> = HashSet::from([node]);
    let cap = cfg.max_subgraph_nodes;
    let mut cur = node;
    let mut depth = 0usize;

    if graph.degree(node) > 0 {
        for _ in 0..cfg.walk_steps() {
            if visited.len() >= cap {
                break;
            }
            let restart = stream.next_f64() < cfg.restart_prob;
            let deg = graph.degree(cur);
            if restart || depth >= cfg.r || deg == 0 {
                cur = node;
                depth = 0;
                continue;
            }
            cur = graph.neighbor_at(cur, stream.index(deg));
            depth += 1;
            if seen.insert(cur) {
                visited.push(cur);
            }
        }
    }
    Ok(induced_subgraph(graph, node, &visited))
}

/// Query and key subgraphs drawn from independent child streams of `stream`.
pub fn make_positive_pair(
    graph: &BipartiteGraph,
    node: NodeId,
    cfg: &SamplerConfig,
    stream: &Stream,
) -> Result<SubgraphPair> {
    let query = sample_rw_subgraph(graph, node, cfg, &mut stream.derive(tag("query")))?;
    let key = sample_rw_subgraph(graph, node, cfg, &mut stream.derive(tag("key")))?;
    Ok(SubgraphPair { query, key, origin: node })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph() -> BipartiteGraph {
        BipartiteGraph::from_edges(3, 3, &[(0, 0), (1, 0), (1, 1), (2, 1), (2, 2)]).unwrap()
    }

    #[test]
    fn isolated_node_is_singleton() {
        let g = BipartiteGraph::from_edges(2, 1, &[(0, 0)]).unwrap();
        let cfg = SamplerConfig::default();
        let sub = sample_rw_subgraph(&g, NodeId::User(1), &cfg, &mut Stream::new(1)).unwrap();
        assert_eq!(sub.local_to_global, vec![NodeId::User(1)]);
        let pair = make_positive_pair(&g, NodeId::User(1), &cfg, &Stream::new(1)).unwrap();
        assert_eq!(pair.query, pair.key);
    }

    #[test]
    fn full_restart_is_singleton() {
        let cfg = SamplerConfig { restart_prob: 1.0, ..Default::default() };
        let sub = sample_rw_subgraph(&path_graph(), NodeId::User(1), &cfg, &mut Stream::new(3))
            .unwrap();
        assert_eq!(sub.len(), 1);
    }

    #[test]
    fn cap_is_respected() {
        let cfg = SamplerConfig {
            restart_prob: 0.0,
            max_subgraph_nodes: 2,
            r: 5,
            ..Default::default()
        };
        let sub = sample_rw_subgraph(&path_graph(), NodeId::User(0), &cfg, &mut Stream::new(3))
            .unwrap();
        assert_eq!(sub.len(), 2);
        assert!(sub.is_connected());
    }

    #[test]
    fn radius_one_never_leaves_neighbourhood() {
        let cfg = SamplerConfig { r: 1, restart_prob: 0.1, ..Default::default() };
        for seed in 0..20 {
            let sub =
                sample_rw_subgraph(&path_graph(), NodeId::User(1), &cfg, &mut Stream::new(seed))
                    .unwrap();
            for n in &sub.local_to_global {
                assert!(matches!(n, NodeId::User(1) | NodeId::Item(0) | NodeId::Item(1)));
            }
        }
    }

    #[test]
    fn invalid_config() {
        let g = path_graph();
        let bad = SamplerConfig { r: 0, ..Default::default() };
        assert!(sample_rw_subgraph(&g, NodeId::User(0), &bad, &mut Stream::new(0)).is_err());
        let bad = SamplerConfig { restart_prob: 1.5, ..Default::default() };
        assert!(sample_rw_subgraph(&g, NodeId::User(0), &bad, &mut Stream::new(0)).is_err());
    }
}
