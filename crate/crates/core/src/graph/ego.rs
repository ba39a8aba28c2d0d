use std::collections::{HashMap, VecDeque};

use crate::error::Result;
use crate::graph::bipartite::{BipartiteGraph, NodeId};
use crate::graph::features::subgraph_features;
use crate::numerics::DenseMatrix;

/// Induced local subgraph around an ego node.
///
/// Local index 0 is not guaranteed to be the ego; use `ego_local`. Features
/// start with zero columns and are filled by [`EgoSubgraph::with_features`].
#[derive(Clone, Debug, PartialEq)]
pub struct EgoSubgraph {
    pub ego_local: usize,
    pub local_to_global: Vec<NodeId>,
    /// Sorted neighbour lists over local indices.
    pub local_adj: Vec<Vec<usize>>,
    pub features: DenseMatrix,
}

impl EgoSubgraph {
    pub fn len(&self) -> usize {
        self.local_to_global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local_to_global.is_empty()
    }

    pub fn ego(&self) -> NodeId {
        self.local_to_global[self.ego_local]
    }

    pub fn edge_count(&self) -> usize {
        self.local_adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.local_to_global.contains(&node)
    }

    pub fn adjacency_matrix(&self) -> DenseMatrix {
        let n = self.len();
        let mut a = DenseMatrix::zeros(n, n);
        for (v, nbrs) in self.local_adj.iter().enumerate() {
            for &w in nbrs {
                a.set(v, w, 1.0);
            }
        }
        a
    }

    /// Every local node reachable from the ego.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.len()];
        seen[self.ego_local] = true;
        let mut queue = VecDeque::from([self.ego_local]);
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &self.local_adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.len()
    }

    pub fn with_features(mut self, d_in: usize) -> Result<Self> {
        self.features = subgraph_features(&self, d_in)?;
        Ok(self)
    }

    /// Relabels local nodes: new local `k` is old local `perm[k]`. Feature rows
    /// move with their nodes.
    pub fn permuted(&self, perm: &[usize]) -> EgoSubgraph {
        let n = self.len();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let local_adj = perm
            .iter()
            .map(|&old| {
                let mut nb: Vec<usize> = self.local_adj[old].iter().map(|&w| inv[w]).collect();
                nb.sort_unstable();
                nb
            })
            .collect();
        let features = DenseMatrix::from_fn(n, self.features.cols(), |r, c| {
            self.features.get(perm[r], c)
        });
        EgoSubgraph {
            ego_local: inv[self.ego_local],
            local_to_global: perm.iter().map(|&old| self.local_to_global[old]).collect(),
            local_adj,
            features,
        }
    }
}

/// Subgraph induced by `nodes` (first occurrence order) in `graph`. `ego` must
/// be among `nodes`.
pub fn induced_subgraph(graph: &BipartiteGraph, ego: NodeId, nodes: &[NodeId]) -> EgoSubgraph {
    let local: HashMap<NodeId, usize> =
        nodes.iter().enumerate().map(|(k, &n)| (n, k)).collect();
    let local_adj = nodes
        .iter()
        .map(|&v| {
            let mut nb: Vec<usize> =
                graph.neighbors(v).filter_map(|w| local.get(&w).copied()).collect();
            nb.sort_unstable();
            nb
        })
        .collect();
    EgoSubgraph {
        ego_local: local[&ego],
        local_to_global: nodes.to_vec(),
        local_adj,
        features: DenseMatrix::zeros(nodes.len(), 0),
    }
}

/// Nodes within hop distance `r` of `node`, in BFS order, with distances.
pub fn bfs_ball(graph: &BipartiteGraph, node: NodeId, r: usize) -> Result<Vec<(NodeId, usize)>> {
    graph.check_node(node)?;
    let mut dist: HashMap<NodeId, usize> = HashMap::from([(node, 0)]);
    let mut order = vec![(node, 0)];
    let mut queue = VecDeque::from([node]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == r {
            continue;
        }
        for w in graph.neighbors(v) {
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(w) {
                e.insert(d + 1);
                order.push((w, d + 1));
                queue.push_back(w);
            }
        }
    }
    Ok(order)
}

/// The r-ego network: induced subgraph on all nodes at shortest-path distance
/// at most `r` from `node`. The ego has local index 0.
pub fn ego_network(graph: &BipartiteGraph, node: NodeId, r: usize) -> Result<EgoSubgraph> {
    let nodes: Vec<NodeId> = bfs_ball(graph, node, r)?.into_iter().map(|(n, _)| n).collect();
    Ok(induced_subgraph(graph, node, &nodes))
}
