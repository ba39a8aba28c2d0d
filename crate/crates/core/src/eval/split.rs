use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::graph::BipartiteGraph;
use crate::rng::{tag, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Fraction of all edges held out for testing.
    pub test_fraction: f64,
    /// Fraction of the non-test edges held out for validation.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { test_fraction: 0.2, validation_fraction: 0.1, seed: 0 }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("test_fraction", self.test_fraction), ("validation_fraction", self.validation_fraction)]
        {
            if !(0.0..=1.0).contains(&v) {
                return config_err(format!("{name} {v} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Disjoint train / validation / test partition of a graph's edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionSplit {
    pub num_users: usize,
    pub num_items: usize,
    pub train: Vec<(u32, u32)>,
    pub validation: Vec<(u32, u32)>,
    pub test: Vec<(u32, u32)>,
}

/// Per-user sorted item lists for an edge set.
pub fn items_by_user(num_users: usize, edges: &[(u32, u32)]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new(); num_users];
    for &(u, i) in edges {
        out[u as usize].push(i);
    }
    for v in &mut out {
        v.sort_unstable();
    }
    out
}

impl InteractionSplit {
    pub fn train_graph(&self) -> Result<BipartiteGraph> {
        BipartiteGraph::from_edges_allow_empty(self.num_users, self.num_items, &self.train)
    }

    pub fn train_items(&self) -> Vec<Vec<u32>> {
        items_by_user(self.num_users, &self.train)
    }

    pub fn validation_items(&self) -> Vec<Vec<u32>> {
        items_by_user(self.num_users, &self.validation)
    }

    pub fn test_items(&self) -> Vec<Vec<u32>> {
        items_by_user(self.num_users, &self.test)
    }

    /// Items hidden from test-time ranking: train ∪ validation.
    pub fn known_items(&self) -> Vec<Vec<u32>> {
        let mut edges = self.train.clone();
        edges.extend_from_slice(&self.validation);
        items_by_user(self.num_users, &edges)
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Uniform edge-level split. A user left with no training edge gets one back
/// from validation if possible, otherwise from test (the lowest item index).
pub fn split_interactions(graph: &BipartiteGraph, cfg: &SplitConfig) -> Result<InteractionSplit> {
    cfg.validate()?;
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut edges: Vec<(u32, u32)> = graph.edges().collect();
    Stream::new(cfg.seed).derive(tag("split")).shuffle(&mut edges);
    let n_test = (cfg.test_fraction * edges.len() as f64).round() as usize;
    let rest = edges.len() - n_test;
    let n_val = (cfg.validation_fraction * rest as f64).round() as usize;
    let mut test = edges[..n_test].to_vec();
    let mut validation = edges[n_test..n_test + n_val].to_vec();
    let mut train = edges[n_test + n_val..].to_vec();

    let mut has_train = vec![false; graph.num_users()];
    for &(u, _) in &train {
        has_train[u as usize] = true;
    }
    for held in [&mut validation, &mut test] {
        held.sort_unstable();
        let mut kept = Vec::with_capacity(held.len());
        for &(u, i) in held.iter() {
            if has_train[u as usize] {
                kept.push((u, i));
            } else {
                has_train[u as usize] = true;
                train.push((u, i));
            }
        }
        *held = kept;
    }
    train.sort_unstable();
    Ok(InteractionSplit {
        num_users: graph.num_users(),
        num_items: graph.num_items(),
        train,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star() -> BipartiteGraph {
        let edges: Vec<(u32, u32)> = (0..10).map(|k| (k % 3, k)).collect();
        BipartiteGraph::from_edges(3, 10, &edges).unwrap()
    }

    #[test]
    fn partition_is_exact_and_users_trainable() {
        let g = star();
        let s = split_interactions(&g, &SplitConfig::default()).unwrap();
        let mut all: Vec<_> =
            s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, g.edges().collect::<Vec<_>>());
        assert!(s.test.len() <= 2);
        let train = s.train_items();
        for &(u, _) in s.test.iter().chain(&s.validation) {
            assert!(!train[u as usize].is_empty());
        }
    }

    #[test]
    fn no_test_fraction_gives_empty_test() {
        let cfg = SplitConfig { test_fraction: 0.0, ..Default::default() };
        assert!(split_interactions(&star(), &cfg).unwrap().test.is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = SplitConfig { seed: 9, ..Default::default() };
        assert_eq!(split_interactions(&star(), &cfg).unwrap(), split_interactions(&star(), &cfg).unwrap());
    }

    #[test]
    fn single_edge_user_goes_to_train() {
        let g = BipartiteGraph::from_edges(1, 1, &[(0, 0)]).unwrap();
        let cfg = SplitConfig { test_fraction: 1.0, ..Default::default() };
        let s = split_interactions(&g, &cfg).unwrap();
        assert_eq!(s.train, vec![(0, 0)]);
        assert!(s.test.is_empty());
    }
}
