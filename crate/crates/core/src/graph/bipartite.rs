use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::ids::IdMap;

/// A node of the bipartite graph. Users and items live in separate index
/// spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    User(u32),
    Item(u32),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::User(u) => write!(f, "u{u}"),
            NodeId::Item(i) => write!(f, "i{i}"),
        }
    }
}

/// Immutable user–item interaction graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    user_adj: Vec<Vec<u32>>,
    item_adj: Vec<Vec<u32>>,
    edge_count: usize,
}

impl BipartiteGraph {
    /// Graph with no nodes and no edges.
    pub fn empty() -> Self {
        BipartiteGraph { user_adj: Vec::new(), item_adj: Vec::new(), edge_count: 0 }
    }

    /// Builds from dense indices. Duplicate edges collapse; an empty edge list is
    /// an error.
    pub fn from_edges(num_users: usize, num_items: usize, edges: &[(u32, u32)]) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        Self::from_edges_allow_empty(num_users, num_items, edges)
    }

    pub(crate) fn from_edges_allow_empty(
        num_users: usize,
        num_items: usize,
        edges: &[(u32, u32)],
    ) -> Result<Self> {
        let mut user_adj = vec![Vec::new(); num_users];
        let mut item_adj = vec![Vec::new(); num_items];
        for &(u, i) in edges {
            if u as usize >= num_users || i as usize >= num_items {
                return Err(Error::Contract(format!(
                    "edge ({u},{i}) out of range for {num_users} users and {num_items} items"
                )));
            }
            user_adj[u as usize].push(i);
            item_adj[i as usize].push(u);
        }
        for adj in user_adj.iter_mut().chain(item_adj.iter_mut()) {
            adj.sort_unstable();
            adj.dedup();
        }
        let edge_count = user_adj.iter().map(Vec::len).sum();
        Ok(BipartiteGraph { user_adj, item_adj, edge_count })
    }

    pub fn num_users(&self) -> usize {
        self.user_adj.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_adj.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_users() + self.num_items()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.edge_count == 0
    }

    pub fn user_items(&self, u: u32) -> &[u32] {
        &self.user_adj[u as usize]
    }

    pub fn item_users(&self, i: u32) -> &[u32] {
        &self.item_adj[i as usize]
    }

    pub fn contains(&self, node: NodeId) -> bool {
        match node {
            NodeId::User(u) => (u as usize) < self.num_users(),
            NodeId::Item(i) => (i as usize) < self.num_items(),
        }
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(Error::NodeNotFound(node))
        }
    }

    pub fn degree(&self, node: NodeId) -> usize {
        match node {
            NodeId::User(u) => self.user_adj[u as usize].len(),
            NodeId::Item(i) => self.item_adj[i as usize].len(),
        }
    }

    pub fn has_edge(&self, u: u32, i: u32) -> bool {
        self.user_adj
            .get(u as usize)
            .is_some_and(|adj| adj.binary_search(&i).is_ok())
    }

    /// Neighbours of `node`, tagged with the opposite side.
    pub fn neighbors(&self, node: NodeId) -> impl ExactSizeIterator<Item = NodeId> + '_ {
        let (adj, user_side) = match node {
            NodeId::User(u) => (&self.user_adj[u as usize], true),
            NodeId::Item(i) => (&self.item_adj[i as usize], false),
        };
        adj.iter().map(move |&x| if user_side { NodeId::Item(x) } else { NodeId::User(x) })
    }

    pub fn neighbor_at(&self, node: NodeId, k: usize) -> NodeId {
        match node {
            NodeId::User(u) => NodeId::Item(self.user_adj[u as usize][k]),
            NodeId::Item(i) => NodeId::User(self.item_adj[i as usize][k]),
        }
    }

    /// All edges in `(user, item)` order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.user_adj
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (u as u32, i)))
    }

    /// Dense index over both sides: users first, then items.
    pub fn flat_index(&self, node: NodeId) -> usize {
        match node {
            NodeId::User(u) => u as usize,
            NodeId::Item(i) => self.num_users() + i as usize,
        }
    }

    pub fn all_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.num_users() as u32)
            .map(NodeId::User)
            .chain((0..self.num_items() as u32).map(NodeId::Item))
    }

    /// Checks mirror consistency, sortedness and the edge count.
    pub fn validate(&self) -> Result<()> {
        let mut mirror = 0usize;
        for (u, items) in self.user_adj.iter().enumerate() {
            if items.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Contract(format!("user {u} adjacency not strictly sorted")));
            }
            for &i in items {
                let back = self.item_adj.get(i as usize).ok_or_else(|| {
                    Error::Contract(format!("user {u} points at missing item {i}"))
                })?;
                if back.binary_search(&(u as u32)).is_err() {
                    return Err(Error::Contract(format!("edge ({u},{i}) not mirrored")));
                }
            }
        }
        for (i, users) in self.item_adj.iter().enumerate() {
            if users.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Contract(format!("item {i} adjacency not strictly sorted")));
            }
            mirror += users.len();
        }
        let forward: usize = self.user_adj.iter().map(Vec::len).sum();
        if forward != self.edge_count || mirror != self.edge_count {
            return Err(Error::Contract(format!(
                "edge count {} vs {forward} user-side and {mirror} item-side",
                self.edge_count
            )));
        }
        Ok(())
    }

    /// Number of connected components containing at least one node.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut seen = vec![false; self.num_nodes()];
        let mut out = Vec::new();
        for start in self.all_nodes() {
            if seen[self.flat_index(start)] {
                continue;
            }
            seen[self.flat_index(start)] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for w in self.neighbors(v) {
                    let fi = self.flat_index(w);
                    if !seen[fi] {
                        seen[fi] = true;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// Keeps only the listed users and items, renumbering both sides in the
    /// given order.
    pub fn restrict(&self, users: &[u32], items: &[u32]) -> Filtered {
        let mut user_new = vec![u32::MAX; self.num_users()];
        let mut item_new = vec![u32::MAX; self.num_items()];
        for (k, &u) in users.iter().enumerate() {
            user_new[u as usize] = k as u32;
        }
        for (k, &i) in items.iter().enumerate() {
            item_new[i as usize] = k as u32;
        }
        let edges: Vec<(u32, u32)> = self
            .edges()
            .filter_map(|(u, i)| {
                let (nu, ni) = (user_new[u as usize], item_new[i as usize]);
                (nu != u32::MAX && ni != u32::MAX).then_some((nu, ni))
            })
            .collect();
        let graph = BipartiteGraph::from_edges_allow_empty(users.len(), items.len(), &edges)
            .expect("restricted edges are in range");
        Filtered { graph, kept_users: users.to_vec(), kept_items: items.to_vec() }
    }

    /// Largest connected component (ties broken by lowest first node).
    pub fn largest_component(&self) -> Filtered {
        let comps = self.components();
        let best = comps
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)));
        let Some((_, comp)) = best else {
            return self.restrict(&[], &[]);
        };
        let mut users: Vec<u32> = Vec::new();
        let mut items: Vec<u32> = Vec::new();
        for n in comp {
            match *n {
                NodeId::User(u) => users.push(u),
                NodeId::Item(i) => items.push(i),
            }
        }
        users.sort_unstable();
        items.sort_unstable();
        self.restrict(&users, &items)
    }
}

/// A subgraph with renumbered nodes and the original index of each kept node.
#[derive(Clone, Debug)]
pub struct Filtered {
    pub graph: BipartiteGraph,
    pub kept_users: Vec<u32>,
    pub kept_items: Vec<u32>,
}

/// Builds a graph from external string IDs. Indices are assigned in sorted ID
/// order (numerically when an ID parses as an integer), so the result does not
/// depend on input order.
pub fn build_graph<S: AsRef<str>>(edges: &[(S, S)]) -> Result<(BipartiteGraph, IdMap)> {
    if edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let users: BTreeSet<&str> = edges.iter().map(|(u, _)| u.as_ref()).collect();
    let items: BTreeSet<&str> = edges.iter().map(|(_, i)| i.as_ref()).collect();
    let ids = IdMap::from_ids(users, items);
    let dense: Vec<(u32, u32)> = edges
        .iter()
        .map(|(u, i)| {
            (
                ids.user_index(u.as_ref()).expect("user registered"),
                ids.item_index(i.as_ref()).expect("item registered"),
            )
        })
        .collect();
    let graph = BipartiteGraph::from_edges(ids.num_users(), ids.num_items(), &dense)?;
    Ok((graph, ids))
}

/// Iterative peeling to the maximal subgraph where every user has degree at
/// least `k_user` and every item at least `k_item`. Nodes left without edges
/// are dropped.
pub fn k_core(graph: &BipartiteGraph, k_user: usize, k_item: usize) -> Result<Filtered> {
    if k_user == 0 || k_item == 0 {
        return Err(Error::Config("k-core thresholds must be at least 1".into()));
    }
    let nu = graph.num_users();
    let mut degree: Vec<usize> = graph.all_nodes().map(|n| graph.degree(n)).collect();
    let mut removed = vec![false; graph.num_nodes()];
    let threshold = |n: NodeId| match n {
        NodeId::User(_) => k_user,
        NodeId::Item(_) => k_item,
    };
    let node_of = |fi: usize| {
        if fi < nu { NodeId::User(fi as u32) } else { NodeId::Item((fi - nu) as u32) }
    };
    let mut stack: Vec<usize> = (0..graph.num_nodes())
        .filter(|&fi| degree[fi] < threshold(node_of(fi)))
        .collect();
    for &fi in &stack {
        removed[fi] = true;
    }
    while let Some(fi) = stack.pop() {
        for w in graph.neighbors(node_of(fi)) {
            let wi = graph.flat_index(w);
            if removed[wi] {
                continue;
            }
            degree[wi] -= 1;
            if degree[wi] < threshold(w) {
                removed[wi] = true;
                stack.push(wi);
            }
        }
    }
    let users: Vec<u32> = (0..nu).filter(|&u| !removed[u]).map(|u| u as u32).collect();
    let items: Vec<u32> = (0..graph.num_items())
        .filter(|&i| !removed[nu + i])
        .map(|i| i as u32)
        .collect();
    Ok(graph.restrict(&users, &items))
}
