//! Independent reference implementations and random-instance generators
//! shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use xdrec::finetune::EmbeddingTable;
use xdrec::graph::{BipartiteGraph, NodeId};
use xdrec::numerics::DenseMatrix;
use xdrec::rng::Stream;

/// Random bipartite edge list; every edge kept independently with prob `p`.
pub fn random_edges(nu: usize, ni: usize, p: f64, s: &mut Stream) -> Vec<(u32, u32)> {
    let mut e = Vec::new();
    for u in 0..nu as u32 {
        for i in 0..ni as u32 {
            if s.next_f64() < p {
                e.push((u, i));
            }
        }
    }
    e
}

/// Random graph with at least one edge.
pub fn random_graph(nu: usize, ni: usize, p: f64, s: &mut Stream) -> BipartiteGraph {
    let mut e = random_edges(nu, ni, p, s);
    if e.is_empty() {
        e.push((0, 0));
    }
    BipartiteGraph::from_edges(nu, ni, &e).unwrap()
}

pub fn random_matrix(r: usize, c: usize, scale: f64, s: &mut Stream) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| s.uniform(-scale, scale))
}

pub fn random_table(nu: usize, ni: usize, d: usize, s: &mut Stream) -> EmbeddingTable {
    EmbeddingTable::new(random_matrix(nu, d, 1.0, s), random_matrix(ni, d, 1.0, s)).unwrap()
}

pub fn random_vec(n: usize, s: &mut Stream) -> Vec<f64> {
    (0..n).map(|_| s.uniform(-1.0, 1.0)).collect()
}

pub fn unit_vec(n: usize, s: &mut Stream) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| s.normal()).collect();
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / len).collect()
}

/// `‖a − b‖ / (‖a‖ + ‖b‖)`, 0 when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central finite differences of `f` with respect to every entry of every
/// tensor reachable through `tensors`.
pub fn numeric_grad<P: Clone>(
    params: &P,
    tensors: impl Fn(&mut P) -> Vec<&mut DenseMatrix>,
    f: impl Fn(&P) -> f64,
    h: f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    let mut work = params.clone();
    let counts: Vec<usize> = tensors(&mut work).iter().map(|t| t.data().len()).collect();
    for (t, &n) in counts.iter().enumerate() {
        for k in 0..n {
            let orig = tensors(&mut work)[t].data()[k];
            tensors(&mut work)[t].data_mut()[k] = orig + h;
            let plus = f(&work);
            tensors(&mut work)[t].data_mut()[k] = orig - h;
            let minus = f(&work);
            tensors(&mut work)[t].data_mut()[k] = orig;
            out.push((plus - minus) / (2.0 * h));
        }
    }
    out
}

pub fn flatten(ts: Vec<&DenseMatrix>) -> Vec<f64> {
    ts.into_iter().flat_map(|t| t.data().to_vec()).collect()
}

/// Repeated deletion of under-degree nodes until nothing changes.
pub fn naive_k_core(edges: &[(u32, u32)], k_user: usize, k_item: usize) -> BTreeSet<(u32, u32)> {
    let mut e: BTreeSet<(u32, u32)> = edges.iter().copied().collect();
    loop {
        let mut du = std::collections::HashMap::new();
        let mut di = std::collections::HashMap::new();
        for &(u, i) in &e {
            *du.entry(u).or_insert(0usize) += 1;
            *di.entry(i).or_insert(0usize) += 1;
        }
        let next: BTreeSet<(u32, u32)> =
            e.iter().copied().filter(|(u, i)| du[u] >= k_user && di[i] >= k_item).collect();
        if next == e {
            return e;
        }
        e = next;
    }
}

pub fn flat(g: &BipartiteGraph, n: NodeId) -> usize {
    match n {
        NodeId::User(u) => u as usize,
        NodeId::Item(i) => g.num_users() + i as usize,
    }
}

pub fn unflat(g: &BipartiteGraph, k: usize) -> NodeId {
    if k < g.num_users() {
        NodeId::User(k as u32)
    } else {
        NodeId::Item((k - g.num_users()) as u32)
    }
}

/// All-pairs hop distances by Floyd-Warshall over the dense adjacency.
pub fn all_pairs_distances(g: &BipartiteGraph) -> Vec<Vec<usize>> {
    let n = g.num_nodes();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (k, row) in d.iter_mut().enumerate() {
        row[k] = 0;
    }
    for (u, i) in g.edges() {
        let (a, b) = (u as usize, g.num_users() + i as usize);
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for m in 0..n {
        for a in 0..n {
            if d[a][m] == inf {
                continue;
            }
            for b in 0..n {
                let via = d[a][m] + d[m][b];
                if via < d[a][b] {
                    d[a][b] = via;
                }
            }
        }
    }
    d
}

/// Dense `(U+I)×(U+I)` symmetric-normalised adjacency.
pub fn normalized_adjacency(g: &BipartiteGraph) -> DenseMatrix {
    let n = g.num_nodes();
    let mut a = DenseMatrix::zeros(n, n);
    for (u, i) in g.edges() {
        let du = g.degree(NodeId::User(u)) as f64;
        let di = g.degree(NodeId::Item(i)) as f64;
        let w = 1.0 / (du * di).sqrt();
        let (x, y) = (u as usize, g.num_users() + i as usize);
        a.set(x, y, w);
        a.set(y, x, w);
    }
    a
}

/// `(1/(L+1)) Σ_k Â^k E` with dense matrix powers.
pub fn dense_lightgcn(emb: &EmbeddingTable, g: &BipartiteGraph, layers: usize) -> EmbeddingTable {
    let nu = g.num_users();
    let d = emb.dim();
    let stacked = DenseMatrix::from_fn(g.num_nodes(), d, |r, c| {
        if r < nu {
            emb.users.get(r, c)
        } else {
            emb.items.get(r - nu, c)
        }
    });
    let a = normalized_adjacency(g);
    let mut acc = stacked.clone();
    let mut cur = stacked;
    for _ in 0..layers {
        cur = a.matmul(&cur).unwrap();
        acc.add_assign(&cur).unwrap();
    }
    acc.scale(1.0 / (layers + 1) as f64);
    EmbeddingTable::new(
        DenseMatrix::from_fn(nu, d, |r, c| acc.get(r, c)),
        DenseMatrix::from_fn(g.num_items(), d, |r, c| acc.get(nu + r, c)),
    )
    .unwrap()
}

/// Sorts every candidate by (score desc, index asc) and truncates.
pub fn full_sort_top_k(scores: &[f64], exclude: &HashSet<u32>, k: usize) -> Vec<u32> {
    let mut c: Vec<(f64, u32)> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| !exclude.contains(&(*i as u32)))
        .map(|(i, &s)| (s, i as u32))
        .collect();
    c.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    c.into_iter().take(k).map(|x| x.1).collect()
}

pub fn naive_recall(ranked: &[u32], relevant: &[u32], k: usize) -> f64 {
    let rel: HashSet<u32> = relevant.iter().copied().collect();
    let mut hits = 0;
    for i in ranked.iter().take(k) {
        if rel.contains(i) {
            hits += 1;
        }
    }
    hits as f64 / rel.len() as f64
}

pub fn naive_ap(ranked: &[u32], relevant: &[u32], k: usize) -> f64 {
    let rel: HashSet<u32> = relevant.iter().copied().collect();
    let mut total = 0.0;
    for pos in 0..k.min(ranked.len()) {
        if rel.contains(&ranked[pos]) {
            let hits_so_far = ranked[..=pos].iter().filter(|i| rel.contains(i)).count();
            total += hits_so_far as f64 / (pos + 1) as f64;
        }
    }
    total / rel.len().min(k) as f64
}
