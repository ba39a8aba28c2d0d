//! BPR objective, negative sampling and LightGCN propagation.

use std::collections::BTreeSet;

use crate::error::{config_err, shape_err, Error, Result};
use crate::finetune::table::EmbeddingTable;
use crate::graph::BipartiteGraph;
use crate::numerics::{axpy, dot, DenseMatrix};
use crate::rng::Stream;

/// `(user, positive item, negative item)`
pub type Triple = (u32, u32, u32);

#[derive(Clone, Debug)]
pub struct BprOutput {
    pub loss: f64,
    /// Dense gradient; only rows listed in `touched_*` are nonzero.
    pub grad: EmbeddingTable,
    pub touched_users: Vec<u32>,
    pub touched_items: Vec<u32>,
}

/// `−log σ(x)` without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `−Σ log σ(ŷ_ui − ŷ_uj) + λ‖Θ‖²` where `Θ` is the set of distinct rows
/// appearing in the batch.
pub fn bpr_loss(emb: &EmbeddingTable, triples: &[Triple], lambda: f64) -> Result<BprOutput> {
    if !(lambda >= 0.0) {
        return config_err(format!("L2 coefficient must be non-negative, got {lambda}"));
    }
    let (nu, ni) = (emb.num_users(), emb.num_items());
    let mut grad = EmbeddingTable::zeros(nu, ni, emb.dim());
    let mut users = BTreeSet::new();
    let mut items = BTreeSet::new();
    let mut loss = 0.0;
    let mut diff = vec![0.0; emb.dim()];
    for &(u, i, j) in triples {
        if u as usize >= nu || i as usize >= ni || j as usize >= ni {
            return Err(Error::Contract(format!("triple ({u}, {i}, {j}) out of range")));
        }
        let (eu, ei, ej) =
            (emb.users.row(u as usize), emb.items.row(i as usize), emb.items.row(j as usize));
        let x = dot(eu, ei) - dot(eu, ej);
        loss += neg_log_sigmoid(x);
        // d(−log σ(x))/dx = −σ(−x)
        let g = -sigmoid(-x);
        for ((d, a), b) in diff.iter_mut().zip(ei).zip(ej) {
            *d = a - b;
        }
        axpy(g, &diff, grad.users.row_mut(u as usize));
        axpy(g, eu, grad.items.row_mut(i as usize));
        axpy(-g, eu, grad.items.row_mut(j as usize));
        users.insert(u);
        items.insert(i);
        items.insert(j);
    }
    if lambda > 0.0 {
        for &u in &users {
            let e = emb.users.row(u as usize);
            loss += lambda * dot(e, e);
            axpy(2.0 * lambda, e, grad.users.row_mut(u as usize));
        }
        for &i in &items {
            let e = emb.items.row(i as usize);
            loss += lambda * dot(e, e);
            axpy(2.0 * lambda, e, grad.items.row_mut(i as usize));
        }
    }
    Ok(BprOutput {
        loss,
        grad,
        touched_users: users.into_iter().collect(),
        touched_items: items.into_iter().collect(),
    })
}

/// Checks `i ∈ N_u` and `j ∉ N_u` for every triple.
pub fn validate_triples(graph: &BipartiteGraph, triples: &[Triple]) -> Result<()> {
    for &(u, i, j) in triples {
        if u as usize >= graph.num_users()
            || !graph.has_edge(u, i)
            || j as usize >= graph.num_items()
            || graph.has_edge(u, j)
        {
            return Err(Error::Contract(format!(
                "triple ({u}, {i}, {j}) needs an observed positive and an unobserved negative"
            )));
        }
    }
    Ok(())
}

/// `count` items drawn uniformly from those `u` has not interacted with.
pub fn sample_negatives(
    graph: &BipartiteGraph,
    u: u32,
    count: usize,
    stream: &mut Stream,
) -> Result<Vec<u32>> {
    if u as usize >= graph.num_users() {
        return Err(Error::Contract(format!("user {u} out of range")));
    }
    let seen = graph.user_items(u);
    let n = graph.num_items();
    if seen.len() >= n {
        return Err(Error::NoNegativeAvailable(u));
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let j = stream.index(n) as u32;
        if seen.binary_search(&j).is_err() {
            out.push(j);
        }
    }
    Ok(out)
}

/// One symmetric-normalised propagation: `out_u = Σ_{i∈N_u} x_i/√(|N_u||N_i|)`
/// and likewise for items.
fn propagate_once(x: &EmbeddingTable, graph: &BipartiteGraph) -> EmbeddingTable {
    let d = x.dim();
    let mut users = DenseMatrix::zeros(graph.num_users(), d);
    let mut items = DenseMatrix::zeros(graph.num_items(), d);
    for u in 0..graph.num_users() as u32 {
        let du = graph.user_items(u).len() as f64;
        for &i in graph.user_items(u) {
            let w = 1.0 / (du * graph.item_users(i).len() as f64).sqrt();
            axpy(w, x.items.row(i as usize), users.row_mut(u as usize));
            axpy(w, x.users.row(u as usize), items.row_mut(i as usize));
        }
    }
    EmbeddingTable { users, items }
}

/// Mean of layers `0..=layers` of LightGCN propagation. The operator is
/// linear and symmetric, so it also maps output gradients to layer-0
/// gradients.
pub fn lightgcn_propagate(
    emb: &EmbeddingTable,
    graph: &BipartiteGraph,
    layers: usize,
) -> Result<EmbeddingTable> {
    if layers == 0 {
        return config_err("LightGCN propagation needs at least one layer");
    }
    if !emb.matches(graph) {
        return shape_err("embedding table does not match the graph");
    }
    let mut acc = emb.clone();
    let mut cur = emb.clone();
    for _ in 0..layers {
        cur = propagate_once(&cur, graph);
        acc.users.add_assign(&cur.users)?;
        acc.items.add_assign(&cur.items)?;
    }
    let s = 1.0 / (layers + 1) as f64;
    acc.users.scale(s);
    acc.items.scale(s);
    Ok(acc)
}
