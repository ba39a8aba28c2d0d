use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::eval::split::InteractionSplit;
use crate::finetune::EmbeddingTable;
use crate::numerics::dot;

pub const DEFAULT_KS: [usize; 2] = [20, 40];

/// Higher score first, then lower item index.
fn rank_order(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Top-`k` items from precomputed scores, skipping the sorted `exclude` list.
pub fn top_k_from_scores(scores: &[f64], exclude: &[u32], k: usize) -> Vec<u32> {
    let mut cand: Vec<(f64, u32)> = Vec::with_capacity(scores.len());
    let mut ex = exclude.iter().peekable();
    for (i, &s) in scores.iter().enumerate() {
        let i = i as u32;
        while ex.peek().is_some_and(|&&e| e < i) {
            ex.next();
        }
        if ex.peek() == Some(&&i) {
            continue;
        }
        // `+ 0.0` folds -0.0 into 0.0 so the two tie under `total_cmp`.
        cand.push((s + 0.0, i));
    }
    if k == 0 {
        return Vec::new();
    }
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, rank_order);
        cand.truncate(k);
    }
    cand.sort_unstable_by(rank_order);
    cand.into_iter().map(|(_, i)| i).collect()
}

pub fn user_scores(emb: &EmbeddingTable, u: u32) -> Vec<f64> {
    let eu = emb.users.row(u as usize);
    (0..emb.num_items()).map(|i| dot(eu, emb.items.row(i))).collect()
}

/// Top-`k` items for user `u` by `e_uᵀe_i`, skipping `exclude` (sorted).
pub fn rank_items(emb: &EmbeddingTable, u: u32, exclude: &[u32], k: usize) -> Vec<u32> {
    top_k_from_scores(&user_scores(emb, u), exclude, k)
}

fn hits<'a>(ranked: &'a [u32], relevant: &'a [u32], k: usize) -> impl Iterator<Item = bool> + 'a {
    ranked.iter().take(k).map(move |i| relevant.contains(i))
}

/// `|top-k ∩ relevant| / |relevant|`; 0 for an empty relevant set.
pub fn recall_at_k(ranked: &[u32], relevant: &[u32], k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    hits(ranked, relevant, k).filter(|&h| h).count() as f64 / relevant.len() as f64
}

/// Truncated average precision normalised by `min(|relevant|, k)`.
pub fn map_at_k(ranked: &[u32], relevant: &[u32], k: usize) -> f64 {
    if relevant.is_empty() || k == 0 {
        return 0.0;
    }
    let mut found = 0usize;
    let mut sum = 0.0;
    for (pos, h) in hits(ranked, relevant, k).enumerate() {
        if h {
            found += 1;
            sum += found as f64 / (pos + 1) as f64;
        }
    }
    sum / relevant.len().min(k) as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ks: Vec<usize>,
    pub recall: Vec<f64>,
    pub map: Vec<f64>,
    pub users_evaluated: usize,
    pub fingerprint: String,
    pub seed: u64,
}

impl MetricsReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|p| self.recall[p])
    }

    pub fn map_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|p| self.map[p])
    }

    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (j, k) in self.ks.iter().enumerate() {
            s.push_str(&format!("recall@{k}={:.6}\n", self.recall[j]));
        }
        for (j, k) in self.ks.iter().enumerate() {
            s.push_str(&format!("map@{k}={:.6}\n", self.map[j]));
        }
        s.push_str(&format!("users_evaluated={}\n", self.users_evaluated));
        s.push_str(&format!("fingerprint={}\n", self.fingerprint));
        s.push_str(&format!("seed={}\n", self.seed));
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut recall = serde_json::Map::new();
        let mut map = serde_json::Map::new();
        for (j, k) in self.ks.iter().enumerate() {
            recall.insert(k.to_string(), self.recall[j].into());
            map.insert(k.to_string(), self.map[j].into());
        }
        serde_json::json!({
            "recall": recall,
            "map": map,
            "users_evaluated": self.users_evaluated,
            "fingerprint": self.fingerprint,
            "seed": self.seed,
        })
    }
}

/// Ranking metrics averaged over users with a nonempty relevant set.
/// `exclude[u]` and `relevant[u]` must be sorted.
pub fn evaluate_lists(
    emb: &EmbeddingTable,
    exclude: &[Vec<u32>],
    relevant: &[Vec<u32>],
    ks: &[usize],
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    if ks.is_empty() || ks.contains(&0) {
        return config_err("evaluation cutoffs must be positive");
    }
    let k_max = *ks.iter().max().unwrap();
    let per_user: Vec<(Vec<f64>, Vec<f64>)> = (0..emb.num_users())
        .into_par_iter()
        .filter(|&u| !relevant[u].is_empty())
        .map(|u| {
            let ranked = rank_items(emb, u as u32, &exclude[u], k_max);
            let rel = &relevant[u];
            (
                ks.iter().map(|&k| recall_at_k(&ranked, rel, k)).collect(),
                ks.iter().map(|&k| map_at_k(&ranked, rel, k)).collect(),
            )
        })
        .collect();
    let n = per_user.len();
    let mut recall = vec![0.0; ks.len()];
    let mut map = vec![0.0; ks.len()];
    for (r, m) in &per_user {
        for j in 0..ks.len() {
            recall[j] += r[j];
            map[j] += m[j];
        }
    }
    if n > 0 {
        for j in 0..ks.len() {
            recall[j] /= n as f64;
            map[j] /= n as f64;
        }
    }
    Ok((recall, map, n))
}

/// Test-set metrics; train and validation items are excluded from ranking.
pub fn evaluate(
    emb: &EmbeddingTable,
    split: &InteractionSplit,
    ks: &[usize],
    fingerprint: &str,
    seed: u64,
) -> Result<MetricsReport> {
    if emb.num_users() != split.num_users || emb.num_items() != split.num_items {
        return crate::error::shape_err("embedding table does not match the split's graph");
    }
    let (recall, map, users_evaluated) =
        evaluate_lists(emb, &split.known_items(), &split.test_items(), ks)?;
    Ok(MetricsReport {
        ks: ks.to_vec(),
        recall,
        map,
        users_evaluated,
        fingerprint: fingerprint.to_owned(),
        seed,
    })
}
