//! Synthetic source/target interaction graphs with a shared user population.
//!
//! Users and items get Gaussian latent vectors plus a scalar activity
//! (users) or popularity (items) offset. Each user scores every item by
//! `⟨x_u, y_i⟩/√dim + b_i + noise` and keeps the items above its own
//! threshold, chosen so its degree is log-normal around `density · items`
//! with the activity offset as log-scale shift. Shared users reuse their
//! source latent vector and activity in the target domain. Each graph is then
//! reduced to the largest connected component of its 2-core.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::graph::bipartite::{build_graph, k_core, BipartiteGraph};
use crate::graph::ids::{align_common_users, CommonUserAlignment, IdMap};
use crate::rng::{tag, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub source_users: usize,
    pub source_items: usize,
    pub target_users: usize,
    pub target_items: usize,
    /// Fraction of target users that are also source users.
    pub shared_fraction: f64,
    pub latent_dim: usize,
    /// Requested fraction of user–item pairs that become edges.
    pub density: f64,
    /// Standard deviation of the user activity offset.
    pub activity_scale: f64,
    /// Standard deviation of the item popularity offset.
    pub popularity_scale: f64,
    /// Standard deviation of per-pair noise.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            source_users: 2000,
            source_items: 1000,
            target_users: 1500,
            target_items: 800,
            shared_fraction: 0.5,
            latent_dim: 8,
            density: 0.005,
            activity_scale: 0.5,
            popularity_scale: 0.5,
            noise_scale: 2.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.source_users, self.source_items, self.target_users, self.target_items]
            .contains(&0)
        {
            return config_err("synthetic domains need at least one user and one item");
        }
        if self.latent_dim == 0 {
            return config_err("latent_dim must be positive");
        }
        if !(0.0..=1.0).contains(&self.shared_fraction) {
            return config_err(format!("shared_fraction {} outside [0, 1]", self.shared_fraction));
        }
        if self.shared_fraction > 0.0
            && (self.shared_fraction * self.target_users as f64).round() as usize
                > self.source_users
        {
            return config_err("more shared users requested than the source domain has");
        }
        if !(self.density > 0.0 && self.density < 1.0) {
            return config_err(format!("density {} must lie in (0, 1)", self.density));
        }
        for (name, v) in [
            ("activity_scale", self.activity_scale),
            ("popularity_scale", self.popularity_scale),
            ("noise_scale", self.noise_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return config_err(format!("{name} must be finite and non-negative"));
            }
        }
        for (users, items) in [
            (self.source_users, self.source_items),
            (self.target_users, self.target_items),
        ] {
            if self.density * (items as f64) < 1.0 || items < 2 || users < 2 {
                return config_err(format!(
                    "density {} gives mean user degree below one for a {users}x{items} domain",
                    self.density
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthPair {
    pub source: BipartiteGraph,
    pub source_ids: IdMap,
    pub target: BipartiteGraph,
    pub target_ids: IdMap,
    pub alignment: CommonUserAlignment,
}

struct Population {
    latent: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

fn draw_population(n: usize, dim: usize, scale: f64, stream: &mut Stream) -> Population {
    let latent = (0..n).map(|_| (0..dim).map(|_| stream.normal()).collect()).collect();
    let offset = (0..n).map(|_| scale * stream.normal()).collect();
    Population { latent, offset }
}

/// Each user keeps its `d_u` best-scoring items, where `d_u` is log-normal
/// around the mean degree implied by `density` (at least 2) and the
/// user's activity offset shifts it. Returns `(user, item)` indices.
fn threshold_edges(
    users: &Population,
    items: &Population,
    density: f64,
    cfg: &SynthConfig,
    stream: &mut Stream,
) -> Vec<(usize, usize)> {
    let dim = cfg.latent_dim as f64;
    let ni = items.latent.len();
    let mean_degree = density * ni as f64;
    let spread = cfg.activity_scale;
    let mut edges = Vec::new();
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(ni);
    for (u, (xu, au)) in users.latent.iter().zip(&users.offset).enumerate() {
        let degree = (mean_degree * (au - 0.5 * spread * spread).exp()).round() as usize;
        let degree = degree.clamp(2, ni);
        scored.clear();
        for (i, (yi, bi)) in items.latent.iter().zip(&items.offset).enumerate() {
            let affinity: f64 = xu.iter().zip(yi).map(|(a, b)| a * b).sum::<f64>() / dim.sqrt();
            scored.push((affinity + bi + cfg.noise_scale * stream.normal(), i));
        }
        scored.select_nth_unstable_by(degree - 1, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut chosen: Vec<usize> = scored[..degree].iter().map(|&(_, i)| i).collect();
        chosen.sort_unstable();
        edges.extend(chosen.into_iter().map(|i| (u, i)));
    }
    edges
}

fn finish_domain(
    edges: &[(usize, usize)],
    user_name: impl Fn(usize) -> String,
    item_name: impl Fn(usize) -> String,
) -> Result<(BipartiteGraph, IdMap)> {
    let named: Vec<(String, String)> =
        edges.iter().map(|&(u, i)| (user_name(u), item_name(i))).collect();
    let (raw, raw_ids) = build_graph(&named)?;
    let core = k_core(&raw, 2, 2)?;
    let lcc = core.graph.largest_component();
    if lcc.graph.is_empty() {
        return config_err("synthetic domain is empty after 2-core peeling");
    }
    let ids = raw_ids
        .restrict(&core.kept_users, &core.kept_items)
        .restrict(&lcc.kept_users, &lcc.kept_items);
    let named: Vec<(String, String)> = lcc
        .graph
        .edges()
        .map(|(u, i)| (ids.user_name(u).to_owned(), ids.item_name(i).to_owned()))
        .collect();
    build_graph(&named)
}

pub fn generate_synthetic_pair(cfg: &SynthConfig) -> Result<SynthPair> {
    cfg.validate()?;
    let root = Stream::new(cfg.seed);
    let mut pop_stream = root.derive(tag("population"));
    let source_users =
        draw_population(cfg.source_users, cfg.latent_dim, cfg.activity_scale, &mut pop_stream);
    let source_items =
        draw_population(cfg.source_items, cfg.latent_dim, cfg.popularity_scale, &mut pop_stream);
    let mut target_users =
        draw_population(cfg.target_users, cfg.latent_dim, cfg.activity_scale, &mut pop_stream);
    let target_items =
        draw_population(cfg.target_items, cfg.latent_dim, cfg.popularity_scale, &mut pop_stream);

    // Target user t < n_shared is the source user shared_src[t].
    let n_shared = (cfg.shared_fraction * cfg.target_users as f64).round() as usize;
    let mut source_order: Vec<usize> = (0..cfg.source_users).collect();
    root.derive(tag("shared")).shuffle(&mut source_order);
    let shared_src = &source_order[..n_shared];
    for (t, &s) in shared_src.iter().enumerate() {
        target_users.latent[t] = source_users.latent[s].clone();
        target_users.offset[t] = source_users.offset[s];
    }

    let src_edges = threshold_edges(
        &source_users,
        &source_items,
        cfg.density,
        cfg,
        &mut root.derive(tag("source-noise")),
    );
    let tgt_edges = threshold_edges(
        &target_users,
        &target_items,
        cfg.density,
        cfg,
        &mut root.derive(tag("target-noise")),
    );

    let (source, source_ids) =
        finish_domain(&src_edges, |u| u.to_string(), |i| format!("s{i}"))?;
    let n_src = cfg.source_users;
    let (target, target_ids) = finish_domain(
        &tgt_edges,
        |t| {
            if t < n_shared { shared_src[t].to_string() } else { (n_src + t).to_string() }
        },
        |i| format!("t{i}"),
    )?;
    let alignment = align_common_users(&source_ids, &target_ids);
    Ok(SynthPair { source, source_ids, target, target_ids, alignment })
}

pub fn density(g: &BipartiteGraph) -> f64 {
    if g.num_users() == 0 || g.num_items() == 0 {
        return 0.0;
    }
    g.edge_count() as f64 / (g.num_users() * g.num_items()) as f64
}
