//! Attribute-free structural node features for sampled subgraphs.
//!
//! Row layout for a subgraph node: `[eigenvector block (d_in − 2) | log(1 + degree) | is_ego]`.
//! The eigenvector block holds the eigenvectors of the normalized Laplacian
//! with the smallest eigenvalues, one per column, zero-padded when the
//! subgraph has fewer nodes than columns. Each eigenvector is sign-fixed so
//! that its first entry (in local index order) with magnitude above `1e-12`
//! is positive. Subgraphs without edges get an all-zero block.

use crate::error::{shape_err, Result};
use crate::graph::ego::EgoSubgraph;
use crate::numerics::{topk_eigenvectors, DenseMatrix};

pub const MIN_FEATURE_WIDTH: usize = 3;

const SIGN_TOL: f64 = 1e-12;

pub fn subgraph_features(sub: &EgoSubgraph, d_in: usize) -> Result<DenseMatrix> {
    if d_in < MIN_FEATURE_WIDTH {
        return shape_err(format!("feature width must be at least 3, got {d_in}"));
    }
    let n = sub.len();
    let eig_cols = d_in - 2;
    let mut out = DenseMatrix::zeros(n, d_in);

    if sub.edge_count() > 0 {
        let k = eig_cols.min(n);
        let (_, vectors) = topk_eigenvectors(&sub.adjacency_matrix(), k)?;
        for c in 0..k {
            let flip = (0..n)
                .map(|r| vectors.get(r, c))
                .find(|v| v.abs() > SIGN_TOL)
                .is_some_and(|v| v < 0.0);
            let sign = if flip { -1.0 } else { 1.0 };
            for r in 0..n {
                out.set(r, c, sign * vectors.get(r, c));
            }
        }
    }
    for (r, nbrs) in sub.local_adj.iter().enumerate() {
        out.set(r, eig_cols, (1.0 + nbrs.len() as f64).ln());
        out.set(r, eig_cols + 1, if r == sub.ego_local { 1.0 } else { 0.0 });
    }
    Ok(out)
}
