//! Dense linear algebra, differentiable layers with explicit backward
//! passes, Adam, and a symmetric eigen-solver.

pub mod adam;
pub mod eigen;
pub mod matrix;
pub mod mlp;

pub use adam::{adam_step, AdamState};
pub use eigen::{log_sum_exp, normalized_laplacian, symmetric_eigen, topk_eigenvectors};
pub use matrix::{axpy, dot, norm, DenseMatrix};
pub use mlp::{glorot_bound, mlp_backward, mlp_forward, Linear, MlpParams, MlpTape};
