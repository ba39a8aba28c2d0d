//! Momentum-contrast key queue and the InfoNCE objective.

use std::collections::VecDeque;

use crate::error::{config_err, shape_err, Error, Result};
use crate::numerics::{dot, log_sum_exp, norm};

pub const DEFAULT_QUEUE_CAPACITY: usize = 512;
const UNIT_NORM_TOL: f64 = 1e-6;

/// Fixed-capacity FIFO of unit-norm key embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct MoCoQueue {
    capacity: usize,
    dim: usize,
    keys: VecDeque<Vec<f64>>,
}

impl MoCoQueue {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 || dim == 0 {
            return config_err("queue capacity and key dimension must be positive");
        }
        Ok(MoCoQueue { capacity, dim, keys: VecDeque::with_capacity(capacity) })
    }

    /// Rebuilds a queue from stored keys, oldest first.
    pub fn from_keys(capacity: usize, dim: usize, keys: Vec<Vec<f64>>) -> Result<Self> {
        if keys.len() > capacity {
            return shape_err("more stored keys than queue capacity");
        }
        let mut q = MoCoQueue::new(capacity, dim)?;
        q.enqueue(&keys)?;
        Ok(q)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Oldest first.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.keys.iter().map(Vec::as_slice)
    }

    /// Appends `keys` in order, evicting the oldest entries past capacity. The
    /// whole batch is rejected if any key is not unit-norm.
    pub fn enqueue<K: AsRef<[f64]>>(&mut self, keys: &[K]) -> Result<()> {
        for k in keys {
            let k = k.as_ref();
            if k.len() != self.dim {
                return shape_err(format!("key of length {} for a {}-d queue", k.len(), self.dim));
            }
            let n = norm(k);
            if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::Numeric(format!("queued key has norm {n}, expected 1")));
            }
        }
        for k in keys {
            if self.keys.len() == self.capacity {
                self.keys.pop_front();
            }
            self.keys.push_back(k.as_ref().to_vec());
        }
        Ok(())
    }
}

/// InfoNCE for one query against its positive key and the queued negatives:
/// `−log(exp(q·k⁺/τ) / (exp(q·k⁺/τ) + Σₙ exp(q·n/τ)))`. Returns the loss and its
/// gradient with respect to `q` (keys are treated as constants).
pub fn infonce_loss(
    q: &[f64],
    k_pos: &[f64],
    queue: &MoCoQueue,
    tau: f64,
) -> Result<(f64, Vec<f64>)> {
    if !(tau > 0.0) {
        return config_err(format!("temperature must be positive, got {tau}"));
    }
    if q.len() != k_pos.len() || (!queue.is_empty() && q.len() != queue.dim()) {
        return shape_err("query, key and queue dimensions differ");
    }
    let mut logits = Vec::with_capacity(queue.len() + 1);
    logits.push(dot(q, k_pos) / tau);
    logits.extend(queue.iter().map(|n| dot(q, n) / tau));
    let lse = log_sum_exp(&logits)?;
    let loss = lse - logits[0];

    // ∂L/∂q = (Σⱼ pⱼ vⱼ − k⁺)/τ with p = softmax(logits), v₀ = k⁺.
    let mut grad: Vec<f64> = k_pos.iter().map(|k| k * ((logits[0] - lse).exp() - 1.0)).collect();
    for (n, &l) in queue.iter().zip(&logits[1..]) {
        let p = (l - lse).exp();
        for (g, v) in grad.iter_mut().zip(n) {
            *g += p * v;
        }
    }
    for g in &mut grad {
        *g /= tau;
    }
    Ok((loss, grad))
}
