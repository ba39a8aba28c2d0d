use crate::error::{shape_err, Error, Result};
use crate::numerics::matrix::DenseMatrix;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Bias-corrected Adam. Moment buffers are allocated lazily on the first
/// step, one per parameter tensor, in the order the tensors are passed.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        AdamState {
            lr,
            beta1: BETA1,
            beta2: BETA2,
            eps: EPSILON,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    fn ensure_shapes(&mut self, params: &[&mut DenseMatrix]) -> Result<()> {
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| vec![0.0; p.data().len()]).collect();
            self.second_moment = self.first_moment.clone();
            return Ok(());
        }
        if self.first_moment.len() != params.len()
            || self
                .first_moment
                .iter()
                .zip(params)
                .any(|(m, p)| m.len() != p.data().len())
        {
            return shape_err("Adam moment buffers do not match parameter shapes");
        }
        Ok(())
    }
}

/// One Adam update. Rejects the whole step, leaving state untouched, if any
/// gradient entry is non-finite.
pub fn adam_step(
    state: &mut AdamState,
    mut params: Vec<&mut DenseMatrix>,
    grads: Vec<&DenseMatrix>,
) -> Result<()> {
    if params.len() != grads.len() {
        return shape_err(format!(
            "{} parameter tensors but {} gradients",
            params.len(),
            grads.len()
        ));
    }
    for (i, (p, g)) in params.iter().zip(&grads).enumerate() {
        if p.shape() != g.shape() {
            return shape_err(format!(
                "tensor {i}: parameter {:?} vs gradient {:?}",
                p.shape(),
                g.shape()
            ));
        }
        if !g.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient in tensor {i}")));
        }
    }
    state.ensure_shapes(&params)?;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(&grads)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        for (((pi, gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *pi -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
