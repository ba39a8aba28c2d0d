//! GIN subgraph encoder with an explicit backward pass.
//!
//! Forward: `H₀ = X·W_in + b_in`, then per layer `H ← MLP((1+ε)H + A·H)`
//! (MLP = affine, ReLU, affine, ReLU), mean-pool the rows, apply the readout
//! affine and L2-normalize.

use crate::error::{shape_err, Result};
use crate::graph::EgoSubgraph;
use crate::numerics::mlp::mlp_backward_accumulate;
use crate::numerics::{axpy, mlp_forward, norm, DenseMatrix, Linear, MlpParams, MlpTape};
use crate::rng::Stream;

#[derive(Clone, Debug, PartialEq)]
pub struct GinLayer {
    pub mlp: MlpParams,
    /// Learnable self-weight ε as a 1×1 tensor.
    pub eps: DenseMatrix,
}

impl GinLayer {
    pub fn eps_value(&self) -> f64 {
        self.eps.get(0, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub input: Linear,
    pub layers: Vec<GinLayer>,
    pub readout: Linear,
}

impl EncoderParams {
    /// Glorot-uniform weights, zero biases, ε = 0.
    pub fn glorot(d_in: usize, d: usize, num_layers: usize, stream: &mut Stream) -> Self {
        let input = Linear::glorot(d_in, d, stream);
        let layers = (0..num_layers)
            .map(|_| GinLayer {
                mlp: MlpParams::glorot(&[d, d, d], true, stream),
                eps: DenseMatrix::zeros(1, 1),
            })
            .collect();
        let readout = Linear::glorot(d, d, stream);
        EncoderParams { input, layers, readout }
    }

    /// Identity projections and MLPs, ε = 0. Needs `d_in == d`.
    pub fn identity(d: usize, num_layers: usize) -> Self {
        EncoderParams {
            input: Linear::identity(d),
            layers: (0..num_layers)
                .map(|_| GinLayer {
                    mlp: MlpParams::new(vec![Linear::identity(d), Linear::identity(d)], true)
                        .expect("square layers chain"),
                    eps: DenseMatrix::zeros(1, 1),
                })
                .collect(),
            readout: Linear::identity(d),
        }
    }

    pub fn zeros_like(&self) -> Self {
        EncoderParams {
            input: Linear::zeros(self.input.input_dim(), self.input.output_dim()),
            layers: self
                .layers
                .iter()
                .map(|l| GinLayer { mlp: l.mlp.zeros_like(), eps: DenseMatrix::zeros(1, 1) })
                .collect(),
            readout: Linear::zeros(self.readout.input_dim(), self.readout.output_dim()),
        }
    }

    pub fn d_in(&self) -> usize {
        self.input.input_dim()
    }

    pub fn dim(&self) -> usize {
        self.readout.output_dim()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// All tensors in declared order: input projection, then per layer ε and
    /// the MLP's weights and biases, then the readout.
    pub fn tensors(&self) -> Vec<&DenseMatrix> {
        let mut out: Vec<&DenseMatrix> = self.input.tensors().to_vec();
        for l in &self.layers {
            out.push(&l.eps);
            out.extend(l.mlp.tensors());
        }
        out.extend(self.readout.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut out: Vec<&mut DenseMatrix> = self.input.tensors_mut().into_iter().collect();
        for l in &mut self.layers {
            out.push(&mut l.eps);
            out.extend(l.mlp.tensors_mut());
        }
        out.extend(self.readout.tensors_mut());
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.data().len()).sum()
    }

    pub fn add_assign(&mut self, other: &EncoderParams) -> Result<()> {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.scale(s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

/// Intermediate values cached by [`gin_forward`].
#[derive(Clone, Debug)]
pub struct GinTape {
    features: DenseMatrix,
    adj: Vec<Vec<usize>>,
    /// Node states entering each GIN layer.
    layer_inputs: Vec<DenseMatrix>,
    mlp_tapes: Vec<MlpTape>,
    pooled: DenseMatrix,
    embedding: Vec<f64>,
    pre_norm: f64,
}

fn aggregate(h: &DenseMatrix, adj: &[Vec<usize>], self_weight: f64) -> DenseMatrix {
    let mut out = h.clone();
    out.scale(self_weight);
    for (v, nbrs) in adj.iter().enumerate() {
        for &w in nbrs {
            axpy(1.0, h.row(w), out.row_mut(v));
        }
    }
    out
}

pub fn gin_forward(p: &EncoderParams, sub: &EgoSubgraph) -> Result<(Vec<f64>, GinTape)> {
    let x = &sub.features;
    if x.cols() != p.d_in() {
        return shape_err(format!(
            "encoder expects {} feature columns, subgraph has {}",
            p.d_in(),
            x.cols()
        ));
    }
    if x.rows() == 0 || x.rows() != sub.len() {
        return shape_err("feature rows must match a nonempty subgraph");
    }
    let mut h = p.input.forward(x)?;
    let mut layer_inputs = Vec::with_capacity(p.layers.len());
    let mut mlp_tapes = Vec::with_capacity(p.layers.len());
    for layer in &p.layers {
        let agg = aggregate(&h, &sub.local_adj, 1.0 + layer.eps_value());
        let (next, tape) = mlp_forward(&layer.mlp, &agg)?;
        layer_inputs.push(h);
        mlp_tapes.push(tape);
        h = next;
    }
    let mut pooled = DenseMatrix::from_vec(1, h.cols(), h.column_sums())?;
    pooled.scale(1.0 / h.rows() as f64);
    let z = p.readout.forward(&pooled)?.into_vec();
    let pre_norm = norm(&z);
    let embedding: Vec<f64> = if pre_norm > 0.0 {
        z.iter().map(|v| v / pre_norm).collect()
    } else {
        vec![0.0; z.len()]
    };
    let tape = GinTape {
        features: x.clone(),
        adj: sub.local_adj.clone(),
        layer_inputs,
        mlp_tapes,
        pooled,
        embedding: embedding.clone(),
        pre_norm,
    };
    Ok((embedding, tape))
}

/// Gradients of all encoder parameters given `∂L/∂embedding`.
pub fn gin_backward(p: &EncoderParams, tape: &GinTape, d_embedding: &[f64]) -> Result<EncoderParams> {
    let mut grads = p.zeros_like();
    gin_backward_accumulate(p, tape, d_embedding, &mut grads)?;
    Ok(grads)
}

/// Like [`gin_backward`] but adds into `grads`.
pub fn gin_backward_accumulate(
    p: &EncoderParams,
    tape: &GinTape,
    d_embedding: &[f64],
    grads: &mut EncoderParams,
) -> Result<()> {
    let d = p.dim();
    if d_embedding.len() != d || tape.embedding.len() != d {
        return shape_err(format!(
            "embedding gradient has length {}, encoder dimension is {d}",
            d_embedding.len()
        ));
    }
    if tape.layer_inputs.len() != p.layers.len() {
        return shape_err("tape does not match encoder depth");
    }
    // y = z/‖z‖  ⇒  dz = (dy − y·(yᵀdy)) / ‖z‖
    let mut dz = vec![0.0; d];
    if tape.pre_norm > 0.0 {
        let proj: f64 = tape.embedding.iter().zip(d_embedding).map(|(a, b)| a * b).sum();
        for k in 0..d {
            dz[k] = (d_embedding[k] - tape.embedding[k] * proj) / tape.pre_norm;
        }
    }
    let dz = DenseMatrix::from_vec(1, d, dz)?;
    let dpooled = p.readout.backward(&tape.pooled, &dz, &mut grads.readout)?;

    let n = tape.features.rows();
    let inv_n = 1.0 / n as f64;
    let mut dh = DenseMatrix::from_fn(n, dpooled.cols(), |_, c| dpooled.get(0, c) * inv_n);

    for l in (0..p.layers.len()).rev() {
        let layer = &p.layers[l];
        let dagg = mlp_backward_accumulate(
            &layer.mlp,
            &tape.mlp_tapes[l],
            &dh,
            &mut grads.layers[l].mlp,
        )?;
        let h_in = &tape.layer_inputs[l];
        let deps: f64 = dagg.data().iter().zip(h_in.data()).map(|(a, b)| a * b).sum();
        let cur = grads.layers[l].eps.get(0, 0);
        grads.layers[l].eps.set(0, 0, cur + deps);
        // Adjacency is symmetric, so Aᵀ·dagg = A·dagg.
        dh = aggregate(&dagg, &tape.adj, 1.0 + layer.eps_value());
    }
    p.input.backward(&tape.features, &dh, &mut grads.input)?;
    Ok(())
}

/// Embedding without keeping the tape.
pub fn encode(p: &EncoderParams, sub: &EgoSubgraph) -> Result<Vec<f64>> {
    gin_forward(p, sub).map(|(e, _)| e)
}
