//! Affine layers and ReLU multilayer perceptrons with hand-written backward passes.

use crate::error::{shape_err, Result};
use crate::numerics::matrix::DenseMatrix;
use crate::rng::Stream;

/// `y = x·W + b` with `W: [in × out]` and `b: [1 × out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: DenseMatrix,
    pub bias: DenseMatrix,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Linear {
            weight: DenseMatrix::zeros(input, output),
            bias: DenseMatrix::zeros(1, output),
        }
    }

    pub fn identity(n: usize) -> Self {
        Linear { weight: DenseMatrix::identity(n), bias: DenseMatrix::zeros(1, n) }
    }

    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`, zero bias.
    pub fn glorot(input: usize, output: usize, stream: &mut Stream) -> Self {
        let bound = glorot_bound(input, output);
        let weight = DenseMatrix::from_fn(input, output, |_, _| stream.uniform(-bound, bound));
        Linear { weight, bias: DenseMatrix::zeros(1, output) }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut y = x.matmul(&self.weight)?;
        let b = self.bias.row(0);
        for r in 0..y.rows() {
            for (v, bb) in y.row_mut(r).iter_mut().zip(b) {
                *v += bb;
            }
        }
        Ok(y)
    }

    /// Returns `dx` and accumulates parameter gradients into `grad`.
    pub fn backward(
        &self,
        x: &DenseMatrix,
        dy: &DenseMatrix,
        grad: &mut Linear,
    ) -> Result<DenseMatrix> {
        if dy.cols() != self.output_dim() || dy.rows() != x.rows() {
            return shape_err(format!(
                "linear backward: dy {:?} for input {:?} and weight {:?}",
                dy.shape(),
                x.shape(),
                self.weight.shape()
            ));
        }
        grad.weight.add_assign(&x.t_matmul(dy)?)?;
        let db = dy.column_sums();
        for (g, d) in grad.bias.row_mut(0).iter_mut().zip(db) {
            *g += d;
        }
        dy.matmul_t(&self.weight)
    }

    pub fn tensors(&self) -> [&DenseMatrix; 2] {
        [&self.weight, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut DenseMatrix; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Stack of affine layers with ReLU between layers, and optionally after the
/// last one.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Linear>,
    pub relu_output: bool,
}

/// Activations cached by [`mlp_forward`].
#[derive(Clone, Debug)]
pub struct MlpTape {
    /// Input to each layer.
    inputs: Vec<DenseMatrix>,
    /// Pre-activation output of each layer.
    pre: Vec<DenseMatrix>,
}

impl MlpParams {
    pub fn new(layers: Vec<Linear>, relu_output: bool) -> Result<Self> {
        if layers.is_empty() {
            return shape_err("MLP needs at least one layer");
        }
        for w in layers.windows(2) {
            if w[0].output_dim() != w[1].input_dim() {
                return shape_err(format!(
                    "MLP layer dims do not chain: {} -> {}",
                    w[0].output_dim(),
                    w[1].input_dim()
                ));
            }
        }
        Ok(MlpParams { layers, relu_output })
    }

    pub fn glorot(dims: &[usize], relu_output: bool, stream: &mut Stream) -> Self {
        let layers = dims.windows(2).map(|w| Linear::glorot(w[0], w[1], stream)).collect();
        MlpParams { layers, relu_output }
    }

    pub fn zeros_like(&self) -> Self {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Linear::zeros(l.input_dim(), l.output_dim()))
                .collect(),
            relu_output: self.relu_output,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    fn activated(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.relu_output
    }

    pub fn tensors(&self) -> Vec<&DenseMatrix> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}

fn relu_in_place(m: &mut DenseMatrix) {
    for v in m.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

pub fn mlp_forward(p: &MlpParams, x: &DenseMatrix) -> Result<(DenseMatrix, MlpTape)> {
    if x.cols() != p.input_dim() {
        return shape_err(format!(
            "MLP expects {} input columns, got {}",
            p.input_dim(),
            x.cols()
        ));
    }
    let mut inputs = Vec::with_capacity(p.layers.len());
    let mut pre = Vec::with_capacity(p.layers.len());
    let mut h = x.clone();
    for (i, layer) in p.layers.iter().enumerate() {
        let z = layer.forward(&h)?;
        inputs.push(h);
        let mut a = z.clone();
        if p.activated(i) {
            relu_in_place(&mut a);
        }
        pre.push(z);
        h = a;
    }
    Ok((h, MlpTape { inputs, pre }))
}

pub fn mlp_backward(
    p: &MlpParams,
    tape: &MlpTape,
    dy: &DenseMatrix,
) -> Result<(DenseMatrix, MlpParams)> {
    let mut grads = p.zeros_like();
    let dx = mlp_backward_accumulate(p, tape, dy, &mut grads)?;
    Ok((dx, grads))
}

/// Like [`mlp_backward`] but adds into existing gradient buffers.
pub fn mlp_backward_accumulate(
    p: &MlpParams,
    tape: &MlpTape,
    dy: &DenseMatrix,
    grads: &mut MlpParams,
) -> Result<DenseMatrix> {
    if tape.pre.len() != p.layers.len() {
        return shape_err("tape does not match MLP depth");
    }
    let last = &tape.pre[tape.pre.len() - 1];
    if dy.shape() != last.shape() {
        return shape_err(format!(
            "MLP backward: dy {:?} vs output {:?}",
            dy.shape(),
            last.shape()
        ));
    }
    let mut delta = dy.clone();
    for i in (0..p.layers.len()).rev() {
        if p.activated(i) {
            for (d, z) in delta.data_mut().iter_mut().zip(tape.pre[i].data()) {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        delta = p.layers[i].backward(&tape.inputs[i], &delta, &mut grads.layers[i])?;
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_mlp(dims: &[usize], relu_output: bool, seed: u64) -> MlpParams {
        let mut s = Stream::new(seed);
        let mut p = MlpParams::glorot(dims, relu_output, &mut s);
        for l in &mut p.layers {
            for b in l.bias.data_mut() {
                *b = s.uniform(-0.3, 0.3);
            }
        }
        p
    }

    fn random_input(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut s = Stream::new(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| s.uniform(-1.0, 1.0))
    }

    /// Straight-line reference evaluation, written without the layer helpers.
    fn reference_forward(p: &MlpParams, x: &DenseMatrix) -> DenseMatrix {
        let mut h: Vec<Vec<f64>> = (0..x.rows()).map(|r| x.row(r).to_vec()).collect();
        for (li, l) in p.layers.iter().enumerate() {
            let act = li + 1 < p.layers.len() || p.relu_output;
            h = h
                .iter()
                .map(|row| {
                    (0..l.output_dim())
                        .map(|o| {
                            let mut s = l.bias.get(0, o);
                            for (i, v) in row.iter().enumerate() {
                                s += v * l.weight.get(i, o);
                            }
                            if act { s.max(0.0) } else { s }
                        })
                        .collect()
                })
                .collect();
        }
        let cols = h[0].len();
        DenseMatrix::from_vec(h.len(), cols, h.concat()).unwrap()
    }

    #[test]
    fn identity_weights_pass_nonnegative_input() {
        let p = MlpParams::new(vec![Linear::identity(3), Linear::identity(3)], true).unwrap();
        let x = DenseMatrix::from_vec(2, 3, vec![0.0, 1.0, 2.0, 3.5, 0.25, 7.0]).unwrap();
        let (y, _) = mlp_forward(&p, &x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_weights_give_clipped_bias() {
        let mut l1 = Linear::zeros(3, 4);
        let mut l2 = Linear::zeros(4, 2);
        l1.bias = DenseMatrix::from_vec(1, 4, vec![1.0, -1.0, 2.0, 0.0]).unwrap();
        l2.bias = DenseMatrix::from_vec(1, 2, vec![0.5, -0.5]).unwrap();
        let p = MlpParams::new(vec![l1, l2], true).unwrap();
        let x = random_input(3, 3, 1);
        let (y, _) = mlp_forward(&p, &x).unwrap();
        for r in 0..3 {
            assert_eq!(y.row(r), &[0.5, 0.0]);
        }
    }

    #[test]
    fn forward_matches_reference() {
        for seed in 0..10 {
            let p = random_mlp(&[5, 7, 3], seed % 2 == 0, seed);
            let x = random_input(6, 5, seed + 100);
            let (y, _) = mlp_forward(&p, &x).unwrap();
            let r = reference_forward(&p, &x);
            for (a, b) in y.data().iter().zip(r.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_error() {
        let p = random_mlp(&[5, 7, 3], false, 0);
        assert!(mlp_forward(&p, &random_input(2, 4, 0)).is_err());
        assert!(MlpParams::new(vec![Linear::zeros(2, 3), Linear::zeros(4, 1)], false).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = random_mlp(&[4, 6, 2], true, 3);
        let x = random_input(5, 4, 4);
        let (y, tape) = mlp_forward(&p, &x).unwrap();
        let (dx, dp) = mlp_backward(&p, &tape, &DenseMatrix::zeros(y.rows(), y.cols())).unwrap();
        assert!(dx.data().iter().all(|v| *v == 0.0));
        assert!(dp.tensors().iter().all(|t| t.data().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn linear_network_backward_is_weight_transpose_chain() {
        // Positive weights, biases and inputs keep every ReLU in its linear regime.
        let mut s = Stream::new(11);
        let mut layers = Vec::new();
        for (i, o) in [(3, 4), (4, 2)] {
            layers.push(Linear {
                weight: DenseMatrix::from_fn(i, o, |_, _| s.uniform(0.1, 1.0)),
                bias: DenseMatrix::from_fn(1, o, |_, _| s.uniform(0.1, 1.0)),
            });
        }
        let p = MlpParams::new(layers, true).unwrap();
        let x = DenseMatrix::from_fn(2, 3, |_, _| s.uniform(0.1, 1.0));
        let (_, tape) = mlp_forward(&p, &x).unwrap();
        let dy = DenseMatrix::from_fn(2, 2, |_, _| s.uniform(-1.0, 1.0));
        let (dx, _) = mlp_backward(&p, &tape, &dy).unwrap();
        let expected = dy
            .matmul_t(&p.layers[1].weight)
            .unwrap()
            .matmul_t(&p.layers[0].weight)
            .unwrap();
        for (a, b) in dx.data().iter().zip(expected.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
