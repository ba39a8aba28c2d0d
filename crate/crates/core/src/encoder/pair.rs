use crate::encoder::gin::EncoderParams;
use crate::error::{config_err, shape_err, Result};
use crate::rng::{tag, Stream};

pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_LAYERS: usize = 3;
pub const DEFAULT_MOMENTUM: f64 = 0.999;

/// Query encoder (gradient-trained) and key encoder (momentum copy).
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderPair {
    pub query: EncoderParams,
    pub key: EncoderParams,
    pub momentum: f64,
}

impl EncoderPair {
    pub fn new(query: EncoderParams, momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return config_err(format!("momentum {momentum} outside [0, 1)"));
        }
        Ok(EncoderPair { key: query.clone(), query, momentum })
    }
}

/// `θ_k ← m·θ_k + (1−m)·θ_q` for every tensor.
pub fn momentum_update(pair: &mut EncoderPair) -> Result<()> {
    let m = pair.momentum;
    let query = pair.query.tensors();
    let key = pair.key.tensors_mut();
    if query.len() != key.len() {
        return shape_err("query and key encoders have different layouts");
    }
    for (k, q) in key.into_iter().zip(query) {
        if k.shape() != q.shape() {
            return shape_err("query and key tensor shapes differ");
        }
        for (kv, qv) in k.data_mut().iter_mut().zip(q.data()) {
            *kv = m * *kv + (1.0 - m) * qv;
        }
    }
    Ok(())
}

/// Glorot-initialized query encoder with the key as an exact copy.
pub fn init_encoder(
    seed: u64,
    d_in: usize,
    d: usize,
    num_layers: usize,
    momentum: f64,
) -> Result<EncoderPair> {
    if d_in == 0 || d == 0 || num_layers == 0 {
        return config_err("encoder dimensions and depth must be positive");
    }
    let mut stream = Stream::new(seed).derive(tag("encoder-init"));
    EncoderPair::new(EncoderParams::glorot(d_in, d, num_layers, &mut stream), momentum)
}
