//! Versioned binary encoder checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        8 bytes   "XDRENC\0\0"
//! version      u32       1
//! d_in         u32
//! d            u32
//! num_layers   u32
//! momentum     f64
//! rng_id       u32 length + UTF-8 bytes
//! tensor_count u32       per encoder
//! query tensors, then key tensors; each as rows u32, cols u32, rows·cols f64
//! ```
//!
//! Tensor order is [`EncoderParams::tensors`].

use std::io::{Read, Write};
use std::path::Path;

use crate::codec::{Reader, Writer};
use crate::encoder::gin::{EncoderParams, GinLayer};
use crate::encoder::pair::EncoderPair;
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Linear, MlpParams};
use crate::rng::RNG_ALGORITHM;

pub const ENCODER_MAGIC: &[u8; 8] = b"XDRENC\0\0";
pub const ENCODER_FORMAT_VERSION: u32 = 1;

pub fn write_encoder<W: Write>(pair: &EncoderPair, out: W) -> Result<W> {
    let mut w = Writer::new(out);
    let q = &pair.query;
    w.bytes(ENCODER_MAGIC)?;
    w.u32(ENCODER_FORMAT_VERSION)?;
    w.u32(q.d_in() as u32)?;
    w.u32(q.dim() as u32)?;
    w.u32(q.num_layers() as u32)?;
    w.f64(pair.momentum)?;
    w.str(RNG_ALGORITHM)?;
    let tensors = q.tensors();
    w.u32(tensors.len() as u32)?;
    for t in tensors.into_iter().chain(pair.key.tensors()) {
        w.matrix(t)?;
    }
    w.finish()
}

fn read_params<R: Read>(
    r: &mut Reader<R>,
    d_in: usize,
    d: usize,
    layers: usize,
    count: usize,
) -> Result<EncoderParams> {
    let tensors = (0..count).map(|_| r.matrix()).collect::<Result<Vec<_>>>()?;
    let mut it = tensors.into_iter();
    let mut next = |shape: (usize, usize)| -> Result<DenseMatrix> {
        let t = it.next().ok_or_else(|| Error::Format("missing tensor".into()))?;
        if t.shape() != shape {
            return Err(Error::Format(format!(
                "tensor shape {:?}, expected {:?}",
                t.shape(),
                shape
            )));
        }
        Ok(t)
    };
    let input = Linear { weight: next((d_in, d))?, bias: next((1, d))? };
    let mut gin = Vec::with_capacity(layers);
    for _ in 0..layers {
        let eps = next((1, 1))?;
        let l1 = Linear { weight: next((d, d))?, bias: next((1, d))? };
        let l2 = Linear { weight: next((d, d))?, bias: next((1, d))? };
        gin.push(GinLayer { mlp: MlpParams::new(vec![l1, l2], true)?, eps });
    }
    let readout = Linear { weight: next((d, d))?, bias: next((1, d))? };
    Ok(EncoderParams { input, layers: gin, readout })
}

pub fn read_encoder<R: Read>(input: R) -> Result<EncoderPair> {
    let mut r = Reader::new(input);
    r.expect_magic(ENCODER_MAGIC)?;
    let version = r.u32()?;
    if version != ENCODER_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "encoder checkpoint version {version}, this build reads {ENCODER_FORMAT_VERSION}"
        )));
    }
    let d_in = r.u32()? as usize;
    let d = r.u32()? as usize;
    let layers = r.u32()? as usize;
    let momentum = r.f64()?;
    let rng = r.str()?;
    if rng != RNG_ALGORITHM {
        return Err(Error::Format(format!(
            "checkpoint written with RNG '{rng}', this build uses '{RNG_ALGORITHM}'"
        )));
    }
    let count = r.u32()? as usize;
    if count != 2 + 5 * layers + 2 {
        return Err(Error::Format(format!("{count} tensors for a {layers}-layer encoder")));
    }
    let query = read_params(&mut r, d_in, d, layers, count)?;
    let key = read_params(&mut r, d_in, d, layers, count)?;
    let pair = EncoderPair { query, key, momentum };
    if !(0.0..1.0).contains(&momentum) || !pair.query.is_finite() || !pair.key.is_finite() {
        return Err(Error::Format("checkpoint holds invalid values".into()));
    }
    Ok(pair)
}

pub fn save_encoder(pair: &EncoderPair, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_encoder(pair, file)?;
    Ok(())
}

pub fn load_encoder(path: &Path) -> Result<EncoderPair> {
    let bytes = std::fs::read(path)?;
    let mut slice = bytes.as_slice();
    let pair = read_encoder(&mut slice)?;
    if !slice.is_empty() {
        return Err(Error::Format("trailing bytes after encoder checkpoint".into()));
    }
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::pair::init_encoder;

    #[test]
    fn round_trip() {
        let mut pair = init_encoder(3, 5, 8, 2, 0.99).unwrap();
        pair.key.layers[1].eps.set(0, 0, 0.25);
        let bytes = write_encoder(&pair, Vec::new()).unwrap();
        let back = read_encoder(bytes.as_slice()).unwrap();
        assert_eq!(back, pair);
    }

    #[test]
    fn version_mismatch_rejected() {
        let pair = init_encoder(3, 5, 8, 1, 0.99).unwrap();
        let mut bytes = write_encoder(&pair, Vec::new()).unwrap();
        bytes[8] = 2;
        assert!(matches!(read_encoder(bytes.as_slice()), Err(Error::Format(_))));
        let mut bad_magic = write_encoder(&pair, Vec::new()).unwrap();
        bad_magic[0] = b'Z';
        assert!(read_encoder(bad_magic.as_slice()).is_err());
    }

    #[test]
    fn truncated_rejected() {
        let pair = init_encoder(3, 5, 8, 1, 0.99).unwrap();
        let bytes = write_encoder(&pair, Vec::new()).unwrap();
        assert!(read_encoder(&bytes[..bytes.len() - 3]).is_err());
    }
}
