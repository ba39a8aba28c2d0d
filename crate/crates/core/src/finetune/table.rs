use std::io::{Read, Write};
use std::path::Path;

use crate::codec::{Reader, Writer};
use crate::error::{shape_err, Error, Result};
use crate::graph::{BipartiteGraph, IdMap};
use crate::numerics::{dot, DenseMatrix};

/// Per-node embeddings of one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub users: DenseMatrix,
    pub items: DenseMatrix,
}

pub const TABLE_MAGIC: &[u8; 8] = b"XDRTAB\0\0";
pub const TABLE_FORMAT_VERSION: u32 = 1;

impl EmbeddingTable {
    pub fn zeros(num_users: usize, num_items: usize, dim: usize) -> Self {
        EmbeddingTable {
            users: DenseMatrix::zeros(num_users, dim),
            items: DenseMatrix::zeros(num_items, dim),
        }
    }

    pub fn new(users: DenseMatrix, items: DenseMatrix) -> Result<Self> {
        if users.cols() != items.cols() {
            return shape_err("user and item embeddings differ in width");
        }
        Ok(EmbeddingTable { users, items })
    }

    pub fn dim(&self) -> usize {
        self.users.cols()
    }

    pub fn num_users(&self) -> usize {
        self.users.rows()
    }

    pub fn num_items(&self) -> usize {
        self.items.rows()
    }

    pub fn matches(&self, graph: &BipartiteGraph) -> bool {
        self.num_users() == graph.num_users() && self.num_items() == graph.num_items()
    }

    pub fn is_finite(&self) -> bool {
        self.users.is_finite() && self.items.is_finite()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        vec![&mut self.users, &mut self.items]
    }

    pub fn tensors(&self) -> Vec<&DenseMatrix> {
        vec![&self.users, &self.items]
    }

    /// `α·self + β·other`
    pub fn combine(&self, alpha: f64, other: &EmbeddingTable, beta: f64) -> Result<EmbeddingTable> {
        if self.users.shape() != other.users.shape() || self.items.shape() != other.items.shape() {
            return shape_err("embedding tables differ in shape");
        }
        let mix = |a: &DenseMatrix, b: &DenseMatrix| {
            DenseMatrix::from_fn(a.rows(), a.cols(), |r, c| alpha * a.get(r, c) + beta * b.get(r, c))
        };
        Ok(EmbeddingTable { users: mix(&self.users, &other.users), items: mix(&self.items, &other.items) })
    }

    pub fn write<W: Write>(&self, out: W) -> Result<W> {
        let mut w = Writer::new(out);
        w.bytes(TABLE_MAGIC)?;
        w.u32(TABLE_FORMAT_VERSION)?;
        w.matrix(&self.users)?;
        w.matrix(&self.items)?;
        w.finish()
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut r = Reader::new(input);
        r.expect_magic(TABLE_MAGIC)?;
        let version = r.u32()?;
        if version != TABLE_FORMAT_VERSION {
            return Err(Error::Format(format!("embedding table version {version} unsupported")));
        }
        let users = r.matrix()?;
        let items = r.matrix()?;
        r.expect_end()?;
        let t = EmbeddingTable::new(users, items)?;
        if !t.is_finite() {
            return Err(Error::Format("embedding table holds non-finite values".into()));
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(std::io::BufWriter::new(std::fs::File::create(path)?))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// `node_id<TAB>v1,…,vd` lines; users as `u:<id>`, items as `i:<id>`.
    pub fn write_text<W: Write>(&self, ids: &IdMap, mut out: W) -> Result<()> {
        let row = |m: &DenseMatrix, r: usize| {
            m.row(r).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        };
        for u in 0..self.num_users() {
            writeln!(out, "u:{}\t{}", ids.user_name(u as u32), row(&self.users, u))?;
        }
        for i in 0..self.num_items() {
            writeln!(out, "i:{}\t{}", ids.item_name(i as u32), row(&self.items, i))?;
        }
        Ok(())
    }
}

/// Predicted preference of user `u` for item `i`: `e_uᵀ e_i`.
pub fn score(emb: &EmbeddingTable, u: u32, i: u32) -> Result<f64> {
    if u as usize >= emb.num_users() || i as usize >= emb.num_items() {
        return Err(Error::Contract(format!(
            "score({u}, {i}) out of range for {} users and {} items",
            emb.num_users(),
            emb.num_items()
        )));
    }
    Ok(dot(emb.users.row(u as usize), emb.items.row(i as usize)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_cases() {
        let users = DenseMatrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let items = DenseMatrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let t = EmbeddingTable::new(users, items).unwrap();
        assert_eq!(score(&t, 0, 0).unwrap(), 1.0);
        assert_eq!(score(&t, 1, 0).unwrap(), 0.0);
        assert!(score(&t, 2, 0).is_err());
        assert!(score(&t, 0, 1).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let t = EmbeddingTable::new(
            DenseMatrix::from_fn(3, 2, |r, c| r as f64 * 0.1 - c as f64),
            DenseMatrix::from_fn(2, 2, |r, c| (r + c) as f64 / 3.0),
        )
        .unwrap();
        let bytes = t.write(Vec::new()).unwrap();
        assert_eq!(EmbeddingTable::read(bytes.as_slice()).unwrap(), t);
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(EmbeddingTable::read(bad.as_slice()).is_err());
    }

    #[test]
    fn text_export() {
        let t = EmbeddingTable::new(
            DenseMatrix::from_vec(1, 2, vec![0.5, -1.0]).unwrap(),
            DenseMatrix::from_vec(1, 2, vec![2.0, 0.0]).unwrap(),
        )
        .unwrap();
        let mut out = Vec::new();
        t.write_text(&IdMap::from_ids(["alice"], ["book"]), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "u:alice\t0.5,-1\ni:book\t2,0\n");
    }
}
