//! Symmetric eigen-decomposition by cyclic Jacobi rotations.

use crate::error::{shape_err, Result};
use crate::numerics::matrix::DenseMatrix;

const MAX_SWEEPS: usize = 100;

fn check_symmetric(m: &DenseMatrix) -> Result<()> {
    let n = m.rows();
    if m.cols() != n {
        return shape_err(format!("expected a square matrix, got {:?}", m.shape()));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (m.get(i, j), m.get(j, i));
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return shape_err(format!("matrix is not symmetric at ({i},{j})"));
            }
        }
    }
    Ok(())
}

/// `I − D^{-1/2} A D^{-1/2}`, with isolated vertices contributing a zero row
/// and column.
pub fn normalized_laplacian(adj: &DenseMatrix) -> Result<DenseMatrix> {
    check_symmetric(adj)?;
    let n = adj.rows();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = adj.row(i).iter().sum();
            if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }
        })
        .collect();
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j && inv_sqrt[i] > 0.0 { 1.0 } else { 0.0 };
        diag - inv_sqrt[i] * adj.get(i, j) * inv_sqrt[j]
    }))
}

/// All eigenpairs of a symmetric matrix, eigenvalues ascending. Eigenvectors
/// are the columns of the returned matrix.
pub fn symmetric_eigen(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    check_symmetric(m)?;
    let n = m.rows();
    let mut a = m.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_sq().sqrt().max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).total_cmp(&a.get(j, j)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    Ok((values, vectors))
}

/// The `k` smallest eigenpairs of the symmetric normalized Laplacian of
/// `adj`.
pub fn topk_eigenvectors(adj: &DenseMatrix, k: usize) -> Result<(Vec<f64>, DenseMatrix)> {
    if k > adj.rows() {
        return shape_err(format!("requested {k} eigenpairs of a {}-node graph", adj.rows()));
    }
    let lap = normalized_laplacian(adj)?;
    let (values, vectors) = symmetric_eigen(&lap)?;
    let n = adj.rows();
    Ok((
        values[..k].to_vec(),
        DenseMatrix::from_fn(n, k, |r, c| vectors.get(r, c)),
    ))
}

/// Numerically stable `log Σ exp(v)`.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if v.is_empty() {
        return shape_err("log_sum_exp of an empty vector");
    }
    if v.len() == 1 {
        return Ok(v[0]);
    }
    if max == f64::NEG_INFINITY {
        return Ok(max);
    }
    Ok(max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln())
}
