//! Independent reference solvers used to check the production ones.
//!
//! [`l1pca_oracle`] enumerates every polarity vector; since any maximiser of
//! the L1 objective is `normalize(sum p_i x_i)` for its own polarities, the
//! best candidate is the global optimum. [`power_iteration_components`] is a
//! plain deflated power iteration, sharing no code with the eigensolver
//! behind the L2 baselines.

use super::{abs_projection_sum, dot, norm2, DataColumns, PrincipalDirection, RowDataSet};
use crate::error::{Error, Result};

pub const ORACLE_MAX_VECTORS: usize = 20;

fn enumerate(data: &[f64], dim: usize) -> Result<PrincipalDirection> {
    let n = data.len() / dim;
    if n > ORACLE_MAX_VECTORS {
        return Err(Error::OracleRefused { count: n, limit: ORACLE_MAX_VECTORS });
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut sum = vec![0.0; dim];
    for mask in 0u32..(1u32 << n) {
        sum.iter_mut().for_each(|s| *s = 0.0);
        for (i, x) in data.chunks_exact(dim).enumerate() {
            let sign = if mask >> i & 1 == 0 { 1.0 } else { -1.0 };
            sum.iter_mut().zip(x).for_each(|(s, v)| *s += sign * v);
        }
        let len = norm2(&sum);
        if len == 0.0 {
            continue;
        }
        let w: Vec<f64> = sum.iter().map(|v| v / len).collect();
        let f = abs_projection_sum(&w, data);
        if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
            best = Some((f, w));
        }
    }
    let (objective, w) = best.ok_or(Error::DegenerateData { component: 1, step: 0 })?;
    Ok(PrincipalDirection { w, objective, iterations: 1 << n, converged: true, trace: vec![] })
}

/// Global L1 maximiser by exhaustive sign enumeration (`N <= 20`).
pub fn l1pca_oracle(x: &DataColumns) -> Result<PrincipalDirection> {
    enumerate(x.as_slice(), x.dim())
}

/// Row-wise counterpart, enumerating a sign per row.
pub fn l1_2dpca_oracle(r: &RowDataSet) -> Result<PrincipalDirection> {
    enumerate(r.as_slice(), r.width())
}

/// Leading eigenpairs of a symmetric PSD matrix (row-major) by deflated
/// power iteration. Returns `(eigenvalue, unit eigenvector)` pairs with the
/// largest-magnitude entry of each vector made positive.
pub fn power_iteration_components(
    matrix: &[f64],
    dim: usize,
    count: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<(f64, Vec<f64>)>> {
    if matrix.len() != dim * dim {
        return Err(Error::DimensionMismatch { expected: dim * dim, found: matrix.len() });
    }
    let mut a = matrix.to_vec();
    let mut out = Vec::with_capacity(count);
    for component in 0..count {
        // Deterministic start with no special alignment to any axis.
        let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + 0.1 * ((i * 37 + component * 11) % 17) as f64).collect();
        let n0 = norm2(&v);
        v.iter_mut().for_each(|x| *x /= n0);
        let mut converged = false;
        for _ in 0..max_iter {
            let mut next: Vec<f64> = a.chunks_exact(dim).map(|row| dot(row, &v)).collect();
            let len = norm2(&next);
            if len == 0.0 {
                return Err(Error::DegenerateData { component: component + 1, step: 0 });
            }
            next.iter_mut().for_each(|x| *x /= len);
            let change = v.iter().zip(&next).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            v = next;
            if change <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numeric(format!(
                "power iteration for component {} did not converge in {max_iter} steps",
                component + 1
            )));
        }
        let av: Vec<f64> = a.chunks_exact(dim).map(|row| dot(row, &v)).collect();
        let lambda = dot(&v, &av);
        for i in 0..dim {
            for j in 0..dim {
                a[i * dim + j] -= lambda * v[i] * v[j];
            }
        }
        super::l2::canonical_sign(&mut v);
        out.push((lambda, v));
    }
    Ok(out)
}
