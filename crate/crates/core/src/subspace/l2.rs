use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{abs_projection_sum, DataColumns, PrincipalDirection, RowDataSet, BLOCK};
use crate::error::{Error, Result};

const EIGEN_MAX_SWEEPS: usize = 10_000;

/// Eigenvalues at or below this fraction of the trace count as zero.
const NULL_RTOL: f64 = 1e-12;

/// Scatter matrix `sum_i x_i x_i^T`, row-major `dim x dim`.
pub fn scatter_matrix(data: &[f64], dim: usize) -> Vec<f64> {
    let partial: Vec<Vec<f64>> = data
        .par_chunks(BLOCK * dim)
        .map(|block| {
            let mut s = vec![0.0; dim * dim];
            for x in block.chunks_exact(dim) {
                for (a, &xa) in x.iter().enumerate() {
                    let row = &mut s[a * dim..(a + 1) * dim];
                    // Upper triangle only; mirrored below.
                    for b in a..dim {
                        row[b] += xa * x[b];
                    }
                }
            }
            s
        })
        .collect();
    let mut total = vec![0.0; dim * dim];
    for p in partial {
        total.iter_mut().zip(&p).for_each(|(t, v)| *t += v);
    }
    for a in 0..dim {
        for b in 0..a {
            total[a * dim + b] = total[b * dim + a];
        }
    }
    total
}

/// Flips `v` so its largest-magnitude entry is positive (first one on ties).
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn leading_eigenvectors(data: &[f64], dim: usize, count: usize) -> Result<Vec<PrincipalDirection>> {
    if count == 0 || count > dim {
        return Err(Error::InvalidParameter(format!("component count must be in 1..={dim}, got {count}")));
    }
    let scatter = DMatrix::from_row_slice(dim, dim, &scatter_matrix(data, dim));
    let trace = scatter.trace();
    let eig = scatter
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_SWEEPS)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut out = Vec::with_capacity(count);
    for (l, &idx) in order.iter().take(count).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if trace <= 0.0 || lambda <= NULL_RTOL * trace {
            return Err(Error::DegenerateData { component: l + 1, step: 0 });
        }
        let mut w: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        canonical_sign(&mut w);
        let objective = abs_projection_sum(&w, data);
        out.push(PrincipalDirection { w, objective, iterations: 0, converged: true, trace: vec![] });
    }
    Ok(out)
}

/// Top-`count` eigenvectors of `X X^T`, descending eigenvalue order.
pub fn l2pca_components(x: &DataColumns, count: usize) -> Result<Vec<PrincipalDirection>> {
    leading_eigenvectors(&x.data, x.dim, count)
}

/// Top-`count` eigenvectors of `sum_ij x_ij^T x_ij` over all rows.
pub fn l2_2dpca_components(r: &RowDataSet, count: usize) -> Result<Vec<PrincipalDirection>> {
    leading_eigenvectors(&r.rows, r.width, count)
}

pub(crate) fn l2_components_slab(data: &[f64], dim: usize, count: usize) -> Result<Vec<PrincipalDirection>> {
    leading_eigenvectors(data, dim, count)
}
