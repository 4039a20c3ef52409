use super::{
    check_unit, norm2, signed_sum, total_norm, update_signs, DataColumns, PrincipalDirection, RowDataSet, SolverOptions,
};
use crate::error::{Error, Result};

/// Relative size below which a direction sum counts as the zero vector.
const DEGENERATE_RTOL: f64 = 1e-10;

/// Polarity fixed-point iteration on a slab of `dim`-vectors.
///
/// Starts from `w(0) = 0`, so every polarity is `+1` and the first iterate is
/// the normalised data sum. If that sum vanishes while the data does not (the
/// iteration is undefined there), the largest-norm vector seeds `w(1)`
/// instead. Any later vanishing sum is a degenerate-data error.
///
/// `floor` is the absolute norm at or below which a sum is treated as zero.
fn fixed_point(data: &[f64], dim: usize, opts: &SolverOptions, floor: f64) -> Result<PrincipalDirection> {
    if opts.max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    let n = data.len() / dim;
    let mut signs = vec![1i8; n];
    let mut w = vec![0.0; dim];
    let mut trace = Vec::new();
    let mut t = 0;
    loop {
        t += 1;
        let mut next = signed_sum(data, dim, &signs);
        let mut len = norm2(&next);
        if len <= floor {
            if t > 1 {
                return Err(Error::DegenerateData { component: 1, step: t });
            }
            let seed =
                data.chunks_exact(dim).map(|x| (norm2(x), x)).fold(None::<(f64, &[f64])>, |best, cur| match best {
                    Some(b) if b.0 >= cur.0 => Some(b),
                    _ => Some(cur),
                });
            match seed {
                Some((l, x)) if l > floor => {
                    next = x.to_vec();
                    len = l;
                }
                _ => return Err(Error::DegenerateData { component: 1, step: t }),
            }
        }
        next.iter_mut().for_each(|v| *v /= len);

        let objective = update_signs(&next, data, &mut signs);
        trace.push(objective);
        let change = w.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        w = next;
        let converged = change <= opts.tol;
        if converged || t >= opts.max_iter {
            return Ok(PrincipalDirection { w, objective, iterations: t, converged, trace });
        }
    }
}

/// `x <- x - (w^T x) w` for every vector in the slab.
fn deflate_in_place(data: &mut [f64], w: &[f64]) {
    use rayon::prelude::*;
    let dim = w.len();
    data.par_chunks_mut(dim * 4096).for_each(|block| {
        for x in block.chunks_exact_mut(dim) {
            let proj = super::dot(w, x);
            x.iter_mut().zip(w).for_each(|(v, wi)| *v -= proj * wi);
        }
    });
}

fn greedy_components(
    mut data: Vec<f64>,
    dim: usize,
    count: usize,
    opts: &SolverOptions,
) -> Result<Vec<PrincipalDirection>> {
    if count == 0 || count > dim {
        return Err(Error::InvalidParameter(format!("component count must be in 1..={dim}, got {count}")));
    }
    let floor = DEGENERATE_RTOL * total_norm(&data, dim);
    let mut out = Vec::with_capacity(count);
    for component in 1..=count {
        let pd = fixed_point(&data, dim, opts, floor).map_err(|e| match e {
            Error::DegenerateData { step, .. } => Error::DegenerateData { component, step },
            other => other,
        })?;
        if component < count {
            deflate_in_place(&mut data, &pd.w);
        }
        out.push(pd);
    }
    Ok(out)
}

/// First L1-norm principal direction of the data columns.
pub fn l1pca_first_component(x: &DataColumns, opts: &SolverOptions) -> Result<PrincipalDirection> {
    let floor = DEGENERATE_RTOL * total_norm(&x.data, x.dim);
    fixed_point(&x.data, x.dim, opts, floor)
}

/// Removes the component along unit `w` from every column.
pub fn deflate_columns(x: &DataColumns, w: &[f64]) -> Result<DataColumns> {
    if w.len() != x.dim {
        return Err(Error::DimensionMismatch { expected: x.dim, found: w.len() });
    }
    check_unit(w)?;
    let mut data = x.data.clone();
    deflate_in_place(&mut data, w);
    Ok(DataColumns { dim: x.dim, data })
}

/// `count` L1 directions by alternating the fixed point with deflation.
pub fn l1pca_components(x: &DataColumns, count: usize, opts: &SolverOptions) -> Result<Vec<PrincipalDirection>> {
    greedy_components(x.data.clone(), x.dim, count, opts)
}

/// First L1-norm direction over all rows of all samples.
pub fn l1_2dpca_first_component(r: &RowDataSet, opts: &SolverOptions) -> Result<PrincipalDirection> {
    let floor = DEGENERATE_RTOL * total_norm(&r.rows, r.width);
    fixed_point(&r.rows, r.width, opts, floor)
}

/// `count` row-space directions with row-wise deflation `x <- x - x w w^T`.
pub fn l1_2dpca_components(r: &RowDataSet, count: usize, opts: &SolverOptions) -> Result<Vec<PrincipalDirection>> {
    greedy_components(r.rows.clone(), r.width, count, opts)
}

/// Same as [`l1pca_components`] but consumes the slab, avoiding a copy.
pub(crate) fn l1_components_owned(
    data: Vec<f64>,
    dim: usize,
    count: usize,
    opts: &SolverOptions,
) -> Result<Vec<PrincipalDirection>> {
    greedy_components(data, dim, count, opts)
}
