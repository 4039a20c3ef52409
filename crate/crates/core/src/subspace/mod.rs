//! Filter-learning solvers.
//!
//! Two families share one data model, a flat slab of equal-length vectors:
//!
//! * L1-norm solvers ([`l1pca_first_component`], [`l1_2dpca_first_component`])
//!   maximise `sum_i |w^T x_i|` over unit `w` with the polarity fixed-point
//!   iteration, and extract further directions by greedy deflation.
//! * L2 baselines ([`l2pca_components`], [`l2_2dpca_components`]) take the
//!   leading eigenvectors of the scatter matrix.
//!
//! The vectorised and row-wise variants differ only in what a "vector" is: a
//! data column of [`DataColumns`], or one row of one sample in [`RowDataSet`].

pub(crate) mod l1;
pub(crate) mod l2;
pub mod oracle;

pub use l1::{deflate_columns, l1_2dpca_components, l1_2dpca_first_component, l1pca_components, l1pca_first_component};
pub use l2::{l2_2dpca_components, l2pca_components, scatter_matrix};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Vectors per parallel work unit. Partial results are combined in block
/// order, so sums are identical for any thread count.
const BLOCK: usize = 4096;

/// Iteration controls for the L1 fixed-point solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once `max_j |w(t)_j - w(t-1)_j| <= tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 1000 }
    }
}

/// `N` data vectors of dimension `D`, stored column after column.
#[derive(Debug, Clone, PartialEq)]
pub struct DataColumns {
    dim: usize,
    data: Vec<f64>,
}

impl DataColumns {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("data dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: data.len() % dim });
        }
        Ok(Self { dim, data })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let dim = columns
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidParameter("from_columns needs at least one column".into()))?;
        if let Some(bad) = columns.iter().find(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
        }
        Self::new(dim, columns.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl From<crate::imagepatch::PatchSet> for DataColumns {
    fn from(ps: crate::imagepatch::PatchSet) -> Self {
        let dim = ps.dim();
        Self { dim, data: ps.into_data() }
    }
}

/// Row vectors `x_ij` of width `w_len`, grouped by sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowDataSet {
    width: usize,
    rows: Vec<f64>,
    sample_heights: Vec<usize>,
}

impl RowDataSet {
    /// `rows` holds every row of every sample back to back.
    pub fn new(width: usize, rows: Vec<f64>, sample_heights: Vec<usize>) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidParameter("row width must be positive".into()));
        }
        let total: usize = sample_heights.iter().sum();
        if rows.len() != total * width {
            return Err(Error::DimensionMismatch { expected: total * width, found: rows.len() });
        }
        Ok(Self { width, rows, sample_heights })
    }

    /// Samples that are all `h x width`, stored row-major one after another.
    pub fn uniform(width: usize, height: usize, rows: Vec<f64>) -> Result<Self> {
        let per = width * height;
        if per == 0 || !rows.len().is_multiple_of(per) {
            return Err(Error::DimensionMismatch { expected: per, found: rows.len() });
        }
        let n = rows.len() / per;
        Self::new(width, rows, vec![height; n])
    }

    /// Samples given as nested `rows x width` matrices.
    pub fn from_samples(samples: &[Vec<Vec<f64>>]) -> Result<Self> {
        let width = samples
            .iter()
            .flat_map(|s| s.first())
            .map(Vec::len)
            .next()
            .ok_or_else(|| Error::InvalidParameter("no rows".into()))?;
        let mut rows = Vec::new();
        let mut heights = Vec::new();
        for s in samples {
            for r in s {
                if r.len() != width {
                    return Err(Error::DimensionMismatch { expected: width, found: r.len() });
                }
                rows.extend_from_slice(r);
            }
            heights.push(s.len());
        }
        Self::new(width, rows, heights)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row_count(&self) -> usize {
        self.rows.len() / self.width
    }

    pub fn sample_heights(&self) -> &[usize] {
        &self.sample_heights
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.width..(i + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rows
    }

    /// Views each data column as a one-row sample.
    pub fn from_columns(x: &DataColumns) -> Self {
        Self { width: x.dim, rows: x.data.clone(), sample_heights: vec![1; x.count()] }
    }
}

/// A learned unit direction and the fit that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalDirection {
    pub w: Vec<f64>,
    /// L1 objective `sum |w^T x|` on the data the direction was fit to.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each iteration `t = 1, 2, ...` (empty for L2 solvers).
    pub trace: Vec<f64>,
}

/// Polarities `p_i = +1` when `w^T x_i >= 0`, else `-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolaritySigns(pub Vec<i8>);

impl PolaritySigns {
    pub fn of(w: &[f64], data: &[f64]) -> Self {
        let dim = w.len();
        Self(data.chunks_exact(dim).map(|x| if dot(w, x) >= 0.0 { 1 } else { -1 }).collect())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_unit(w: &[f64]) -> Result<()> {
    let n = norm2(w);
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("direction must have unit norm, got {n}")));
    }
    Ok(())
}

/// `sum_i |w^T x_i|`.
pub fn l1_objective(w: &[f64], x: &DataColumns) -> Result<f64> {
    if w.len() != x.dim {
        return Err(Error::DimensionMismatch { expected: x.dim, found: w.len() });
    }
    check_unit(w)?;
    Ok(abs_projection_sum(w, &x.data))
}

pub(crate) fn abs_projection_sum(w: &[f64], data: &[f64]) -> f64 {
    let dim = w.len();
    let partial: Vec<f64> = data
        .par_chunks(BLOCK * dim)
        .map(|block| block.chunks_exact(dim).map(|x| dot(w, x).abs()).sum::<f64>())
        .collect();
    partial.iter().sum()
}

/// Recomputes signs from `w` and returns the objective, in one pass.
pub(crate) fn update_signs(w: &[f64], data: &[f64], signs: &mut [i8]) -> f64 {
    let dim = w.len();
    let partial: Vec<f64> = data
        .par_chunks(BLOCK * dim)
        .zip(signs.par_chunks_mut(BLOCK))
        .map(|(block, s)| {
            let mut acc = 0.0;
            for (x, p) in block.chunks_exact(dim).zip(s.iter_mut()) {
                let proj = dot(w, x);
                *p = if proj >= 0.0 { 1 } else { -1 };
                acc += proj.abs();
            }
            acc
        })
        .collect();
    partial.iter().sum()
}

/// `sum_i p_i x_i`.
pub(crate) fn signed_sum(data: &[f64], dim: usize, signs: &[i8]) -> Vec<f64> {
    let partial: Vec<Vec<f64>> = data
        .par_chunks(BLOCK * dim)
        .zip(signs.par_chunks(BLOCK))
        .map(|(block, s)| {
            let mut acc = vec![0.0; dim];
            for (x, &p) in block.chunks_exact(dim).zip(s) {
                if p > 0 {
                    acc.iter_mut().zip(x).for_each(|(a, v)| *a += v);
                } else {
                    acc.iter_mut().zip(x).for_each(|(a, v)| *a -= v);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; dim];
    for p in partial {
        total.iter_mut().zip(&p).for_each(|(t, v)| *t += v);
    }
    total
}

/// Sum of vector norms; the scale reference for degeneracy checks.
pub(crate) fn total_norm(data: &[f64], dim: usize) -> f64 {
    let partial: Vec<f64> =
        data.par_chunks(BLOCK * dim).map(|block| block.chunks_exact(dim).map(norm2).sum::<f64>()).collect();
    partial.iter().sum()
}
