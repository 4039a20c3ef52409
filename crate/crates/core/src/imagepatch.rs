//! Grayscale images, overlapping patch extraction and same-size filtering.
//!
//! Every pixel gets a patch: the image is zero-padded by `(k - 1) / 2` on each
//! side, so an `m x n` image yields exactly `m * n` windows of side `k`,
//! enumerated row-major by their centre. Windows are scanned row-major, and
//! [`convolve_same`] uses the same orientation (cross-correlation, no kernel
//! flip), so filtering with a kernel built from a learned direction equals the
//! dot product of that direction with the raw patch vector.

use crate::error::{invalid, Error, Result};

/// A dense grayscale image, row-major, nominal range `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!("image must be nonempty, got {rows}x{cols}")));
        }
        if pixels.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: pixels.len() });
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    /// Builds an image from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid("ragged pixel rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_u8(rows: usize, cols: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(rows, cols, bytes.iter().map(|&b| f64::from(b)).collect())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.pixels[r * self.cols + c] = value;
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    /// Pixel at signed coordinates, zero outside the image.
    #[inline]
    fn padded(&self, r: isize, c: isize) -> f64 {
        if r < 0 || c < 0 || r as usize >= self.rows || c as usize >= self.cols {
            0.0
        } else {
            self.pixels[r as usize * self.cols + c as usize]
        }
    }

    /// Nearest-neighbour resize.
    pub fn resize_nearest(&self, rows: usize, cols: usize) -> Result<Self> {
        let mut out = Self::zeros(rows, cols)?;
        for r in 0..rows {
            let sr = (r * self.rows) / rows;
            for c in 0..cols {
                let sc = (c * self.cols) / cols;
                out.set(r, c, self.get(sr, sc));
            }
        }
        Ok(out)
    }
}

/// A small convolution kernel, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: weights.len() });
        }
        Ok(Self { rows, cols, weights })
    }

    /// Reshapes a row-major `k*k` vector into a `k x k` kernel.
    pub fn from_vector(k: usize, weights: &[f64]) -> Result<Self> {
        Self::new(k, k, weights.to_vec())
    }

    /// Rank-one kernel `a * b^T`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        let weights = a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect();
        Self { rows: a.len(), cols: b.len(), weights }
    }

    /// Identity kernel: 1 at the centre.
    pub fn delta(k: usize) -> Self {
        let mut weights = vec![0.0; k * k];
        weights[(k / 2) * k + k / 2] = 1.0;
        Self { rows: k, cols: k, weights }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    pub fn negated(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, weights: self.weights.iter().map(|w| -w).collect() }
    }

    pub(crate) fn side(&self) -> Result<usize> {
        if self.rows != self.cols {
            return Err(invalid(format!("kernel must be square, got {}x{}", self.rows, self.cols)));
        }
        check_patch_side(self.rows, 1)?;
        Ok(self.rows)
    }
}

fn check_patch_side(k: usize, min: usize) -> Result<()> {
    if k.is_multiple_of(2) || k < min {
        return Err(invalid(format!("patch side must be odd and at least {min}, got {k}")));
    }
    Ok(())
}

/// Pads by `(k - 1) / 2` zero pixels on every side.
pub fn zero_pad(img: &GrayImage, k: usize) -> Result<GrayImage> {
    check_patch_side(k, 3)?;
    let h = k / 2;
    let (rows, cols) = (img.rows + 2 * h, img.cols + 2 * h);
    let mut out = GrayImage::zeros(rows, cols)?;
    for r in 0..img.rows {
        let dst = (r + h) * cols + h;
        out.pixels[dst..dst + img.cols].copy_from_slice(&img.pixels[r * img.cols..(r + 1) * img.cols]);
    }
    Ok(out)
}

/// Writes the row-major `k x k` window centred at `(r, c)` into `out`.
#[inline]
fn window_into(img: &GrayImage, k: usize, r: usize, c: usize, out: &mut [f64]) {
    let h = (k / 2) as isize;
    let (r, c) = (r as isize, c as isize);
    let interior = r >= h && c >= h && (r + h) < img.rows as isize && (c + h) < img.cols as isize;
    for a in 0..k {
        let rr = r - h + a as isize;
        let dst = &mut out[a * k..(a + 1) * k];
        if interior {
            let start = rr as usize * img.cols + (c - h) as usize;
            dst.copy_from_slice(&img.pixels[start..start + k]);
        } else {
            for (b, d) in dst.iter_mut().enumerate() {
                *d = img.padded(rr, c - h + b as isize);
            }
        }
    }
}

/// Vectorised overlapping patches: one `k*k` column per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    k: usize,
    count: usize,
    /// Column-major: patch `j` occupies `data[j*k*k .. (j+1)*k*k]`.
    data: Vec<f64>,
    mean_removed: bool,
}

impl PatchSet {
    pub fn empty(k: usize, mean_removed: bool) -> Self {
        Self { k, count: 0, data: Vec::new(), mean_removed }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.k * self.k
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_mean_removed(&self) -> bool {
        self.mean_removed
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.data[j * d..(j + 1) * d]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Concatenates another set's columns after this one's.
    pub fn append(&mut self, other: &PatchSet) -> Result<()> {
        if other.k != self.k || other.mean_removed != self.mean_removed {
            return Err(Error::InvalidState("appending incompatible patch sets".into()));
        }
        self.data.extend_from_slice(&other.data);
        self.count += other.count;
        Ok(())
    }
}

/// Row-wise overlapping patches for two-directional learning.
///
/// Conceptually two `k x (k*P)` matrices with patches side by side:
/// `along_x` holds every window verbatim and `along_y` holds its transpose.
/// Each `k x k` slice is stored contiguously, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RowPatchSet {
    k: usize,
    count: usize,
    along_x: Vec<f64>,
    along_y: Vec<f64>,
    mean_removed: bool,
}

impl RowPatchSet {
    pub fn empty(k: usize, mean_removed: bool) -> Self {
        Self { k, count: 0, along_x: Vec::new(), along_y: Vec::new(), mean_removed }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_mean_removed(&self) -> bool {
        self.mean_removed
    }

    /// Width of each conceptual matrix, `k * P`.
    pub fn width(&self) -> usize {
        self.k * self.count
    }

    pub fn patch_x(&self, j: usize) -> &[f64] {
        let d = self.k * self.k;
        &self.along_x[j * d..(j + 1) * d]
    }

    pub fn patch_y(&self, j: usize) -> &[f64] {
        let d = self.k * self.k;
        &self.along_y[j * d..(j + 1) * d]
    }

    /// Entry `(row, col)` of the `k x (k*P)` matrix of verbatim patches.
    pub fn along_x_at(&self, row: usize, col: usize) -> f64 {
        self.along_x[(col / self.k) * self.k * self.k + row * self.k + col % self.k]
    }

    /// Entry `(row, col)` of the `k x (k*P)` matrix of transposed patches.
    pub fn along_y_at(&self, row: usize, col: usize) -> f64 {
        self.along_y[(col / self.k) * self.k * self.k + row * self.k + col % self.k]
    }

    pub fn along_x(&self) -> &[f64] {
        &self.along_x
    }

    pub fn along_y(&self) -> &[f64] {
        &self.along_y
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.along_x, self.along_y)
    }

    pub fn append(&mut self, other: &RowPatchSet) -> Result<()> {
        if other.k != self.k || other.mean_removed != self.mean_removed {
            return Err(Error::InvalidState("appending incompatible row patch sets".into()));
        }
        self.along_x.extend_from_slice(&other.along_x);
        self.along_y.extend_from_slice(&other.along_y);
        self.count += other.count;
        Ok(())
    }
}

/// Per-patch mean removal.
pub trait RemovePatchMean: Sized {
    fn remove_patch_mean(self) -> Result<Self>;
}

fn subtract_slice_means(data: &mut [f64], slice_len: usize) {
    for chunk in data.chunks_exact_mut(slice_len) {
        let mean = chunk.iter().sum::<f64>() / slice_len as f64;
        chunk.iter_mut().for_each(|v| *v -= mean);
    }
}

impl RemovePatchMean for PatchSet {
    fn remove_patch_mean(mut self) -> Result<Self> {
        if self.mean_removed {
            return Err(Error::InvalidState("patch mean already removed".into()));
        }
        let d = self.dim();
        subtract_slice_means(&mut self.data, d);
        self.mean_removed = true;
        Ok(self)
    }
}

impl RemovePatchMean for RowPatchSet {
    /// Subtracts the scalar mean of each whole `k x k` patch (not per row).
    fn remove_patch_mean(mut self) -> Result<Self> {
        if self.mean_removed {
            return Err(Error::InvalidState("patch mean already removed".into()));
        }
        let d = self.k * self.k;
        // A transpose has the same mean, so both layouts shift identically.
        subtract_slice_means(&mut self.along_x, d);
        subtract_slice_means(&mut self.along_y, d);
        self.mean_removed = true;
        Ok(self)
    }
}

/// One `k*k` column per pixel, centres in row-major order.
pub fn extract_vectorized_patches(img: &GrayImage, k: usize) -> Result<PatchSet> {
    check_patch_side(k, 3)?;
    let d = k * k;
    let count = img.rows * img.cols;
    let mut data = vec![0.0; count * d];
    for (j, out) in data.chunks_exact_mut(d).enumerate() {
        window_into(img, k, j / img.cols, j % img.cols, out);
    }
    Ok(PatchSet { k, count, data, mean_removed: false })
}

/// Windows in both verbatim and transposed layouts.
pub fn extract_row_patches(img: &GrayImage, k: usize) -> Result<RowPatchSet> {
    let ps = extract_vectorized_patches(img, k)?;
    let d = k * k;
    let mut along_y = vec![0.0; ps.data.len()];
    for (src, dst) in ps.data.chunks_exact(d).zip(along_y.chunks_exact_mut(d)) {
        for a in 0..k {
            for b in 0..k {
                dst[b * k + a] = src[a * k + b];
            }
        }
    }
    Ok(RowPatchSet { k, count: ps.count, along_x: ps.data, along_y, mean_removed: false })
}

/// Same-size filtering with zero padding, cross-correlation orientation:
/// `out(r, c) = sum_{a,b} padded(r + a, c + b) * W(a, b)`.
pub fn convolve_same(img: &GrayImage, filter: &Kernel) -> Result<GrayImage> {
    let k = filter.side()?;
    let h = k / 2;
    let (rows, cols) = img.dims();
    let mut out = vec![0.0; rows * cols];
    let w = &filter.weights;
    for r in 0..rows {
        // Kernel rows that land inside the image for this output row.
        let a_lo = h.saturating_sub(r);
        let a_hi = k.min(rows + h - r);
        for c in 0..cols {
            let b_lo = h.saturating_sub(c);
            let b_hi = k.min(cols + h - c);
            let mut acc = 0.0;
            for a in a_lo..a_hi {
                let src_row = (r + a - h) * cols;
                let wrow = &w[a * k..(a + 1) * k];
                let src = &img.pixels[src_row + c + b_lo - h..src_row + c + b_hi - h];
                acc += src.iter().zip(&wrow[b_lo..b_hi]).map(|(p, w)| p * w).sum::<f64>();
            }
            out[r * cols + c] = acc;
        }
    }
    GrayImage::new(rows, cols, out)
}
