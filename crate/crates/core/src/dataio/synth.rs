//! Synthetic face-like datasets.
//!
//! Each class is a smooth template: a pattern shared by all classes plus a
//! class-specific one, both sums of random low-frequency cosines. Samples
//! perturb the template with a sub-pixel shift, illumination gain, offset and
//! ramp, a per-sample low-frequency nuisance pattern, and pixel noise.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{rng, LabeledDataset};
use crate::error::{Error, Result};
use crate::imagepatch::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    /// Standard deviation of the additive pixel noise, in grey levels.
    pub noise: f64,
    /// Weight of the per-sample nuisance pattern relative to the class pattern.
    pub nuisance: f64,
    /// Largest shift in pixels along each axis.
    pub max_shift: f64,
    /// Scale of the random illumination gain, offset and ramp; 0 disables them.
    pub illumination: f64,
}

impl SynthSpec {
    pub fn new(classes: usize, per_class: usize, rows: usize, cols: usize, seed: u64) -> Self {
        Self { classes, per_class, rows, cols, seed, noise: 8.0, nuisance: 0.45, max_shift: 1.0, illumination: 1.0 }
    }
}

const WAVES: usize = 8;
const MAX_FREQ: f64 = 3.0;

/// Sum of random plane cosines, evaluated on the continuous image plane.
struct Pattern {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl Pattern {
    fn random<R: Rng>(rng: &mut R) -> Self {
        let waves = (0..WAVES)
            .map(|_| {
                let a: f64 = StandardNormal.sample(rng);
                let fy = rng.random_range(-MAX_FREQ..=MAX_FREQ);
                let fx = rng.random_range(-MAX_FREQ..=MAX_FREQ);
                let phase = rng.random_range(0.0..2.0 * PI);
                (a, fy, fx, phase)
            })
            .collect();
        Self { waves }
    }

    fn at(&self, y: f64, x: f64) -> f64 {
        self.waves.iter().map(|&(a, fy, fx, p)| a * (2.0 * PI * (fy * y + fx * x) + p).cos()).sum()
    }

    /// Samples on a `rows × cols` grid over the unit square, shifted by
    /// `(dy, dx)` pixels, and standardized to zero mean and unit deviation.
    fn render(&self, rows: usize, cols: usize, dy: f64, dx: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                v.push(self.at((r as f64 + dy) / rows as f64, (c as f64 + dx) / cols as f64));
            }
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt().max(1e-12);
        v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
        v
    }
}

pub fn generate(spec: &SynthSpec) -> Result<LabeledDataset> {
    if spec.classes == 0 || spec.per_class == 0 || spec.rows == 0 || spec.cols == 0 {
        return Err(Error::InvalidParameter("synthetic dataset needs classes, images and size > 0".into()));
    }
    if !(spec.noise >= 0.0 && spec.nuisance >= 0.0 && spec.max_shift >= 0.0 && spec.illumination >= 0.0) {
        return Err(Error::InvalidParameter("synthetic perturbations must be non-negative".into()));
    }
    let (rows, cols) = (spec.rows, spec.cols);
    let shared = Pattern::random(&mut rng::stream(spec.seed, "synth-shared", &[]));
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let mut images = Vec::with_capacity(spec.classes * spec.per_class);
    let mut labels = Vec::with_capacity(images.capacity());
    for c in 0..spec.classes {
        let own = Pattern::random(&mut rng::stream(spec.seed, "synth-class", &[c as u64]));
        for j in 0..spec.per_class {
            let mut rng = rng::stream(spec.seed, "synth-sample", &[c as u64, j as u64]);
            let dy = rng.random_range(-spec.max_shift..=spec.max_shift);
            let dx = rng.random_range(-spec.max_shift..=spec.max_shift);
            let s = spec.illumination;
            let gain = 1.0 + s * rng.random_range(-0.2..0.2);
            let offset = s * rng.random_range(-15.0..15.0);
            let (ry, rx) = (s * rng.random_range(-12.0..12.0), s * rng.random_range(-12.0..12.0));
            let nuisance = Pattern::random(&mut rng);
            let base = shared.render(rows, cols, dy, dx);
            let cls = own.render(rows, cols, dy, dx);
            let nui = nuisance.render(rows, cols, 0.0, 0.0);
            let mut px = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for col in 0..cols {
                    let i = r * cols + col;
                    let face = 0.6 * base[i] + 0.8 * cls[i] + spec.nuisance * nui[i];
                    let ramp = ry * (r as f64 / rows as f64 - 0.5) + rx * (col as f64 / cols as f64 - 0.5);
                    let v = 128.0 + gain * 36.0 * face + offset + ramp + noise.sample(&mut rng);
                    px.push(v.round().clamp(0.0, 255.0));
                }
            }
            images.push(GrayImage::new(rows, cols, px)?);
            labels.push(c);
        }
    }
    let names = (0..spec.classes).map(|c| format!("class_{c:02}")).collect();
    LabeledDataset::new(images, labels, names, vec![])
}
