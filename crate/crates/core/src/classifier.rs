//! Linear one-vs-rest classifier and a nearest-neighbour fallback.
//!
//! Each binary problem minimises the L2-regularised hinge loss
//! `lambda/2 |w|^2 + 1/n sum_i max(0, 1 - y_i (w^T x_i + b))` with
//! `lambda = 1 / (c * n)`, which is the usual `C`-SVM primal rescaled by
//! `1 / (c n)`. The bias is folded in as a constant feature. Training runs
//! deterministic full-batch subgradient steps of size `1 / (lambda t)` and
//! keeps the best iterate from the first epoch on, so the reported objective
//! never increases.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::network::format::{put_f64s, put_u32, Reader};

/// Feature vectors (as floats) with dense labels `0..classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledFeatures {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let dim = features.first().map(Vec::len).ok_or_else(|| invalid("no features"))?;
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.len(), found: labels.len() });
        }
        if let Some(bad) = features.iter().find(|f| f.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(invalid(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Self { features, labels, classes })
    }

    pub fn from_counts(features: &[crate::network::FeatureVector], labels: Vec<usize>, classes: usize) -> Result<Self> {
        Self::new(features.iter().map(|f| f.to_f64()).collect(), labels, classes)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierOptions {
    pub c: f64,
    pub epochs: usize,
    /// Scale every feature vector to unit L2 norm before training/prediction.
    pub l2_normalize: bool,
}

impl Default for ClassifierOptions {
    fn default() -> Self {
        Self { c: 1.0, epochs: 300, l2_normalize: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub c: f64,
    pub epochs: usize,
    pub l2_normalize: bool,
}

fn normalized(x: &[f64]) -> Vec<f64> {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter().map(|v| v / n).collect()
    } else {
        x.to_vec()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One binary problem; returns the best augmented weights over epochs
/// `1..=epochs` and the best-so-far objective after each epoch. The zero
/// starting point is not a candidate: it scores every sample 0, and a class
/// left at zero would outscore every trained class at prediction time.
fn train_binary(xs: &[Vec<f64>], ys: &[f64], lambda: f64, epochs: usize) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len() as f64;
    let d = xs[0].len();
    // Augmented layout: weights then bias.
    let score = |w: &[f64], x: &[f64]| dot(&w[..d], x) + w[d];
    let objective = |w: &[f64]| {
        let hinge: f64 = xs.iter().zip(ys).map(|(x, y)| (1.0 - y * score(w, x)).max(0.0)).sum();
        0.5 * lambda * dot(w, w) + hinge / n
    };

    let mut w = vec![0.0; d + 1];
    let mut best = w.clone();
    let mut best_obj = f64::INFINITY;
    let mut trace = Vec::with_capacity(epochs);
    let mut pull = vec![0.0; d + 1];
    for t in 1..=epochs {
        pull.iter_mut().for_each(|v| *v = 0.0);
        for (x, &y) in xs.iter().zip(ys) {
            if y * score(&w, x) < 1.0 {
                pull[..d].iter_mut().zip(x).for_each(|(p, v)| *p += y * v);
                pull[d] += y;
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        let shrink = 1.0 - eta * lambda;
        for (wi, pi) in w.iter_mut().zip(&pull) {
            *wi = shrink * *wi + eta * pi / n;
        }
        let obj = objective(&w);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&w);
        }
        trace.push(best_obj);
    }
    (best, trace)
}

/// Trains the model and also returns each class's objective trace.
pub fn train_linear_ovr_traced(
    data: &LabeledFeatures,
    opts: &ClassifierOptions,
) -> Result<(LinearModel, Vec<Vec<f64>>)> {
    if !(opts.c.is_finite() && opts.c > 0.0) {
        return Err(invalid(format!("c must be positive, got {}", opts.c)));
    }
    if opts.epochs == 0 {
        return Err(invalid("epochs must be at least 1"));
    }
    if data.classes < 2 {
        return Err(invalid("need at least two classes"));
    }
    let mut seen = vec![false; data.classes];
    data.labels.iter().for_each(|&l| seen[l] = true);
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(invalid(format!("class {missing} has no training samples")));
    }
    if data.features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite feature value"));
    }

    let xs: Vec<Vec<f64>> =
        if opts.l2_normalize { data.features.iter().map(|f| normalized(f)).collect() } else { data.features.clone() };
    let lambda = 1.0 / (opts.c * xs.len() as f64);
    let per_class: Vec<(Vec<f64>, Vec<f64>)> = (0..data.classes)
        .into_par_iter()
        .map(|class| {
            let ys: Vec<f64> = data.labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            train_binary(&xs, &ys, lambda, opts.epochs)
        })
        .collect();

    let d = data.dim();
    let mut weights = Vec::with_capacity(data.classes);
    let mut biases = Vec::with_capacity(data.classes);
    let mut traces = Vec::with_capacity(data.classes);
    for (mut w, trace) in per_class {
        biases.push(w[d]);
        w.truncate(d);
        weights.push(w);
        traces.push(trace);
    }
    if weights.iter().flatten().chain(&biases).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("classifier weights diverged".into()));
    }
    let model = LinearModel { weights, biases, c: opts.c, epochs: opts.epochs, l2_normalize: opts.l2_normalize };
    Ok((model, traces))
}

pub fn train_linear_ovr(data: &LabeledFeatures, opts: &ClassifierOptions) -> Result<LinearModel> {
    train_linear_ovr_traced(data, opts).map(|(m, _)| m)
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Per-class scores `w_c^T f + b_c`.
    pub fn scores(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: f.len() });
        }
        let x = if self.l2_normalize { normalized(f) } else { f.to_vec() };
        Ok(self.weights.iter().zip(&self.biases).map(|(w, b)| dot(w, &x) + b).collect())
    }

    pub(crate) fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_u32(&mut out, self.weights.len());
        put_u32(&mut out, self.dim());
        put_f64s(&mut out, &[self.c]);
        put_u32(&mut out, self.epochs);
        out.push(u8::from(self.l2_normalize));
        for w in &self.weights {
            put_f64s(&mut out, w);
        }
        put_f64s(&mut out, &self.biases);
        out
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let classes = r.u32()?;
        let dim = r.u32()?;
        let c = r.f64()?;
        let epochs = r.u32()?;
        let l2_normalize = r.u8()? != 0;
        let weights = (0..classes).map(|_| r.f64s(dim)).collect::<Result<_>>()?;
        let biases = r.f64s(classes)?;
        Ok(Self { weights, biases, c, epochs, l2_normalize })
    }
}

/// Class with the highest score; ties go to the lowest class id.
pub fn predict(model: &LinearModel, f: &[f64]) -> Result<usize> {
    let scores = model.scores(f)?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Label of the Euclidean-nearest training vector; ties go to the lowest index.
pub fn nearest_neighbor_predict(train: &LabeledFeatures, f: &[f64]) -> Result<usize> {
    if train.is_empty() {
        return Err(invalid("empty training set"));
    }
    if f.len() != train.dim() {
        return Err(Error::DimensionMismatch { expected: train.dim(), found: f.len() });
    }
    let mut best = (f64::INFINITY, 0);
    for (x, &label) in train.features.iter().zip(&train.labels) {
        let d: f64 = x.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, label);
        }
    }
    Ok(best.1)
}

/// Which classifier turns features into predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassifierChoice {
    Linear(ClassifierOptions),
    NearestNeighbor,
}

impl Default for ClassifierChoice {
    fn default() -> Self {
        ClassifierChoice::Linear(ClassifierOptions::default())
    }
}

/// Trains `choice` on `train` and predicts every row of `test`.
pub fn fit_predict(choice: &ClassifierChoice, train: &LabeledFeatures, test: &[Vec<f64>]) -> Result<Vec<usize>> {
    match choice {
        ClassifierChoice::Linear(opts) => {
            let model = train_linear_ovr(train, opts)?;
            test.iter().map(|f| predict(&model, f)).collect()
        }
        ClassifierChoice::NearestNeighbor => test.iter().map(|f| nearest_neighbor_predict(train, f)).collect(),
    }
}
