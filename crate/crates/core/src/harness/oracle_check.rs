//! Randomized checks of the subspace solvers against exhaustive and
//! power-iteration oracles. Each suite returns its raw measurements; the
//! `passes` methods apply the default tolerances.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataio::rng;
use crate::error::Result;
use crate::subspace::oracle::{l1_2dpca_oracle, l1pca_oracle, power_iteration_components};
use crate::subspace::{
    deflate_columns, l1_2dpca_components, l1_2dpca_first_component, l1pca_components, l1pca_first_component,
    l2_2dpca_components, l2pca_components, DataColumns, PrincipalDirection, RowDataSet, SolverOptions,
};

pub const MONOTONE_TOL: f64 = 1e-9;
pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const ORACLE_TOL: f64 = 1e-9;
pub const ATTAINMENT_RATE: f64 = 0.9;
pub const L2_TOL: f64 = 1e-8;
pub const ORTHO_TOL: f64 = 1e-8;
pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 10_000;

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sign_distance(a: &[f64], b: &[f64]) -> f64 {
    let plus = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let minus = a.iter().zip(b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
    plus.min(minus)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct L1SuiteStats {
    pub trials: usize,
    pub max_iterations: usize,
    pub nonconverged: usize,
    /// Largest single-step decrease of the objective trace.
    pub worst_monotone_drop: f64,
    /// Largest `|w - normalize(sum p_i x_i)|_inf` at the returned `w`.
    pub worst_fixed_point: f64,
    /// Instances whose objective is within the tolerance of the oracle's.
    pub attained: usize,
    /// Largest `f(algorithm) - f(oracle)`.
    pub worst_excess: f64,
}

impl L1SuiteStats {
    fn record(&mut self, pd: &PrincipalDirection, data: &[f64], oracle: f64, max_iter: usize) {
        self.trials += 1;
        self.max_iterations = self.max_iterations.max(pd.iterations);
        if !pd.converged || pd.iterations > max_iter {
            self.nonconverged += 1;
        }
        for w in pd.trace.windows(2) {
            self.worst_monotone_drop = self.worst_monotone_drop.max(w[0] - w[1]);
        }
        let dim = pd.w.len();
        let mut sum = vec![0.0; dim];
        for x in data.chunks_exact(dim) {
            let p = if dot(&pd.w, x) >= 0.0 { 1.0 } else { -1.0 };
            sum.iter_mut().zip(x).for_each(|(s, v)| *s += p * v);
        }
        let len = dot(&sum, &sum).sqrt();
        let gap = pd.w.iter().zip(&sum).map(|(w, s)| (w - s / len).abs()).fold(0.0, f64::max);
        self.worst_fixed_point = self.worst_fixed_point.max(gap);
        if (pd.objective - oracle).abs() <= ORACLE_TOL {
            self.attained += 1;
        }
        self.worst_excess = self.worst_excess.max(pd.objective - oracle);
    }

    pub fn attainment_rate(&self) -> f64 {
        self.attained as f64 / self.trials as f64
    }

    pub fn passes(&self) -> bool {
        self.nonconverged == 0
            && self.worst_monotone_drop <= MONOTONE_TOL
            && self.worst_fixed_point <= FIXED_POINT_TOL
            && self.attainment_rate() >= ATTAINMENT_RATE
            && self.worst_excess <= ORACLE_TOL
    }

    pub fn summary(&self) -> String {
        format!(
            "{} trials, max {} iterations, {} capped, worst drop {:.1e}, worst fixed-point gap {:.1e}, \
             oracle attained {}/{}, worst excess {:.1e}",
            self.trials,
            self.max_iterations,
            self.nonconverged,
            self.worst_monotone_drop,
            self.worst_fixed_point,
            self.attained,
            self.trials,
            self.worst_excess
        )
    }
}

/// Vector solver on `D <= 3`, `N <= 10` standard-normal columns.
pub fn l1pca_suite(trials: usize, seed: u64) -> Result<L1SuiteStats> {
    let opts = SolverOptions::default();
    let mut stats = L1SuiteStats::default();
    for t in 0..trials {
        let mut rng = rng::stream(seed, "oracle-l1pca", &[t as u64]);
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=10);
        let x = DataColumns::new(d, gaussian(&mut rng, d * n))?;
        let pd = l1pca_first_component(&x, &opts)?;
        let oracle = l1pca_oracle(&x)?;
        stats.record(&pd, x.as_slice(), oracle.objective, opts.max_iter);
    }
    Ok(stats)
}

/// Row solver on up to 5 samples of 2 rows, width up to 3.
pub fn l1_2dpca_suite(trials: usize, seed: u64) -> Result<L1SuiteStats> {
    let opts = SolverOptions::default();
    let mut stats = L1SuiteStats::default();
    for t in 0..trials {
        let mut rng = rng::stream(seed, "oracle-l12dpca", &[t as u64]);
        let width = rng.random_range(1..=3);
        let samples = rng.random_range(1..=5);
        let r = RowDataSet::uniform(width, 2, gaussian(&mut rng, samples * 2 * width))?;
        let pd = l1_2dpca_first_component(&r, &opts)?;
        let oracle = l1_2dpca_oracle(&r)?;
        stats.record(&pd, r.as_slice(), oracle.objective, opts.max_iter);
    }
    Ok(stats)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct L2SuiteStats {
    pub trials: usize,
    pub largest_dim: usize,
    /// Largest sign-aligned `|w - v|_inf` between solver and oracle vectors.
    pub worst_deviation: f64,
}

impl L2SuiteStats {
    pub fn passes(&self) -> bool {
        self.worst_deviation <= L2_TOL
    }

    pub fn summary(&self) -> String {
        format!(
            "{} trials up to {}x{} scatter, worst deviation {:.1e}",
            self.trials, self.largest_dim, self.largest_dim, self.worst_deviation
        )
    }
}

/// Columns `Q diag(s) z` with a random rotation `Q` and scales shrinking
/// geometrically, so leading eigenvalues are separated.
fn spread_columns(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> Vec<f64> {
    let g = DMatrix::from_vec(dim, dim, gaussian(rng, dim * dim));
    let q = g.qr().q();
    let mut out = Vec::with_capacity(dim * count);
    for _ in 0..count {
        let z: Vec<f64> = gaussian(rng, dim).iter().enumerate().map(|(j, v)| v * 0.75f64.powi(j as i32)).collect();
        for i in 0..dim {
            out.push((0..dim).map(|j| q[(i, j)] * z[j]).sum());
        }
    }
    out
}

fn reference_scatter(data: &[f64], dim: usize) -> Vec<f64> {
    let mut s = vec![0.0; dim * dim];
    for x in data.chunks_exact(dim) {
        for i in 0..dim {
            for j in 0..dim {
                s[i * dim + j] += x[i] * x[j];
            }
        }
    }
    s
}

/// Both L2 solvers against deflated power iteration on an independently
/// accumulated scatter matrix. Half the trials use the vector solver, half
/// the row solver; dimensions run up to 25.
pub fn l2_suite(trials: usize, seed: u64) -> Result<L2SuiteStats> {
    let mut stats = L2SuiteStats::default();
    for t in 0..trials {
        let mut rng = rng::stream(seed, "oracle-l2", &[t as u64]);
        let dim = rng.random_range(2..=25);
        let count = 10 * dim;
        let data = spread_columns(&mut rng, dim, count);
        let l = dim.min(4);
        let dirs = if t % 2 == 0 {
            l2pca_components(&DataColumns::new(dim, data.clone())?, l)?
        } else {
            l2_2dpca_components(&RowDataSet::uniform(dim, count, data.clone())?, l)?
        };
        let oracle = power_iteration_components(&reference_scatter(&data, dim), dim, l, POWER_TOL, POWER_MAX_ITER)?;
        for (d, (_, v)) in dirs.iter().zip(&oracle) {
            stats.worst_deviation = stats.worst_deviation.max(sign_distance(&d.w, v));
        }
        stats.trials += 1;
        stats.largest_dim = stats.largest_dim.max(dim);
    }
    Ok(stats)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OrthogonalityStats {
    pub trials: usize,
    /// Largest `|w_i^T w_j|`, `i != j`, over all four solvers.
    pub worst_inner: f64,
    /// Largest `|w_i^T x|` of data deflated by `w_1..w_i`.
    pub worst_residual: f64,
}

impl OrthogonalityStats {
    pub fn passes(&self) -> bool {
        self.worst_inner <= ORTHO_TOL && self.worst_residual <= ORTHO_TOL
    }

    pub fn summary(&self) -> String {
        format!(
            "{} trials x 4 solvers, worst |wi.wj| {:.1e}, worst deflated residual {:.1e}",
            self.trials, self.worst_inner, self.worst_residual
        )
    }
}

fn worst_pair(dirs: &[PrincipalDirection]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            worst = worst.max(dot(&dirs[i].w, &dirs[j].w).abs());
        }
    }
    worst
}

/// `L = min(4, dim)` components from every solver on random data.
pub fn orthogonality_suite(trials: usize, seed: u64) -> Result<OrthogonalityStats> {
    let opts = SolverOptions::default();
    let mut stats = OrthogonalityStats::default();
    for t in 0..trials {
        let mut rng = rng::stream(seed, "oracle-ortho", &[t as u64]);
        let dim = rng.random_range(2..=9);
        let n = dim + rng.random_range(0..=30);
        let x = DataColumns::new(dim, gaussian(&mut rng, dim * n))?;
        let rows = RowDataSet::from_columns(&x);
        let l = dim.min(4);
        let l1 = l1pca_components(&x, l, &opts)?;
        for set in
            [&l1, &l1_2dpca_components(&rows, l, &opts)?, &l2pca_components(&x, l)?, &l2_2dpca_components(&rows, l)?]
        {
            stats.worst_inner = stats.worst_inner.max(worst_pair(set));
        }
        let mut deflated = x.clone();
        for (i, d) in l1.iter().enumerate() {
            deflated = deflate_columns(&deflated, &d.w)?;
            for prev in &l1[..=i] {
                for col in deflated.columns() {
                    stats.worst_residual = stats.worst_residual.max(dot(&prev.w, col).abs());
                }
            }
        }
        stats.trials += 1;
    }
    Ok(stats)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RobustnessStats {
    pub trials: usize,
    /// Median angle, in degrees, between the true and the fitted direction.
    pub l1_median_deg: f64,
    pub l2_median_deg: f64,
    /// Smallest `|cos|` between the L1 and L2 directions on outlier-free data.
    pub clean_min_abs_cos: f64,
}

impl RobustnessStats {
    pub fn passes(&self) -> bool {
        self.l1_median_deg < self.l2_median_deg && self.clean_min_abs_cos >= 0.99
    }

    pub fn summary(&self) -> String {
        format!(
            "{} trials, median angular error L1 {:.2} deg vs L2 {:.2} deg, clean agreement |cos| >= {:.4}",
            self.trials, self.l1_median_deg, self.l2_median_deg, self.clean_min_abs_cos
        )
    }
}

pub const ROBUST_POINTS: usize = 100;
pub const ROBUST_OUTLIER_FRACTION: f64 = 0.1;
pub const ROBUST_OUTLIER_SCALE: f64 = 10.0;
pub const ROBUST_MINOR_SCALE: f64 = 0.1;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn angle_deg(u: &[f64], w: &[f64]) -> f64 {
    dot(u, w).abs().min(1.0).acos().to_degrees()
}

/// 2-D points spread along a random unit `u` (unit scale) with a small
/// orthogonal spread; then a tenth of the points are replaced by points along
/// `u`'s normal at ten times the scale.
pub fn robustness_suite(trials: usize, seed: u64) -> Result<RobustnessStats> {
    let opts = SolverOptions::default();
    let mut l1_err = Vec::with_capacity(trials);
    let mut l2_err = Vec::with_capacity(trials);
    let mut clean_min: f64 = 1.0;
    let outliers = (ROBUST_OUTLIER_FRACTION * ROBUST_POINTS as f64).round() as usize;
    for t in 0..trials {
        let mut rng = rng::stream(seed, "oracle-robust", &[t as u64]);
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let u = [theta.cos(), theta.sin()];
        let v = [-u[1], u[0]];
        let mut data = Vec::with_capacity(2 * ROBUST_POINTS);
        for _ in 0..ROBUST_POINTS {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample::<f64, _>(StandardNormal) * ROBUST_MINOR_SCALE;
            data.extend([a * u[0] + b * v[0], a * u[1] + b * v[1]]);
        }
        let clean = DataColumns::new(2, data.clone())?;
        let c1 = l1pca_first_component(&clean, &opts)?;
        let c2 = &l2pca_components(&clean, 1)?[0];
        clean_min = clean_min.min(dot(&c1.w, &c2.w).abs());

        for j in 0..outliers {
            let c: f64 = rng.sample::<f64, _>(StandardNormal) * ROBUST_OUTLIER_SCALE;
            data[2 * j] = c * v[0];
            data[2 * j + 1] = c * v[1];
        }
        let dirty = DataColumns::new(2, data)?;
        l1_err.push(angle_deg(&u, &l1pca_first_component(&dirty, &opts)?.w));
        l2_err.push(angle_deg(&u, &l2pca_components(&dirty, 1)?[0].w));
    }
    Ok(RobustnessStats {
        trials,
        l1_median_deg: median(l1_err),
        l2_median_deg: median(l2_err),
        clean_min_abs_cos: clean_min,
    })
}

/// One line per suite for the command-line tool.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteLine {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Runs every suite: the two L1 suites with `trials` instances, the rest with
/// `min(trials, 100)` (robustness with `min(trials, 50)`).
pub fn oracle_check(trials: usize, seed: u64) -> Result<Vec<SuiteLine>> {
    let small = trials.min(100);
    let a = l1pca_suite(trials, seed)?;
    let b = l1_2dpca_suite(trials, seed)?;
    let c = l2_suite(small, seed)?;
    let d = orthogonality_suite(small, seed)?;
    let e = robustness_suite(trials.min(50), seed)?;
    Ok(vec![
        SuiteLine { name: "l1pca-oracle", passed: a.passes(), detail: a.summary() },
        SuiteLine { name: "l1-2dpca-oracle", passed: b.passes(), detail: b.summary() },
        SuiteLine { name: "l2-power-iteration", passed: c.passes(), detail: c.summary() },
        SuiteLine { name: "deflation-orthogonality", passed: d.passes(), detail: d.summary() },
        SuiteLine { name: "outlier-robustness", passed: e.passes(), detail: e.summary() },
    ])
}
