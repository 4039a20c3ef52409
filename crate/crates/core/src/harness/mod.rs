//! Experiment orchestration: repeated seeded runs, result tables and the
//! train/evaluate plumbing behind the command-line tool.

pub mod oracle_check;
mod report;
pub mod spec_file;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::classifier::{fit_predict, predict, train_linear_ovr, ClassifierChoice, ClassifierOptions, LabeledFeatures};
use crate::dataio::{
    corrupt_with_block_noise, load_dataset, load_manifest, rng, split_by_roles, split_random_per_class, LabeledDataset,
    OcclusionSpec, Split, SplitSpec, Subset,
};
use crate::error::{invalid, Error, Result};
use crate::imagepatch::GrayImage;
use crate::network::{
    binarize_and_hash, block_histogram, extract_features, forward, train_network, BlockGrid, HashedMap, ModelFile,
    NetworkConfig, TrainedNetwork, Variant,
};

pub use report::{emit_results, format_cell, render_csv, render_text};

/// How training and test images are chosen in each run.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitProtocol {
    /// `i` random training images per class for each listed `i`.
    RandomPerClass(Vec<usize>),
    /// The fixed train/test roles of a manifest; every run sees the same split.
    Manifest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub dataset_root: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub networks: Vec<NetworkConfig>,
    pub split: SplitProtocol,
    /// Area fractions of test-image block noise; empty means clean tests only.
    pub occlusion: Vec<f64>,
    pub uniform_block_noise: bool,
    /// Block grids to sweep; empty means each network's own grid.
    pub block_sweep: Vec<BlockGrid>,
    pub repeats: usize,
    pub master_seed: u64,
    pub classifier: ClassifierChoice,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// One network per variant with default settings, `i` training images per
    /// class, ten repeats.
    pub fn new(networks: Vec<NetworkConfig>, train_per_class: usize, master_seed: u64) -> Self {
        Self {
            dataset_root: None,
            manifest: None,
            networks,
            split: SplitProtocol::RandomPerClass(vec![train_per_class]),
            occlusion: Vec::new(),
            uniform_block_noise: false,
            block_sweep: Vec::new(),
            repeats: 10,
            master_seed,
            classifier: ClassifierChoice::default(),
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(invalid("repeats must be at least 1"));
        }
        if self.networks.is_empty() {
            return Err(invalid("at least one network configuration is required"));
        }
        for n in &self.networks {
            n.validate()?;
        }
        if let SplitProtocol::RandomPerClass(is) = &self.split {
            if is.is_empty() || is.contains(&0) {
                return Err(invalid("train-per-class counts must be a non-empty list of positive values"));
            }
        }
        if let Some(q) = self.occlusion.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return Err(invalid(format!("occlusion fraction {q} must lie in (0, 1)")));
        }
        Ok(())
    }

    fn network_labels(&self) -> Vec<String> {
        self.networks
            .iter()
            .map(|n| {
                let shared = self.networks.iter().filter(|m| m.variant == n.variant).count() > 1;
                if shared {
                    format!("{} k={} L1={} L2={}", n.variant, n.k, n.l1, n.l2)
                } else {
                    n.variant.to_string()
                }
            })
            .collect()
    }
}

/// The protocol coordinates of one result row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolPoint {
    pub train_per_class: Option<usize>,
    pub occlusion: Option<f64>,
    pub blocks: BlockGrid,
}

impl std::fmt::Display for ProtocolPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.train_per_class {
            Some(i) => write!(f, "i={i}")?,
            None => f.write_str("manifest")?,
        }
        match self.occlusion {
            Some(q) => write!(f, " q={q:.2}")?,
            None => f.write_str(" clean")?,
        }
        write!(f, " B={}", self.blocks)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub network: String,
    pub variant: Variant,
    pub point: ProtocolPoint,
    pub mean: f64,
    pub rmse: f64,
    pub per_run: Vec<f64>,
    /// Mean seconds per run spent training and evaluating this row's network.
    pub wall_time_secs: f64,
    /// Why the row could not be computed (for example a block grid larger than the image).
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn find(&self, network: &str, point: &ProtocolPoint) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.network == network && &r.point == point)
    }

    /// First row for `variant` at occlusion `q`.
    pub fn row_for(&self, variant: Variant, q: Option<f64>) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.variant == variant && r.point.occlusion == q)
    }
}

/// Mean and population RMSE of per-run accuracies.
pub fn mean_and_rmse(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let rmse = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    (mean, rmse)
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

fn hashed_maps(img: &GrayImage, net: &TrainedNetwork) -> Result<Vec<HashedMap>> {
    forward(img, &net.filters)?.stage2.iter().map(|group| binarize_and_hash(group)).collect()
}

fn pooled(maps: &[HashedMap], l2: usize, grid: BlockGrid) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for m in maps {
        out.extend(block_histogram(m, l2, grid)?.into_iter().map(f64::from));
    }
    Ok(out)
}

fn all_hashed(images: &[GrayImage], net: &TrainedNetwork) -> Result<Vec<Vec<HashedMap>>> {
    images.par_iter().map(|img| hashed_maps(img, net)).collect()
}

fn pooled_all(maps: &[Vec<HashedMap>], l2: usize, grid: BlockGrid) -> Result<Vec<Vec<f64>>> {
    maps.iter().map(|m| pooled(m, l2, grid)).collect()
}

/// Trains `cfg` on `train`, fits `classifier` on the training features and
/// returns the fraction of `test` classified correctly.
pub fn run_single(
    cfg: &NetworkConfig,
    train: &Subset,
    test: &Subset,
    classes: usize,
    classifier: &ClassifierChoice,
) -> Result<f64> {
    if train.is_empty() {
        return Err(invalid("empty training set"));
    }
    if test.is_empty() {
        return Err(invalid("empty test set"));
    }
    let net = train_network(&train.images, cfg).map_err(|e| Error::stage("train", e))?;
    let tr = extract_features(&train.images, &net).map_err(|e| Error::stage("extract", e))?;
    let te = extract_features(&test.images, &net).map_err(|e| Error::stage("extract", e))?;
    let data = LabeledFeatures::from_counts(&tr, train.labels.clone(), classes)?;
    let te: Vec<Vec<f64>> = te.iter().map(|f| f.to_f64()).collect();
    let pred = fit_predict(classifier, &data, &te).map_err(|e| Error::stage("classify", e))?;
    Ok(accuracy(&pred, &test.labels))
}

/// Corrupts every test image of one run at fraction `q`. Seeds depend on the
/// run, the training count, `q` and the image's dataset index only.
pub fn corrupt_test_set(
    test: &Subset,
    q: f64,
    uniform_block: bool,
    master_seed: u64,
    run: usize,
    tag: u64,
) -> Result<Vec<GrayImage>> {
    test.images
        .par_iter()
        .zip(&test.indices)
        .map(|(img, &j)| {
            let seed = rng::derive_seed(master_seed, "occlusion", &[run as u64, tag, q.to_bits(), j as u64]);
            corrupt_with_block_noise(img, &OcclusionSpec { area_fraction: q, seed, uniform_block })
        })
        .collect()
}

/// Split for run `run` (0-based). A pure function of the master seed, the run
/// and the training count.
pub fn run_split(ds: &LabeledDataset, protocol_i: Option<usize>, master_seed: u64, run: usize) -> Result<Split> {
    match protocol_i {
        Some(i) => {
            let seed = rng::derive_seed(master_seed, "split", &[run as u64, i as u64]);
            split_random_per_class(ds, &SplitSpec { train_per_class: i, seed })
        }
        None => split_by_roles(ds),
    }
}

struct RowPlan {
    network: usize,
    train_idx: usize,
    grid: BlockGrid,
    occlusion_idx: Option<usize>,
    error: Option<String>,
}

fn plan_rows(spec: &ExperimentSpec, train_counts: &[Option<usize>], dims: (usize, usize)) -> Result<Vec<RowPlan>> {
    let mut rows = Vec::new();
    for (n, cfg) in spec.networks.iter().enumerate() {
        let grids = if spec.block_sweep.is_empty() { vec![cfg.blocks] } else { spec.block_sweep.clone() };
        for t in 0..train_counts.len() {
            for &grid in &grids {
                let error = (grid.rows > dims.0 || grid.cols > dims.1)
                    .then(|| format!("block grid {grid} does not fit {}x{} images", dims.0, dims.1));
                if let (Some(e), true) = (&error, spec.block_sweep.is_empty()) {
                    return Err(invalid(e.clone()));
                }
                let qs: Vec<Option<usize>> =
                    if spec.occlusion.is_empty() { vec![None] } else { (0..spec.occlusion.len()).map(Some).collect() };
                for q in qs {
                    rows.push(RowPlan { network: n, train_idx: t, grid, occlusion_idx: q, error: error.clone() });
                }
            }
        }
    }
    Ok(rows)
}

/// Accuracies of one run, indexed like the row plan, plus per-network seconds.
fn run_once(
    spec: &ExperimentSpec,
    ds: &LabeledDataset,
    plan: &[RowPlan],
    train_counts: &[Option<usize>],
    run: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut acc = vec![f64::NAN; plan.len()];
    let mut secs = vec![0.0; spec.networks.len()];
    let wrap = |phase: &str, e: Error| Error::run(run + 1, phase, e);
    for (t, &i) in train_counts.iter().enumerate() {
        let split = run_split(ds, i, spec.master_seed, run).map_err(|e| wrap("split", e))?;
        let train = ds.subset(&split.train);
        let test = ds.subset(&split.test);
        let tag = i.map_or(0, |i| i as u64);
        let test_sets: Vec<Vec<GrayImage>> = if spec.occlusion.is_empty() {
            vec![test.images.clone()]
        } else {
            spec.occlusion
                .iter()
                .map(|&q| corrupt_test_set(&test, q, spec.uniform_block_noise, spec.master_seed, run, tag))
                .collect::<Result<_>>()
                .map_err(|e| wrap("corrupt", e))?
        };
        for (n, cfg) in spec.networks.iter().enumerate() {
            let rows: Vec<usize> = (0..plan.len())
                .filter(|&p| plan[p].network == n && plan[p].train_idx == t && plan[p].error.is_none())
                .collect();
            if rows.is_empty() {
                continue;
            }
            let start = Instant::now();
            let phase = format!("train {}", cfg.variant);
            let net = train_network(&train.images, cfg).map_err(|e| wrap(&phase, e))?;
            let train_maps = all_hashed(&train.images, &net).map_err(|e| wrap("extract", e))?;
            let test_maps: Vec<Vec<Vec<HashedMap>>> = test_sets
                .iter()
                .map(|set| all_hashed(set, &net))
                .collect::<Result<_>>()
                .map_err(|e| wrap("extract", e))?;
            for p in rows {
                let row = &plan[p];
                let tr = pooled_all(&train_maps, cfg.l2, row.grid).map_err(|e| wrap("extract", e))?;
                let te = pooled_all(&test_maps[row.occlusion_idx.unwrap_or(0)], cfg.l2, row.grid)
                    .map_err(|e| wrap("extract", e))?;
                let data = LabeledFeatures::new(tr, train.labels.clone(), ds.class_count())
                    .map_err(|e| wrap("classify", e))?;
                let pred = fit_predict(&spec.classifier, &data, &te).map_err(|e| wrap("classify", e))?;
                acc[p] = accuracy(&pred, &test.labels);
            }
            secs[n] += start.elapsed().as_secs_f64();
        }
    }
    Ok((acc, secs))
}

/// Loads the dataset an experiment names: its manifest if set, otherwise its
/// dataset root.
pub fn load_experiment_data(spec: &ExperimentSpec) -> Result<LabeledDataset> {
    match (&spec.manifest, &spec.dataset_root) {
        (Some(m), _) => load_manifest(m),
        (None, Some(root)) => load_dataset(root),
        (None, None) => Err(invalid("experiment names neither a dataset root nor a manifest")),
    }
}

/// Runs every network under every protocol point, `repeats` times. Within a
/// run all networks share the split and the corrupted test images.
pub fn run_experiment(spec: &ExperimentSpec, ds: &LabeledDataset) -> Result<ResultTable> {
    spec.validate()?;
    let train_counts: Vec<Option<usize>> = match &spec.split {
        SplitProtocol::RandomPerClass(is) => is.iter().map(|&i| Some(i)).collect(),
        SplitProtocol::Manifest => vec![None],
    };
    let plan = plan_rows(spec, &train_counts, ds.dims())?;
    let outcomes: Vec<Result<(Vec<f64>, Vec<f64>)>> =
        (0..spec.repeats).into_par_iter().map(|r| run_once(spec, ds, &plan, &train_counts, r)).collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let labels = spec.network_labels();
    let rows = plan
        .iter()
        .enumerate()
        .map(|(p, row)| {
            let per_run: Vec<f64> =
                if row.error.is_some() { vec![] } else { outcomes.iter().map(|o| o.0[p]).collect() };
            let (mean, rmse) = if per_run.is_empty() { (f64::NAN, f64::NAN) } else { mean_and_rmse(&per_run) };
            let wall = outcomes.iter().map(|o| o.1[row.network]).sum::<f64>() / outcomes.len() as f64;
            let cfg = &spec.networks[row.network];
            ResultRow {
                network: labels[row.network].clone(),
                variant: cfg.variant,
                point: ProtocolPoint {
                    train_per_class: train_counts[row.train_idx],
                    occlusion: row.occlusion_idx.map(|q| spec.occlusion[q]),
                    blocks: row.grid,
                },
                mean,
                rmse,
                per_run,
                wall_time_secs: wall,
                error: row.error.clone(),
            }
        })
        .collect();
    Ok(ResultTable { rows })
}

/// [`run_experiment`] over `spec.block_sweep`, one row per grid.
pub fn run_block_size_sweep(spec: &ExperimentSpec, ds: &LabeledDataset) -> Result<ResultTable> {
    if spec.block_sweep.is_empty() {
        return Err(invalid("block-size sweep needs at least one grid"));
    }
    run_experiment(spec, ds)
}

/// Trains a network and a linear classifier on every image of `ds`.
pub fn train_model(ds: &LabeledDataset, cfg: &NetworkConfig, opts: &ClassifierOptions) -> Result<ModelFile> {
    let network = train_network(ds.images(), cfg)?;
    let feats = extract_features(ds.images(), &network)?;
    let data = LabeledFeatures::from_counts(&feats, ds.labels().to_vec(), ds.class_count())?;
    let classifier = train_linear_ovr(&data, opts).map_err(|e| Error::stage("classify", e))?;
    Ok(ModelFile { network, classifier: Some(classifier), class_names: ds.class_names().to_vec() })
}

/// Fraction of `ds` the model's classifier labels correctly. Labels are
/// matched by class name, so the dataset may hold a subset of the classes.
pub fn evaluate_model(model: &ModelFile, ds: &LabeledDataset, images: &[GrayImage]) -> Result<f64> {
    let clf = model.classifier.as_ref().ok_or_else(|| invalid("model file holds no classifier"))?;
    let ids: Vec<usize> = ds
        .class_names()
        .iter()
        .map(|name| {
            model
                .class_names
                .iter()
                .position(|m| m == name)
                .ok_or_else(|| Error::Data(format!("class {name:?} is unknown to the model")))
        })
        .collect::<Result<_>>()?;
    let feats = extract_features(images, &model.network)?;
    let mut correct = 0;
    for (f, &l) in feats.iter().zip(ds.labels()) {
        if predict(clf, &f.to_f64())? == ids[l] {
            correct += 1;
        }
    }
    Ok(correct as f64 / images.len() as f64)
}
