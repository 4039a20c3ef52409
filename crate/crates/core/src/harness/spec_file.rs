//! Experiment spec files.
//!
//! A spec file is TOML with an `[experiment]` table and optional
//! `[[network]]` entries:
//!
//! ```toml
//! [experiment]
//! data = "faces"                 # dataset root (or: manifest = "list.csv")
//! out = "results"
//! repeats = 10
//! seed = 42
//! train_per_class = [2, 4]       # or a single integer
//! occlusion = [0.1, 0.3]
//! uniform_block = false
//! block_sweep = ["2x2", "4x4"]
//! classifier = "linear"          # or "nearest"
//! c = 1.0
//! epochs = 300
//! variants = ["PCANet", "L1-2D2PCANet"]
//! k = 5
//! l1 = 4
//! l2 = 4
//! blocks = "4x2"
//!
//! [[network]]                    # replaces `variants` when present
//! variant = "2DPCANet"
//! blocks = "2x2"
//! ```
//!
//! Network entries inherit `k`, `l1`, `l2`, `blocks`, `tol` and `max_iter`
//! from `[experiment]` unless they set their own.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{ExperimentSpec, SplitProtocol};
use crate::classifier::{ClassifierChoice, ClassifierOptions};
use crate::error::{invalid, Error, Result};
use crate::network::{BlockGrid, NetworkConfig, Variant};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetworkEntry {
    pub variant: Option<String>,
    pub k: Option<usize>,
    pub l1: Option<usize>,
    pub l2: Option<usize>,
    pub blocks: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub data: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
    pub train_per_class: Option<OneOrMany<usize>>,
    pub occlusion: Option<OneOrMany<f64>>,
    pub uniform_block: Option<bool>,
    pub block_sweep: Option<Vec<String>>,
    pub classifier: Option<String>,
    pub c: Option<f64>,
    pub epochs: Option<usize>,
    pub l2_normalize: Option<bool>,
    pub variants: Option<Vec<String>>,
    pub k: Option<usize>,
    pub l1: Option<usize>,
    pub l2: Option<usize>,
    pub blocks: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// Parsed but unresolved spec file; command-line flags are merged in with
/// [`ExperimentFile::overridden_by`].
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub network: Vec<NetworkEntry>,
}

macro_rules! take_over {
    ($base:expr, $over:expr, $($f:ident),*) => {
        $( if $over.$f.is_some() { $base.$f = $over.$f.clone(); } )*
    };
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(format!("spec file: {e}")))
    }

    /// Reads a spec file; relative data, manifest and output paths are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut f = Self::parse(&text).map_err(|e| match e {
            Error::InvalidParameter(m) => invalid(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let e = &mut f.experiment;
        for p in [&mut e.data, &mut e.manifest, &mut e.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(f)
    }

    /// Fields set in `over` replace those of `self`; a non-empty network
    /// list or variant list replaces the networks.
    pub fn overridden_by(mut self, over: &ExperimentFile) -> Self {
        let (b, o) = (&mut self.experiment, &over.experiment);
        take_over!(
            b,
            o,
            data,
            manifest,
            out,
            repeats,
            seed,
            train_per_class,
            occlusion,
            uniform_block,
            block_sweep,
            classifier,
            c,
            epochs,
            l2_normalize,
            k,
            l1,
            l2,
            blocks,
            tol,
            max_iter
        );
        if o.variants.is_some() {
            b.variants = o.variants.clone();
            self.network.clear();
        }
        if !over.network.is_empty() {
            self.network = over.network.clone();
        }
        self
    }

    fn network_config(&self, entry: &NetworkEntry) -> Result<NetworkConfig> {
        let e = &self.experiment;
        let variant: Variant =
            entry.variant.as_deref().ok_or_else(|| invalid("network entry needs a variant"))?.parse()?;
        let mut cfg = NetworkConfig::new(variant);
        cfg.k = entry.k.or(e.k).unwrap_or(cfg.k);
        cfg.l1 = entry.l1.or(e.l1).unwrap_or(cfg.l1);
        cfg.l2 = entry.l2.or(e.l2).unwrap_or(cfg.l2);
        if let Some(b) = entry.blocks.as_ref().or(e.blocks.as_ref()) {
            cfg.blocks = b.parse()?;
        }
        cfg.solver.tol = entry.tol.or(e.tol).unwrap_or(cfg.solver.tol);
        cfg.solver.max_iter = entry.max_iter.or(e.max_iter).unwrap_or(cfg.solver.max_iter);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies defaults: all four variants, `i = 2`, ten repeats, seed 0,
    /// the linear classifier.
    pub fn resolve(&self) -> Result<ExperimentSpec> {
        let e = &self.experiment;
        let entries: Vec<NetworkEntry> = if !self.network.is_empty() {
            self.network.clone()
        } else {
            let names: Vec<String> = match &e.variants {
                Some(v) => v.clone(),
                None => Variant::ALL.iter().map(|v| v.name().to_string()).collect(),
            };
            names.into_iter().map(|v| NetworkEntry { variant: Some(v), ..Default::default() }).collect()
        };
        let networks = entries.iter().map(|n| self.network_config(n)).collect::<Result<Vec<_>>>()?;

        let split = match (&e.manifest, &e.train_per_class) {
            (Some(_), None) => SplitProtocol::Manifest,
            (_, Some(is)) => SplitProtocol::RandomPerClass(is.to_vec()),
            (None, None) => SplitProtocol::RandomPerClass(vec![2]),
        };
        let opts = ClassifierOptions {
            c: e.c.unwrap_or(1.0),
            epochs: e.epochs.unwrap_or(300),
            l2_normalize: e.l2_normalize.unwrap_or(false),
        };
        let classifier = match e.classifier.as_deref().map(str::to_ascii_lowercase).as_deref() {
            None | Some("linear") | Some("svm") => ClassifierChoice::Linear(opts),
            Some("nearest") | Some("nn") | Some("1nn") => ClassifierChoice::NearestNeighbor,
            Some(other) => return Err(invalid(format!("unknown classifier {other:?}"))),
        };
        let block_sweep = e.block_sweep.iter().flatten().map(|s| s.parse::<BlockGrid>()).collect::<Result<Vec<_>>>()?;
        let spec = ExperimentSpec {
            dataset_root: e.data.clone(),
            manifest: e.manifest.clone(),
            networks,
            split,
            occlusion: e.occlusion.as_ref().map(OneOrMany::to_vec).unwrap_or_default(),
            uniform_block_noise: e.uniform_block.unwrap_or(false),
            block_sweep,
            repeats: e.repeats.unwrap_or(10),
            master_seed: e.seed.unwrap_or(0),
            classifier,
            output_dir: e.out.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}
