//! Dataset ingestion, seeded splits and block-noise corruption.

mod pgm;
pub mod rng;
pub mod synth;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagepatch::GrayImage;

pub use pgm::{decode_pgm, decode_png, encode_pgm, encode_pgm_ascii, read_image, write_pgm, ImageFormat};

/// Which side of a fixed split an image belongs to, when a manifest says so.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" | "gallery" => Ok(Role::Train),
            "test" | "probe" => Ok(Role::Test),
            other => Err(Error::Data(format!("unknown manifest role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    images: Vec<GrayImage>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    paths: Vec<PathBuf>,
    roles: Option<Vec<Role>>,
}

impl LabeledDataset {
    /// Validates uniform dimensions and dense labels. `paths` may be empty
    /// for in-memory data.
    pub fn new(
        images: Vec<GrayImage>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        paths: Vec<PathBuf>,
    ) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Data("dataset has no images".into()));
        }
        if labels.len() != images.len() {
            return Err(Error::DimensionMismatch { expected: images.len(), found: labels.len() });
        }
        if !paths.is_empty() && paths.len() != images.len() {
            return Err(Error::DimensionMismatch { expected: images.len(), found: paths.len() });
        }
        let dims = images[0].dims();
        if let Some(j) = images.iter().position(|im| im.dims() != dims) {
            let (found_rows, found_cols) = images[j].dims();
            return Err(Error::MixedDimensions {
                path: paths.get(j).cloned().unwrap_or_else(|| PathBuf::from(format!("#{j}"))),
                rows: dims.0,
                cols: dims.1,
                found_rows,
                found_cols,
            });
        }
        let mut seen = vec![false; class_names.len()];
        for &l in &labels {
            *seen
                .get_mut(l)
                .ok_or_else(|| Error::Data(format!("label {l} out of range for {} classes", class_names.len())))? =
                true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::Data(format!("class {:?} has no images", class_names[c])));
        }
        Ok(Self { images, labels, class_names, paths, roles: None })
    }

    pub fn with_roles(mut self, roles: Vec<Role>) -> Result<Self> {
        if roles.len() != self.images.len() {
            return Err(Error::DimensionMismatch { expected: self.images.len(), found: roles.len() });
        }
        self.roles = Some(roles);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[GrayImage] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }

    pub fn roles(&self) -> Option<&[Role]> {
        self.roles.as_deref()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.images[0].dims()
    }

    /// Indices of each class's images, in dataset order.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_names.len()];
        for (j, &l) in self.labels.iter().enumerate() {
            out[l].push(j);
        }
        out
    }

    /// Images and labels at `indices`, keeping the full class list. Classes
    /// absent from the subset are allowed here.
    pub fn subset(&self, indices: &[usize]) -> Subset {
        Subset {
            images: indices.iter().map(|&j| self.images[j].clone()).collect(),
            labels: indices.iter().map(|&j| self.labels[j]).collect(),
            indices: indices.to_vec(),
        }
    }

    /// Replaces every image with a nearest-neighbour resample.
    pub fn resized(&self, rows: usize, cols: usize) -> Result<Self> {
        let images = self.images.iter().map(|im| im.resize_nearest(rows, cols)).collect::<Result<_>>()?;
        Ok(Self { images, ..self.clone() })
    }
}

/// A slice of a dataset handed to training or evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    pub images: Vec<GrayImage>,
    pub labels: Vec<usize>,
    /// Positions in the parent dataset.
    pub indices: Vec<usize>,
}

impl Subset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<GrayImage>> {
    paths.par_iter().map(|p| read_image(p)).collect()
}

/// Loads `root/<class>/<image>`. Classes and files are taken in
/// lexicographic order; files with unsupported extensions are skipped.
pub fn load_dataset(root: &Path) -> Result<LabeledDataset> {
    if !root.is_dir() {
        return Err(Error::Data(format!("dataset root {} is not a directory", root.display())));
    }
    let mut class_names = Vec::new();
    let mut labels = Vec::new();
    let mut paths = Vec::new();
    for dir in sorted_entries(root)? {
        if !dir.is_dir() {
            log::warn!("skipping {} (not a class directory)", dir.display());
            continue;
        }
        let mut files = Vec::new();
        for f in sorted_entries(&dir)? {
            if f.is_file() && ImageFormat::from_path(&f).is_some() {
                files.push(f);
            } else {
                log::warn!("skipping unsupported file {}", f.display());
            }
        }
        if files.is_empty() {
            log::warn!("skipping class directory {} with no images", dir.display());
            continue;
        }
        let label = class_names.len();
        class_names.push(dir.file_name().unwrap().to_string_lossy().into_owned());
        labels.extend(std::iter::repeat_n(label, files.len()));
        paths.extend(files);
    }
    if paths.is_empty() {
        return Err(Error::Data(format!("no images under {}", root.display())));
    }
    let images = read_all(&paths)?;
    LabeledDataset::new(images, labels, class_names, paths)
}

/// Loads from a CSV manifest of `path,label[,role]` rows. Relative paths are
/// resolved against the manifest's directory; a header row is optional.
/// Class names are sorted lexicographically to assign label ids.
pub fn load_manifest(manifest: &Path) -> Result<LabeledDataset> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(manifest)
        .map_err(|e| Error::Data(format!("{}: {e}", manifest.display())))?;
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("{}: {e}", manifest.display())))?;
        if line == 0 && rec.get(0) == Some("path") {
            continue;
        }
        if rec.len() < 2 || rec.len() > 3 {
            return Err(Error::Data(format!("{}: row {} needs path,label[,role]", manifest.display(), line + 1)));
        }
        let role = rec.get(2).map(str::parse::<Role>).transpose()?;
        rows.push((base.join(&rec[0]), rec[1].to_string(), role));
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("manifest {} lists no images", manifest.display())));
    }
    let has_roles = rows.iter().filter(|r| r.2.is_some()).count();
    if has_roles != 0 && has_roles != rows.len() {
        return Err(Error::Data("manifest gives a role for some rows but not all".into()));
    }
    let ids: BTreeMap<&str, usize> = {
        let mut names: Vec<&str> = rows.iter().map(|r| r.1.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        names.into_iter().enumerate().map(|(i, n)| (n, i)).collect()
    };
    let class_names = ids.keys().map(|s| s.to_string()).collect();
    let labels = rows.iter().map(|r| ids[r.1.as_str()]).collect();
    let paths: Vec<PathBuf> = rows.iter().map(|r| r.0.clone()).collect();
    let images = read_all(&paths)?;
    let ds = LabeledDataset::new(images, labels, class_names, paths)?;
    if has_roles == 0 {
        Ok(ds)
    } else {
        ds.with_roles(rows.into_iter().map(|r| r.2.unwrap()).collect())
    }
}

/// Writes every image as binary PGM under `root/<class>/<nnn>.pgm`.
pub fn write_dataset(ds: &LabeledDataset, root: &Path) -> Result<Vec<PathBuf>> {
    let mut counters = vec![0usize; ds.class_count()];
    let mut written = Vec::with_capacity(ds.len());
    for (img, &l) in ds.images.iter().zip(&ds.labels) {
        let dir = root.join(&ds.class_names[l]);
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{:03}.pgm", counters[l]));
        counters[l] += 1;
        write_pgm(img, &path)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_per_class: usize,
    pub seed: u64,
}

/// Indices into the parent dataset, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Draws `i` training images per class without replacement; the rest test.
pub fn split_random_per_class(ds: &LabeledDataset, spec: &SplitSpec) -> Result<Split> {
    let i = spec.train_per_class;
    if i == 0 {
        return Err(Error::Data("at least one training image per class is required".into()));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, members) in ds.class_members().iter().enumerate() {
        if i >= members.len() {
            return Err(Error::Data(format!(
                "class {:?} has {} images; cannot take {i} for training and keep a test image",
                ds.class_names[c],
                members.len()
            )));
        }
        let mut rng = rng::stream(spec.seed, "split", &[c as u64]);
        let mut chosen = vec![false; members.len()];
        for p in sample(&mut rng, members.len(), i) {
            chosen[p] = true;
        }
        for (p, &j) in members.iter().enumerate() {
            if chosen[p] {
                train.push(j)
            } else {
                test.push(j)
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// The fixed train/test assignment of a manifest with roles.
pub fn split_by_roles(ds: &LabeledDataset) -> Result<Split> {
    let roles = ds.roles().ok_or_else(|| Error::Data("dataset has no train/test roles".into()))?;
    let (train, test): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&j| roles[j] == Role::Train);
    if train.is_empty() || test.is_empty() {
        return Err(Error::Data("manifest roles leave the train or test side empty".into()));
    }
    Ok(Split { train, test })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionSpec {
    pub area_fraction: f64,
    pub seed: u64,
    /// Fill the whole block with one value instead of per-pixel 0/255.
    pub uniform_block: bool,
}

impl OcclusionSpec {
    pub fn new(area_fraction: f64, seed: u64) -> Self {
        Self { area_fraction, seed, uniform_block: false }
    }
}

/// Side of the square noise block for a `rows × cols` image.
pub fn block_side(rows: usize, cols: usize, q: f64) -> Result<usize> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("occlusion fraction {q} must lie in (0, 1)")));
    }
    let area = q * (rows * cols) as f64;
    if area < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "occlusion fraction {q} covers less than one pixel of a {rows}x{cols} image"
        )));
    }
    Ok((area.sqrt().round() as usize).clamp(1, rows.min(cols)))
}

/// Placement of the block drawn for `spec`, as `(top, left, side)`.
pub fn block_placement(rows: usize, cols: usize, spec: &OcclusionSpec) -> Result<(usize, usize, usize)> {
    let s = block_side(rows, cols, spec.area_fraction)?;
    let mut rng = rng::stream(spec.seed, "occlusion", &[]);
    let top = rng.random_range(0..=rows - s);
    let left = rng.random_range(0..=cols - s);
    Ok((top, left, s))
}

/// Overwrites one randomly placed square block with 0/255 noise.
pub fn corrupt_with_block_noise(img: &GrayImage, spec: &OcclusionSpec) -> Result<GrayImage> {
    let (rows, cols) = img.dims();
    let s = block_side(rows, cols, spec.area_fraction)?;
    let mut rng = rng::stream(spec.seed, "occlusion", &[]);
    let top = rng.random_range(0..=rows - s);
    let left = rng.random_range(0..=cols - s);
    let fill = if rng.random_bool(0.5) { 255.0 } else { 0.0 };
    let mut out = img.clone();
    for r in top..top + s {
        for c in left..left + s {
            let v = if spec.uniform_block {
                fill
            } else if rng.random_bool(0.5) {
                255.0
            } else {
                0.0
            };
            out.set(r, c, v);
        }
    }
    Ok(out)
}
