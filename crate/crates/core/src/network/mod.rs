//! The two-stage filter cascade and its hashing/histogram pooling.
//!
//! Training learns a stage-1 bank from mean-removed patches of the training
//! images, filters every image with it, then learns one stage-2 bank shared
//! by all stage-1 channels from the pooled patches of those maps. Mean
//! removal only affects learning; the forward pass filters raw images.
//!
//! Vectorised variants reshape each learned `k*k` direction into a kernel.
//! Two-directional variants learn `w_x` from patch rows and `w_y` from rows
//! of transposed patches and use the rank-one kernel `w_x w_y^T`.

mod config;
pub(crate) mod format;

pub use config::{BlockGrid, NetworkConfig, Variant};
pub use format::{read_model, write_model, ModelFile, FORMAT_VERSION, MAGIC};

use nalgebra::DMatrix;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::imagepatch::{
    convolve_same, extract_row_patches, extract_vectorized_patches, GrayImage, Kernel, PatchSet, RemovePatchMean,
    RowPatchSet,
};
use crate::subspace::{self, PrincipalDirection, SolverOptions};

/// Learned kernels of both stages, in solver output order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub stage1: Vec<Kernel>,
    pub stage2: Vec<Kernel>,
}

/// Mean-removed patches pooled over every image (and channel) of a stage.
#[derive(Debug, Clone, PartialEq)]
pub enum StageInput {
    Vectorized(PatchSet),
    RowWise(RowPatchSet),
}

impl StageInput {
    /// Number of pooled patches.
    pub fn len(&self) -> usize {
        match self {
            StageInput::Vectorized(p) => p.len(),
            StageInput::RowWise(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outputs of both convolution stages for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMaps {
    pub stage1: Vec<GrayImage>,
    /// `stage2[p][q]` is stage-1 map `p` filtered by stage-2 kernel `q`.
    pub stage2: Vec<Vec<GrayImage>>,
}

/// Per-pixel binary codes in `[0, 2^L2 - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashedMap {
    pub rows: usize,
    pub cols: usize,
    pub codes: Vec<u32>,
}

/// Concatenated block histograms, length `2^L2 * L1 * B`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureVector(pub Vec<u32>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| f64::from(v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedNetwork {
    pub config: NetworkConfig,
    pub filters: FilterBank,
    /// Training image size; inputs to [`extract_feature`] must match.
    pub image_dims: (usize, usize),
    /// SHA-256 over the configuration and every training pixel.
    pub fingerprint: [u8; 32],
}

fn uniform_dims(images: &[GrayImage]) -> Result<(usize, usize)> {
    let first = images.first().ok_or_else(|| invalid("no training images"))?;
    let dims = first.dims();
    if let Some(bad) = images.iter().find(|i| i.dims() != dims) {
        return Err(invalid(format!("mixed image sizes: {}x{} and {}x{}", dims.0, dims.1, bad.rows(), bad.cols())));
    }
    Ok(dims)
}

/// Pools mean-removed patches of `images` in the layout `variant` learns from.
pub fn build_stage_input(images: &[GrayImage], cfg: &NetworkConfig) -> Result<StageInput> {
    cfg.validate()?;
    uniform_dims(images)?;
    let k = cfg.k;
    if cfg.variant.is_row_wise() {
        let parts: Vec<RowPatchSet> =
            images.par_iter().map(|img| extract_row_patches(img, k)?.remove_patch_mean()).collect::<Result<_>>()?;
        let mut pooled = RowPatchSet::empty(k, true);
        for p in &parts {
            pooled.append(p)?;
        }
        Ok(StageInput::RowWise(pooled))
    } else {
        let parts: Vec<PatchSet> = images
            .par_iter()
            .map(|img| extract_vectorized_patches(img, k)?.remove_patch_mean())
            .collect::<Result<_>>()?;
        let mut pooled = PatchSet::empty(k, true);
        for p in &parts {
            pooled.append(p)?;
        }
        Ok(StageInput::Vectorized(pooled))
    }
}

fn solve(data: Vec<f64>, dim: usize, count: usize, l1: bool, opts: &SolverOptions) -> Result<Vec<PrincipalDirection>> {
    if l1 {
        subspace::l1::l1_components_owned(data, dim, count, opts)
    } else {
        subspace::l2::l2_components_slab(&data, dim, count)
    }
}

/// Learns `count` kernels from a pooled stage input.
pub fn learn_filters(input: StageInput, cfg: &NetworkConfig, count: usize) -> Result<Vec<Kernel>> {
    if input.is_empty() {
        return Err(invalid("empty stage input"));
    }
    let k = cfg.k;
    let l1 = cfg.variant.is_l1();
    match input {
        StageInput::Vectorized(ps) => {
            if cfg.variant.is_row_wise() {
                return Err(invalid("row-wise variant given vectorised patches"));
            }
            let dirs = solve(ps.into_data(), k * k, count, l1, &cfg.solver)?;
            dirs.iter().map(|d| Kernel::from_vector(k, &d.w)).collect()
        }
        StageInput::RowWise(rs) => {
            if !cfg.variant.is_row_wise() {
                return Err(invalid("vectorised variant given row-wise patches"));
            }
            let (along_x, along_y) = rs.into_parts();
            let wx = solve(along_x, k, count, l1, &cfg.solver).map_err(|e| Error::stage("row directions", e))?;
            let wy = solve(along_y, k, count, l1, &cfg.solver).map_err(|e| Error::stage("column directions", e))?;
            Ok(wx.iter().zip(&wy).map(|(x, y)| Kernel::outer(&x.w, &y.w)).collect())
        }
    }
}

pub fn learn_stage1_filters(images: &[GrayImage], cfg: &NetworkConfig) -> Result<Vec<Kernel>> {
    learn_filters(build_stage_input(images, cfg)?, cfg, cfg.l1)
}

/// `L1` same-size maps, one per stage-1 kernel.
pub fn stage1_forward(img: &GrayImage, filters: &[Kernel]) -> Result<Vec<GrayImage>> {
    if filters.is_empty() {
        return Err(invalid("empty filter bank"));
    }
    filters.iter().map(|f| convolve_same(img, f)).collect()
}

/// Pools stage-1 maps of every image and every channel into one input.
pub fn build_stage2_input(maps: &[Vec<GrayImage>], cfg: &NetworkConfig) -> Result<StageInput> {
    let flat: Vec<GrayImage> = maps.iter().flatten().cloned().collect();
    if flat.is_empty() {
        return Err(invalid("no stage-1 maps"));
    }
    build_stage_input(&flat, cfg)
}

pub fn learn_stage2_filters(input: StageInput, cfg: &NetworkConfig) -> Result<Vec<Kernel>> {
    learn_filters(input, cfg, cfg.l2)
}

/// `L1 * L2` maps grouped by stage-1 parent.
pub fn stage2_forward(stage1: &[GrayImage], filters: &[Kernel]) -> Result<Vec<Vec<GrayImage>>> {
    if filters.is_empty() {
        return Err(invalid("empty filter bank"));
    }
    if let Some(first) = stage1.first() {
        if stage1.iter().any(|m| m.dims() != first.dims()) {
            return Err(invalid("stage-1 maps differ in size"));
        }
    }
    stage1.iter().map(|m| filters.iter().map(|f| convolve_same(m, f)).collect()).collect()
}

/// `T = sum_l 2^(l-1) H(map_l)` per pixel, with `H(x) = 1` iff `x >= 0`.
pub fn binarize_and_hash(group: &[GrayImage]) -> Result<HashedMap> {
    let first = group.first().ok_or_else(|| invalid("empty map group"))?;
    if group.len() > 31 {
        return Err(invalid("at most 31 maps fit in a hash code"));
    }
    let (rows, cols) = first.dims();
    let mut codes = vec![0u32; rows * cols];
    for (l, map) in group.iter().enumerate() {
        if map.dims() != (rows, cols) {
            return Err(invalid("maps in a group differ in size"));
        }
        for (c, &v) in codes.iter_mut().zip(map.pixels()) {
            if v >= 0.0 {
                *c |= 1 << l;
            }
        }
    }
    Ok(HashedMap { rows, cols, codes })
}

/// Row or column ranges of `parts` blocks; the last absorbs the remainder.
fn block_bounds(len: usize, parts: usize) -> impl Iterator<Item = (usize, usize)> {
    let step = len / parts;
    (0..parts).map(move |i| (i * step, if i + 1 == parts { len } else { (i + 1) * step }))
}

/// Row-major concatenation of one `2^L2`-bin count histogram per block.
pub fn block_histogram(t: &HashedMap, l2: usize, grid: BlockGrid) -> Result<Vec<u32>> {
    if grid.rows > t.rows || grid.cols > t.cols || grid.rows == 0 || grid.cols == 0 {
        return Err(invalid(format!("block grid {grid} does not fit a {}x{} map", t.rows, t.cols)));
    }
    let bins = 1usize << l2;
    let mut hist = vec![0u32; bins * grid.count()];
    let mut block = 0;
    for (r0, r1) in block_bounds(t.rows, grid.rows) {
        for (c0, c1) in block_bounds(t.cols, grid.cols) {
            let seg = &mut hist[block * bins..(block + 1) * bins];
            for r in r0..r1 {
                for &code in &t.codes[r * t.cols + c0..r * t.cols + c1] {
                    let code = code as usize;
                    if code >= bins {
                        return Err(invalid(format!("code {code} exceeds {bins} bins")));
                    }
                    seg[code] += 1;
                }
            }
            block += 1;
        }
    }
    Ok(hist)
}

/// Both stages' maps for one image.
pub fn forward(img: &GrayImage, filters: &FilterBank) -> Result<FeatureMaps> {
    let stage1 = stage1_forward(img, &filters.stage1)?;
    let stage2 = stage2_forward(&stage1, &filters.stage2)?;
    Ok(FeatureMaps { stage1, stage2 })
}

pub fn extract_feature(img: &GrayImage, net: &TrainedNetwork) -> Result<FeatureVector> {
    if img.dims() != net.image_dims {
        return Err(Error::Data(format!(
            "image is {}x{} but the network was trained on {}x{}",
            img.rows(),
            img.cols(),
            net.image_dims.0,
            net.image_dims.1
        )));
    }
    let maps = forward(img, &net.filters)?;
    let cfg = &net.config;
    let mut values = Vec::with_capacity(cfg.feature_len());
    for group in &maps.stage2 {
        let hashed = binarize_and_hash(group)?;
        values.extend(block_histogram(&hashed, cfg.l2, cfg.blocks)?);
    }
    Ok(FeatureVector(values))
}

/// Features for many images, computed in parallel, returned in input order.
pub fn extract_features(images: &[GrayImage], net: &TrainedNetwork) -> Result<Vec<FeatureVector>> {
    images.par_iter().map(|img| extract_feature(img, net)).collect()
}

fn fingerprint(images: &[GrayImage], cfg: &NetworkConfig) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update([cfg.variant.tag()]);
    for v in [cfg.k, cfg.l1, cfg.l2, cfg.blocks.rows, cfg.blocks.cols, cfg.solver.max_iter] {
        h.update((v as u64).to_le_bytes());
    }
    h.update(cfg.solver.tol.to_le_bytes());
    h.update((images.len() as u64).to_le_bytes());
    for img in images {
        h.update((img.rows() as u64).to_le_bytes());
        h.update((img.cols() as u64).to_le_bytes());
        for p in img.pixels() {
            h.update(p.to_le_bytes());
        }
    }
    h.finalize().into()
}

/// Learns both filter banks. Deterministic given `images` and `cfg`.
pub fn train_network(images: &[GrayImage], cfg: &NetworkConfig) -> Result<TrainedNetwork> {
    cfg.validate()?;
    let image_dims = uniform_dims(images)?;
    let stage1 = learn_stage1_filters(images, cfg).map_err(|e| Error::stage("stage 1", e))?;
    let maps: Vec<Vec<GrayImage>> = images.par_iter().map(|img| stage1_forward(img, &stage1)).collect::<Result<_>>()?;
    let input = build_stage2_input(&maps, cfg)?;
    drop(maps);
    let stage2 = learn_stage2_filters(input, cfg).map_err(|e| Error::stage("stage 2", e))?;
    Ok(TrainedNetwork {
        config: *cfg,
        filters: FilterBank { stage1, stage2 },
        image_dims,
        fingerprint: fingerprint(images, cfg),
    })
}

/// `sigma_2 / sigma_1` of a kernel; zero for rank-one kernels.
pub fn singular_ratio(kernel: &Kernel) -> f64 {
    let m = DMatrix::from_row_slice(kernel.rows(), kernel.cols(), kernel.weights());
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    match s.as_slice() {
        [first, second, ..] if *first > 0.0 => second / first,
        _ => 0.0,
    }
}

/// Largest `|<W_i, W_j>|` over distinct kernels of a bank (row-major flattening).
pub fn max_cross_inner_product(bank: &[Kernel]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..bank.len() {
        for j in i + 1..bank.len() {
            let d: f64 = bank[i].weights().iter().zip(bank[j].weights()).map(|(a, b)| a * b).sum();
            worst = worst.max(d.abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(rows: usize, cols: usize, seed: u64) -> GrayImage {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let px =
            (0..rows * cols).map(|i| ((i % cols) * 7 + (i / cols) * 3) as f64 + rng.random_range(0.0..40.0)).collect();
        GrayImage::new(rows, cols, px).unwrap()
    }

    #[test]
    fn hash_arithmetic() {
        let one = |v: f64| GrayImage::filled(1, 1, v).unwrap();
        let t = binarize_and_hash(&[one(1.0), one(-1.0), one(2.0), one(0.5)]).unwrap();
        assert_eq!(t.codes, vec![13]);
        let t = binarize_and_hash(&[one(0.0), one(3.0), one(0.0), one(1.0)]).unwrap();
        assert_eq!(t.codes, vec![15]);
        let t = binarize_and_hash(&[one(-1.0), one(-3.0), one(-0.1), one(-1.0)]).unwrap();
        assert_eq!(t.codes, vec![0]);
        assert!(binarize_and_hash(&[]).is_err());
    }

    #[test]
    fn histogram_of_zero_map() {
        let t = HashedMap { rows: 10, cols: 10, codes: vec![0; 100] };
        let h = block_histogram(&t, 4, BlockGrid::new(1, 1).unwrap()).unwrap();
        assert_eq!(h.len(), 16);
        assert_eq!(h[0], 100);
        assert!(h[1..].iter().all(|&v| v == 0));
    }

    #[test]
    fn histogram_remainder_goes_to_last_block() {
        let t = HashedMap { rows: 5, cols: 3, codes: (0..15).map(|i| i % 4).collect() };
        let grid = BlockGrid::new(2, 2).unwrap();
        let h = block_histogram(&t, 2, grid).unwrap();
        assert_eq!(h.len(), 4 * 4);
        let sums: Vec<u32> = h.chunks(4).map(|c| c.iter().sum()).collect();
        // Rows split 2|3, columns 1|2.
        assert_eq!(sums, vec![2, 4, 3, 6]);
        assert!(block_histogram(&t, 2, BlockGrid::new(6, 1).unwrap()).is_err());
    }

    #[test]
    fn forward_shapes_and_identities() {
        let img = gradient_image(9, 7, 1);
        let bank = vec![Kernel::delta(5), Kernel::outer(&[1.0; 5], &[0.2; 5])];
        let s1 = stage1_forward(&img, &bank).unwrap();
        assert_eq!(s1.len(), 2);
        assert_eq!(s1[0], img);
        let s2 = stage2_forward(&s1, &[Kernel::delta(5), Kernel::delta(5).negated()]).unwrap();
        assert_eq!(s2.len(), 2);
        assert_eq!(s2[1][0], s1[1]);

        let zero = GrayImage::zeros(9, 7).unwrap();
        assert!(stage1_forward(&zero, &bank).unwrap().iter().all(|m| m.pixels().iter().all(|&v| v == 0.0)));
        assert!(stage1_forward(&img, &[]).is_err());
    }

    #[test]
    fn stage2_input_width() {
        let cfg = NetworkConfig::new(Variant::L1TwoDSquaredPcaNet);
        let maps = vec![
            vec![gradient_image(6, 5, 1), gradient_image(6, 5, 2)],
            vec![gradient_image(6, 5, 3), gradient_image(6, 5, 4)],
            vec![gradient_image(6, 5, 5), gradient_image(6, 5, 6)],
        ];
        match build_stage2_input(&maps, &cfg).unwrap() {
            StageInput::RowWise(r) => {
                assert_eq!(r.len(), 3 * 2 * 30);
                assert_eq!(r.width(), cfg.k * 3 * 2 * 30);
                assert!(r.is_mean_removed());
            }
            _ => panic!("expected row-wise input"),
        }
        let single = vec![vec![gradient_image(6, 5, 1)]];
        let direct = extract_row_patches(&single[0][0], 5).unwrap().remove_patch_mean().unwrap();
        assert_eq!(build_stage2_input(&single, &cfg).unwrap(), StageInput::RowWise(direct));
        assert!(build_stage2_input(&[], &cfg).is_err());
    }

    #[test]
    fn zero_images_are_degenerate() {
        let imgs = vec![GrayImage::zeros(8, 8).unwrap(); 3];
        for v in Variant::ALL {
            let err = learn_stage1_filters(&imgs, &NetworkConfig::new(v)).unwrap_err();
            assert!(matches!(err.root(), Error::DegenerateData { component: 1, .. }), "{v}: {err}");
        }
    }

    #[test]
    fn mixed_sizes_rejected() {
        let imgs = vec![gradient_image(8, 8, 1), gradient_image(8, 9, 2)];
        assert!(learn_stage1_filters(&imgs, &NetworkConfig::new(Variant::PcaNet)).is_err());
    }

    #[test]
    fn trained_banks_satisfy_invariants() {
        let imgs: Vec<GrayImage> = (0..3).map(|s| gradient_image(12, 10, s)).collect();
        for v in Variant::ALL {
            let cfg = NetworkConfig::new(v).with_blocks(BlockGrid::new(2, 2).unwrap());
            let net = train_network(&imgs, &cfg).unwrap();
            assert_eq!(net.filters.stage1.len(), 4);
            assert_eq!(net.filters.stage2.len(), 4);
            for bank in [&net.filters.stage1, &net.filters.stage2] {
                assert!(max_cross_inner_product(bank) <= 1e-8, "{v}");
                if v.is_row_wise() {
                    assert!(bank.iter().all(|k| singular_ratio(k) <= 1e-8), "{v}");
                }
            }
            let f = extract_feature(&imgs[0], &net).unwrap();
            assert_eq!(f.len(), 16 * 4 * 4);
            assert_eq!(f.0.iter().map(|&v| v as usize).sum::<usize>(), 4 * 12 * 10);
            assert_eq!(f, extract_feature(&imgs[0], &net).unwrap());
            assert!(extract_feature(&gradient_image(10, 12, 0), &net).is_err());
        }
    }

    #[test]
    fn rank_limited_row_data() {
        // A single-column image: every patch row is (0, g, 0) before centring,
        // so centred rows span exactly {e_2, (1,0,1)}.
        let g: Vec<f64> = (0..9).map(|i| ((i * i) % 7) as f64 + 1.0).collect();
        let img = GrayImage::new(9, 1, g).unwrap();
        let mut cfg = NetworkConfig::new(Variant::L1TwoDSquaredPcaNet);
        cfg.k = 3;
        cfg.blocks = BlockGrid::new(1, 1).unwrap();
        cfg.l1 = 2;
        cfg.l2 = 2;
        let bank = learn_stage1_filters(std::slice::from_ref(&img), &cfg).unwrap();
        assert_eq!(bank.len(), 2);
        cfg.l1 = 3;
        let err = learn_stage1_filters(std::slice::from_ref(&img), &cfg).unwrap_err();
        assert!(matches!(err.root(), Error::DegenerateData { component: 3, .. }), "{err}");
    }
}
