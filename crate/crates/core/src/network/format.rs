//! Versioned binary model file.
//!
//! Layout, all integers little-endian `u32`, all floats little-endian `f64`:
//!
//! ```text
//! "L12DPCANET"  version  variant:u8  k  L1  L2  block_rows  block_cols  rows  cols
//! stage-1 kernels (L1 * k * k, row-major)   stage-2 kernels (L2 * k * k)
//! { tag:[u8; 4]  len:u64  payload }*         -- tagged sections until EOF
//! ```
//!
//! Sections: `META` (solver tolerance, iteration cap, training fingerprint),
//! `LSVM` (linear classifier), `CLSN` (class names). Unknown tags are skipped.

use std::io::{Read, Write};

use super::{BlockGrid, FilterBank, NetworkConfig, TrainedNetwork, Variant};
use crate::classifier::LinearModel;
use crate::error::{Error, Result};
use crate::imagepatch::Kernel;
use crate::subspace::SolverOptions;

pub const MAGIC: &[u8; 10] = b"L12DPCANET";
pub const FORMAT_VERSION: u32 = 1;

const TAG_META: &[u8; 4] = b"META";
const TAG_CLASSIFIER: &[u8; 4] = b"LSVM";
const TAG_CLASSES: &[u8; 4] = b"CLSN";

/// Everything a model file holds.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub network: TrainedNetwork,
    pub classifier: Option<LinearModel>,
    pub class_names: Vec<String>,
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub(crate) fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Cursor over a byte buffer with truncation-checked reads.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::MalformedModel(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    pub(crate) fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn section(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

pub fn encode_model(model: &ModelFile) -> Vec<u8> {
    let net = &model.network;
    let cfg = &net.config;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(cfg.variant.tag());
    for v in [cfg.k, cfg.l1, cfg.l2, cfg.blocks.rows, cfg.blocks.cols, net.image_dims.0, net.image_dims.1] {
        put_u32(&mut out, v);
    }
    for kernel in net.filters.stage1.iter().chain(&net.filters.stage2) {
        put_f64s(&mut out, kernel.weights());
    }

    let mut meta = Vec::new();
    put_f64s(&mut meta, &[cfg.solver.tol]);
    put_u32(&mut meta, cfg.solver.max_iter);
    meta.extend_from_slice(&net.fingerprint);
    section(&mut out, TAG_META, &meta);

    if let Some(clf) = &model.classifier {
        section(&mut out, TAG_CLASSIFIER, &clf.encode());
    }
    if !model.class_names.is_empty() {
        let mut names = Vec::new();
        put_u32(&mut names, model.class_names.len());
        for n in &model.class_names {
            put_u32(&mut names, n.len());
            names.extend_from_slice(n.as_bytes());
        }
        section(&mut out, TAG_CLASSES, &names);
    }
    out
}

pub fn decode_model(buf: &[u8]) -> Result<ModelFile> {
    let mut r = Reader::new(buf);
    if buf.len() < MAGIC.len() || r.take(MAGIC.len())? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u32()? as u32;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let tag = r.u8()?;
    let variant = Variant::from_tag(tag).ok_or_else(|| Error::MalformedModel(format!("unknown variant tag {tag}")))?;
    let k = r.u32()?;
    let l1 = r.u32()?;
    let l2 = r.u32()?;
    let blocks = BlockGrid::new(r.u32()?, r.u32()?).map_err(|e| Error::MalformedModel(e.to_string()))?;
    let image_dims = (r.u32()?, r.u32()?);
    let mut config = NetworkConfig { variant, k, l1, l2, blocks, solver: SolverOptions::default() };
    config.validate().map_err(|e| Error::MalformedModel(e.to_string()))?;

    let mut read_bank =
        |n: usize| -> Result<Vec<Kernel>> { (0..n).map(|_| Kernel::new(k, k, r.f64s(k * k)?)).collect() };
    let stage1 = read_bank(l1)?;
    let stage2 = read_bank(l2)?;

    let mut fingerprint = [0u8; 32];
    let mut classifier = None;
    let mut class_names = Vec::new();
    while !r.is_done() {
        let tag: [u8; 4] = r.take(4)?.try_into().unwrap();
        let len = r.u64()? as usize;
        let mut s = Reader::new(r.take(len)?);
        match &tag {
            TAG_META => {
                config.solver.tol = s.f64()?;
                config.solver.max_iter = s.u32()?;
                fingerprint.copy_from_slice(s.take(32)?);
            }
            TAG_CLASSIFIER => classifier = Some(LinearModel::decode(&mut s)?),
            TAG_CLASSES => {
                let n = s.u32()?;
                for _ in 0..n {
                    let len = s.u32()?;
                    let name = std::str::from_utf8(s.take(len)?)
                        .map_err(|_| Error::MalformedModel("class name is not UTF-8".into()))?;
                    class_names.push(name.to_string());
                }
            }
            _ => log::warn!("skipping unknown model section {:?}", String::from_utf8_lossy(&tag)),
        }
    }

    Ok(ModelFile {
        network: TrainedNetwork { config, filters: FilterBank { stage1, stage2 }, image_dims, fingerprint },
        classifier,
        class_names,
    })
}

pub fn write_model<W: Write>(mut w: W, model: &ModelFile) -> Result<()> {
    w.write_all(&encode_model(model))?;
    w.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<ModelFile> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode_model(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModelFile {
        let mut config = NetworkConfig::new(Variant::L1TwoDSquaredPcaNet);
        config.k = 3;
        config.l1 = 2;
        config.l2 = 1;
        let kern = |s: f64| Kernel::new(3, 3, (0..9).map(|i| i as f64 * s).collect()).unwrap();
        ModelFile {
            network: TrainedNetwork {
                config,
                filters: FilterBank { stage1: vec![kern(0.5), kern(-1.25)], stage2: vec![kern(1e-3)] },
                image_dims: (32, 30),
                fingerprint: [7; 32],
            },
            classifier: None,
            class_names: vec!["alice".into(), "bob".into()],
        }
    }

    #[test]
    fn round_trip() {
        let m = sample();
        let bytes = encode_model(&m);
        assert_eq!(&bytes[..10], MAGIC);
        assert_eq!(decode_model(&bytes).unwrap(), m);
    }

    #[test]
    fn rejects_wrong_magic_and_version() {
        let mut bytes = encode_model(&sample());
        bytes[0] = b'X';
        assert!(matches!(decode_model(&bytes), Err(Error::BadMagic)));
        assert!(matches!(decode_model(b"L12"), Err(Error::BadMagic)));

        let mut bytes = encode_model(&sample());
        bytes[10..14].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(decode_model(&bytes), Err(Error::UnsupportedVersion(99))));
    }

    #[test]
    fn rejects_truncation() {
        let bytes = encode_model(&sample());
        assert!(matches!(decode_model(&bytes[..bytes.len() - 3]), Err(Error::MalformedModel(_))));
    }
}
