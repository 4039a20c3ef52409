use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::subspace::SolverOptions;

/// The four cascade variants: {L2, L1} x {vectorised, two-directional}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    PcaNet,
    TwoDPcaNet,
    L1PcaNet,
    L1TwoDSquaredPcaNet,
}

impl Variant {
    pub const ALL: [Variant; 4] =
        [Variant::PcaNet, Variant::TwoDPcaNet, Variant::L1PcaNet, Variant::L1TwoDSquaredPcaNet];

    /// Learns rank-one filters from row-wise patches.
    pub fn is_row_wise(self) -> bool {
        matches!(self, Variant::TwoDPcaNet | Variant::L1TwoDSquaredPcaNet)
    }

    pub fn is_l1(self) -> bool {
        matches!(self, Variant::L1PcaNet | Variant::L1TwoDSquaredPcaNet)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::PcaNet => "PCANet",
            Variant::TwoDPcaNet => "2DPCANet",
            Variant::L1PcaNet => "L1-PCANet",
            Variant::L1TwoDSquaredPcaNet => "L1-2D2PCANet",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Variant::PcaNet => 0,
            Variant::TwoDPcaNet => 1,
            Variant::L1PcaNet => 2,
            Variant::L1TwoDSquaredPcaNet => 3,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.tag() == tag)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .map(|c| if c == '²' { '2' } else { c.to_ascii_lowercase() })
            .collect();
        match key.as_str() {
            "pcanet" => Ok(Variant::PcaNet),
            "2dpcanet" => Ok(Variant::TwoDPcaNet),
            "l1pcanet" => Ok(Variant::L1PcaNet),
            "l12d2pcanet" | "l12dpcanet" => Ok(Variant::L1TwoDSquaredPcaNet),
            _ => Err(invalid(format!("unknown variant {s:?} (expected pcanet, 2dpcanet, l1-pcanet or l1-2d2pcanet)"))),
        }
    }
}

/// Histogram block layout: `rows x cols` non-overlapping blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockGrid {
    pub rows: usize,
    pub cols: usize,
}

impl BlockGrid {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!("block grid must be at least 1x1, got {rows}x{cols}")));
        }
        Ok(Self { rows, cols })
    }

    /// Block count `B`.
    pub fn count(&self) -> usize {
        self.rows * self.cols
    }

    /// Default layouts for the scalar block counts used with portrait faces.
    pub fn for_block_count(b: usize) -> Result<Self> {
        match b {
            8 => Ok(Self { rows: 4, cols: 2 }),
            4 => Ok(Self { rows: 2, cols: 2 }),
            10 => Ok(Self { rows: 5, cols: 2 }),
            1 => Ok(Self { rows: 1, cols: 1 }),
            _ => Err(invalid(format!("no default grid for B = {b}; give an explicit RxC grid"))),
        }
    }
}

impl fmt::Display for BlockGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl FromStr for BlockGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((r, c)) = s.split_once(['x', 'X', '*']) {
            let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| invalid(format!("bad block grid {s:?}")));
            return Self::new(parse(r)?, parse(c)?);
        }
        let b = s.parse::<usize>().map_err(|_| invalid(format!("bad block grid {s:?}")))?;
        Self::for_block_count(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub variant: Variant,
    /// Patch (and filter) side, odd.
    pub k: usize,
    /// Stage-1 filter count.
    pub l1: usize,
    /// Stage-2 filter count.
    pub l2: usize,
    pub blocks: BlockGrid,
    pub solver: SolverOptions,
}

impl NetworkConfig {
    /// `k = 5`, `L1 = L2 = 4`, 4x2 blocks.
    pub fn new(variant: Variant) -> Self {
        Self { variant, k: 5, l1: 4, l2: 4, blocks: BlockGrid { rows: 4, cols: 2 }, solver: SolverOptions::default() }
    }

    pub fn with_blocks(mut self, blocks: BlockGrid) -> Self {
        self.blocks = blocks;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k.is_multiple_of(2) || self.k < 3 {
            return Err(invalid(format!("k must be odd and >= 3, got {}", self.k)));
        }
        let max = if self.variant.is_row_wise() { self.k } else { self.k * self.k };
        for (name, l) in [("L1", self.l1), ("L2", self.l2)] {
            if l == 0 || l > max {
                return Err(invalid(format!(
                    "{name} must be in 1..={max} for {} with k = {}, got {l}",
                    self.variant, self.k
                )));
            }
        }
        if self.l2 > 24 {
            return Err(invalid(format!("L2 = {} gives an unusable 2^L2-bin histogram", self.l2)));
        }
        BlockGrid::new(self.blocks.rows, self.blocks.cols)?;
        Ok(())
    }

    /// `2^L2 * L1 * B`.
    pub fn feature_len(&self) -> usize {
        (1usize << self.l2) * self.l1 * self.blocks.count()
    }
}
