//! From grayscale images to per-device binary pulse programs.
//!
//! An image is binarized, optionally augmented with XOR parity rows, and
//! each row (and, in 2D mode, each column) is split into `k` contiguous
//! sections. Every section becomes the pulse program of one dedicated
//! device: a `1` bit is a write pulse, a `0` bit a rest slot. Sectioning
//! trades reservoir size for shorter programs, which keeps devices out of
//! saturation and shortens the read latency.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 || pixels.len() != rows * cols {
            return Err(Error::format(format!(
                "image dimensions {rows}x{cols} do not match {} pixels",
                pixels.len()
            )));
        }
        Ok(GrayImage { rows, cols, pixels })
    }

    #[inline]
    pub fn pixel(&self, r: usize, c: usize) -> u8 {
        self.pixels[r * self.cols + c]
    }
}

/// Row-major binary image (one `bool` per pixel).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub rows: usize,
    pub cols: usize,
    pub bits: Vec<bool>,
}

impl BinaryImage {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 || bits.len() != rows * cols {
            return Err(Error::format(format!(
                "binary image dimensions {rows}x{cols} do not match {} bits",
                bits.len()
            )));
        }
        Ok(BinaryImage { rows, cols, bits })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    /// One row as a slice.
    #[inline]
    pub fn row(&self, r: usize) -> &[bool] {
        &self.bits[r * self.cols..(r + 1) * self.cols]
    }

    /// One column, copied out (columns are strided).
    pub fn column(&self, c: usize) -> Vec<bool> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

/// Which image axes feed the reservoir.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    /// Rows only.
    #[serde(rename = "1d")]
    OneD,
    /// Rows and columns.
    #[serde(rename = "2d")]
    TwoD,
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Dimension::OneD => "1d",
            Dimension::TwoD => "2d",
        })
    }
}

/// Preprocessing configuration: axes, parity augmentation, sectioning, and
/// the binarization threshold.
///
/// The default is the best-performing configuration (2D + parity, k = 7).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingConfig {
    pub dimension: Dimension,
    /// Append XOR rows of adjacent binarized rows.
    pub parity: bool,
    /// Sections per row/column (k); each section drives its own device.
    pub sections: usize,
    /// Binarization threshold: bit = 1 iff intensity ≥ threshold.
    pub threshold: u8,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            dimension: Dimension::TwoD,
            parity: true,
            sections: 7,
            threshold: 128,
        }
    }
}

impl EncodingConfig {
    /// Check that `k` is compatible with an `n × m` image.
    pub fn validate_for(&self, n: usize, m: usize) -> Result<()> {
        if self.sections == 0 {
            return Err(Error::config("sections (k) must be at least 1"));
        }
        let limit = match self.dimension {
            Dimension::OneD => m,
            Dimension::TwoD => n.min(m),
        };
        if self.sections > limit {
            return Err(Error::config(format!(
                "sections (k = {}) exceeds the sectionable length {} of a {n}x{m} image",
                self.sections, limit
            )));
        }
        Ok(())
    }
}

/// The pulse programs of one image, one per device, in a fixed order:
/// row sections (top-to-bottom, left-to-right), then column sections
/// (left-to-right, top-to-bottom) in 2D, then parity-row sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseProgramSet {
    pub programs: Vec<Vec<bool>>,
    /// Slot count at which all devices are read (= `latency`); individual
    /// programs may be shorter and are padded with rest slots when run.
    pub max_len: usize,
}

/// Threshold an image: bit = 1 iff intensity ≥ threshold.
pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryImage {
    BinaryImage {
        rows: img.rows,
        cols: img.cols,
        bits: img.pixels.iter().map(|&p| p >= threshold).collect(),
    }
}

/// XOR of adjacent rows: returns an `(n−1) × m` image of parity rows.
pub fn parity_rows(img: &BinaryImage) -> Result<BinaryImage> {
    if img.rows < 2 {
        return Err(Error::domain(format!(
            "parity_rows: need at least 2 rows, image has {}",
            img.rows
        )));
    }
    let mut bits = Vec::with_capacity((img.rows - 1) * img.cols);
    for r in 0..img.rows - 1 {
        let (top, bottom) = (img.row(r), img.row(r + 1));
        bits.extend(top.iter().zip(bottom).map(|(&a, &b)| a ^ b));
    }
    Ok(BinaryImage {
        rows: img.rows - 1,
        cols: img.cols,
        bits,
    })
}

/// Contiguous ceil-split of a sequence into exactly `k` sections of length
/// `⌈m/k⌉`; trailing sections may be shorter or empty. Concatenating the
/// sections reproduces the input.
pub fn section(seq: &[bool], k: usize) -> Result<Vec<Vec<bool>>> {
    let m = seq.len();
    if k == 0 || k > m {
        return Err(Error::domain(format!(
            "section: k = {k} outside [1, {m}] for a length-{m} sequence"
        )));
    }
    let chunk = m.div_ceil(k);
    Ok((0..k)
        .map(|i| {
            let start = (i * chunk).min(m);
            let end = ((i + 1) * chunk).min(m);
            seq[start..end].to_vec()
        })
        .collect())
}

/// Encode a binarized image into its full, ordered program set.
pub fn encode(img: &BinaryImage, cfg: &EncodingConfig) -> Result<PulseProgramSet> {
    cfg.validate_for(img.rows, img.cols)?;
    let k = cfg.sections;
    let mut programs = Vec::with_capacity(reservoir_size(cfg, img.rows, img.cols));
    for r in 0..img.rows {
        programs.extend(section(img.row(r), k)?);
    }
    if cfg.dimension == Dimension::TwoD {
        for c in 0..img.cols {
            programs.extend(section(&img.column(c), k)?);
        }
    }
    if cfg.parity {
        let par = parity_rows(img)?;
        for r in 0..par.rows {
            programs.extend(section(par.row(r), k)?);
        }
    }
    Ok(PulseProgramSet {
        programs,
        max_len: latency(cfg, img.rows, img.cols),
    })
}

/// Number of devices an `n × m` image occupies under `cfg`.
pub fn reservoir_size(cfg: &EncodingConfig, n: usize, m: usize) -> usize {
    let base = match (cfg.dimension, cfg.parity) {
        (Dimension::OneD, false) => n,
        (Dimension::OneD, true) => 2 * n - 1,
        (Dimension::TwoD, false) => n + m,
        (Dimension::TwoD, true) => n + m + n - 1,
    };
    base * cfg.sections
}

/// Slot count between the first pulse and the global read: the longest
/// section length, `⌈m/k⌉` (rows) or `max(⌈m/k⌉, ⌈n/k⌉)` (rows + columns).
pub fn latency(cfg: &EncodingConfig, n: usize, m: usize) -> usize {
    let row_lat = m.div_ceil(cfg.sections);
    match cfg.dimension {
        Dimension::OneD => row_lat,
        Dimension::TwoD => row_lat.max(n.div_ceil(cfg.sections)),
    }
}

/// Total programmed pulse slots per image (the per-image write workload);
/// equals the summed length of all programs, independent of k.
pub fn write_count(cfg: &EncodingConfig, n: usize, m: usize) -> usize {
    let base = n * m;
    let with_cols = match cfg.dimension {
        Dimension::OneD => base,
        Dimension::TwoD => 2 * base,
    };
    if cfg.parity {
        with_cols + (n - 1) * m
    } else {
        with_cols
    }
}
