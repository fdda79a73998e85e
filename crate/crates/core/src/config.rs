//! Experiment configuration: TOML surface, validation, quantizer-range
//! resolution, and a stable content hash embedded in every output record.
//!
//! One `master_seed` governs every random stream in a pipeline run
//! (weight init, epoch shuffles, train subsetting, device factors, cycle
//! noise); all substreams are derived from it, so a config file plus its
//! seed pins the outputs byte-for-byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::encoding::{self, Dimension, EncodingConfig};
use crate::error::{Error, Result};
use crate::readout::TrainConfig;
use crate::reservoir::{self, QuantizerConfig};
use crate::variability::VariabilityConfig;

/// Write/read pulse amplitudes the reservoir is driven with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    pub v_write: f64,
    pub v_read: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig {
            v_write: reservoir::V_WRITE_DEFAULT,
            v_read: reservoir::V_READ_DEFAULT,
        }
    }
}

/// Quantizer surface: resolution plus an optional explicit current range.
/// When the range is omitted it resolves to the range reachable by the
/// configuration's programs (see `programmed_quantizer_range`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerSpec {
    pub bits: u32,
    pub i_lo: Option<f64>,
    pub i_hi: Option<f64>,
}

impl Default for QuantizerSpec {
    fn default() -> Self {
        QuantizerSpec {
            bits: 4,
            i_lo: None,
            i_hi: None,
        }
    }
}

/// Everything one experiment needs. The default is the best-performing
/// study configuration: 2D + parity, 7 sections, τ = 6 ns, 4-bit readout,
/// 500 epochs at learning rate 0.02.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every random stream in the run.
    pub master_seed: u64,
    /// Directory holding the four IDX files.
    pub data_dir: PathBuf,
    /// Where records/checkpoints/caches go (CLI `--out` overrides).
    pub out_dir: Option<PathBuf>,
    /// Train on only the first N samples of the seeded shuffle.
    pub train_limit: Option<usize>,
    /// Persist trained readout weights next to the records.
    pub save_weights: bool,
    pub encoding: EncodingConfig,
    pub device: DeviceParams,
    pub drive: DriveConfig,
    pub quantizer: QuantizerSpec,
    pub train: TrainConfig,
    pub variability: VariabilityConfig,
    /// Grid axes for the `sweep` command; ignored by single runs and
    /// excluded from the config hash (each grid point hashes itself).
    pub sweep: Option<SweepGrid>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 42,
            data_dir: PathBuf::from("data/mnist"),
            out_dir: None,
            train_limit: None,
            save_weights: false,
            encoding: EncodingConfig::default(),
            device: DeviceParams::default(),
            drive: DriveConfig::default(),
            quantizer: QuantizerSpec::default(),
            train: TrainConfig::default(),
            variability: VariabilityConfig::default(),
            sweep: None,
        }
    }
}

/// Axes of a factorial sweep. Unset axes keep the base config's value;
/// set axes expand as a cartesian product in declaration order
/// (dimension-major, variability-minor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub dimension: Option<Vec<Dimension>>,
    pub parity: Option<Vec<bool>>,
    pub sections: Option<Vec<usize>>,
    pub bits: Option<Vec<u32>>,
    /// Decay constants in nanoseconds.
    pub tau_ns: Option<Vec<f64>>,
    pub d2d_pct: Option<Vec<f64>>,
}

impl SweepGrid {
    /// One config per grid point, derived from `base`. The expansion itself
    /// never fails; invalid points surface when they run.
    pub fn expand(&self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        let dims = self
            .dimension
            .clone()
            .unwrap_or_else(|| vec![base.encoding.dimension]);
        let parities = self
            .parity
            .clone()
            .unwrap_or_else(|| vec![base.encoding.parity]);
        let sections = self
            .sections
            .clone()
            .unwrap_or_else(|| vec![base.encoding.sections]);
        let bits = self
            .bits
            .clone()
            .unwrap_or_else(|| vec![base.quantizer.bits]);
        // seconds here: an unset axis must inherit the base value bit-exactly,
        // so the ns→s conversion happens only for explicit grid entries
        let taus: Vec<f64> = match &self.tau_ns {
            Some(ns) => ns.iter().map(|t| t * 1e-9).collect(),
            None => vec![base.device.tau],
        };
        let d2ds = self
            .d2d_pct
            .clone()
            .unwrap_or_else(|| vec![base.variability.d2d_pct]);
        let mut out = Vec::new();
        for &dimension in &dims {
            for &parity in &parities {
                for &k in &sections {
                    for &b in &bits {
                        for &tau in &taus {
                            for &d2d in &d2ds {
                                let mut cfg = base.clone();
                                cfg.sweep = None;
                                cfg.encoding.dimension = dimension;
                                cfg.encoding.parity = parity;
                                cfg.encoding.sections = k;
                                cfg.quantizer.bits = b;
                                cfg.device.tau = tau;
                                cfg.variability.d2d_pct = d2d;
                                out.push(cfg);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.train.validate()?;
        self.variability.validate()?;
        if self.encoding.sections == 0 {
            return Err(Error::config("encoding.sections must be at least 1"));
        }
        if self.drive.v_write <= self.device.v_th {
            return Err(Error::config(format!(
                "drive.v_write = {} V does not exceed the write threshold {} V",
                self.drive.v_write, self.device.v_th
            )));
        }
        if self.drive.v_read <= 0.0 || self.drive.v_read > self.device.v_th {
            return Err(Error::config(format!(
                "drive.v_read = {} V outside (0, {}] V",
                self.drive.v_read, self.device.v_th
            )));
        }
        match (self.quantizer.i_lo, self.quantizer.i_hi) {
            (Some(lo), Some(hi)) => {
                QuantizerConfig::new(self.quantizer.bits, lo, hi)?;
            }
            (None, None) => {
                if self.quantizer.bits == 0 || self.quantizer.bits > 16 {
                    return Err(Error::config(format!(
                        "quantizer bits must be in [1, 16], got {}",
                        self.quantizer.bits
                    )));
                }
            }
            _ => {
                return Err(Error::config(
                    "quantizer range must set both i_lo and i_hi, or neither",
                ));
            }
        }
        if let Some(0) = self.train_limit {
            return Err(Error::config("train_limit must be at least 1 when set"));
        }
        Ok(())
    }

    /// Concrete quantizer for `n × m` images: the explicit range if given,
    /// otherwise the range reachable by this configuration's programs.
    pub fn resolved_quantizer(&self, n: usize, m: usize) -> Result<QuantizerConfig> {
        self.encoding.validate_for(n, m)?;
        let (i_lo, i_hi) = match (self.quantizer.i_lo, self.quantizer.i_hi) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => reservoir::programmed_quantizer_range(
                &self.device,
                self.drive.v_write,
                self.drive.v_read,
                encoding::latency(&self.encoding, n, m),
            )?,
        };
        QuantizerConfig::new(self.quantizer.bits, i_lo, i_hi)
    }

    /// Stable hex digest over every semantically relevant field (paths and
    /// output options excluded). Identical experiments hash identically
    /// across runs, platforms, and thread counts.
    pub fn config_hash(&self) -> String {
        #[derive(Serialize)]
        struct Semantic<'a> {
            master_seed: u64,
            train_limit: Option<usize>,
            encoding: &'a EncodingConfig,
            device: &'a DeviceParams,
            drive: &'a DriveConfig,
            quantizer: &'a QuantizerSpec,
            epochs: usize,
            learning_rate: f64,
            shuffle: bool,
            variability: &'a VariabilityConfig,
        }
        let projection = Semantic {
            master_seed: self.master_seed,
            train_limit: self.train_limit,
            encoding: &self.encoding,
            device: &self.device,
            drive: &self.drive,
            quantizer: &self.quantizer,
            epochs: self.train.epochs,
            learning_rate: self.train.learning_rate,
            shuffle: self.train.shuffle,
            variability: &self.variability,
        };
        let canonical = toml::to_string(&projection).expect("hash projection serializes");
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }
}

/// FNV-1a: tiny, dependency-free, and stable across platforms and versions
/// (unlike the std hasher, which is explicitly unstable).
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::Dimension;

    #[test]
    fn defaults_describe_the_best_configuration() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.encoding.sections, 7);
        assert_eq!(cfg.encoding.dimension, Dimension::TwoD);
        assert!(cfg.encoding.parity);
        assert_eq!(cfg.quantizer.bits, 4);
        assert_eq!(cfg.device.tau, 6e-9);
        assert_eq!(cfg.train.epochs, 500);
        assert_eq!(cfg.train.learning_rate, 0.02);
    }

    #[test]
    fn toml_round_trip_preserves_everything() {
        let mut cfg = ExperimentConfig::default();
        cfg.master_seed = 7;
        cfg.encoding.sections = 8;
        cfg.device.tau = 10e-9;
        cfg.quantizer = QuantizerSpec {
            bits: 3,
            i_lo: Some(1e-6),
            i_hi: Some(5e-5),
        };
        cfg.variability.d2d_pct = 0.05;
        cfg.train_limit = Some(10_000);
        let text = cfg.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            "master_seed = 5\n[encoding]\nsections = 4\n[device]\ntau = 1.5e-8\n",
        )
        .unwrap();
        assert_eq!(cfg.master_seed, 5);
        assert_eq!(cfg.encoding.sections, 4);
        assert!(cfg.encoding.parity, "unspecified fields keep defaults");
        assert_eq!(cfg.device.tau, 1.5e-8);
        assert_eq!(cfg.device.x_min, 0.1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("master_sead = 5\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[encoding]\nsection = 4\n").is_err());
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[drive]\nv_write = 0.5\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[drive]\nv_read = 0.7\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[quantizer]\nbits = 0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[quantizer]\ni_lo = 1e-6\n").is_err());
        assert!(ExperimentConfig::from_toml_str("train_limit = 0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[device]\ntau = -1.0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[variability]\nd2d_pct = 1.5\n").is_err());
    }

    #[test]
    fn quantizer_resolution() {
        // explicit range wins
        let mut cfg = ExperimentConfig::default();
        cfg.quantizer = QuantizerSpec {
            bits: 4,
            i_lo: Some(1e-6),
            i_hi: Some(2e-5),
        };
        let q = cfg.resolved_quantizer(28, 28).unwrap();
        assert_eq!((q.i_lo, q.i_hi), (1e-6, 2e-5));

        // default: the range programs of this length can reach (k=7 → 4 slots)
        let cfg = ExperimentConfig::default();
        let q = cfg.resolved_quantizer(28, 28).unwrap();
        let expect = reservoir::programmed_quantizer_range(&cfg.device, 1.5, 0.6, 4).unwrap();
        assert_eq!((q.i_lo, q.i_hi), expect);
        assert_eq!(q.bits, 4);
    }

    #[test]
    fn hash_tracks_semantics_not_paths() {
        let a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 16);

        b.data_dir = PathBuf::from("/elsewhere");
        b.out_dir = Some(PathBuf::from("/tmp/out"));
        b.save_weights = true;
        assert_eq!(
            a.config_hash(),
            b.config_hash(),
            "paths must not affect identity"
        );

        b.device.tau = 10e-9;
        assert_ne!(a.config_hash(), b.config_hash());

        let mut c = ExperimentConfig::default();
        c.master_seed = 43;
        assert_ne!(a.config_hash(), c.config_hash());

        let mut d = ExperimentConfig::default();
        d.sweep = Some(SweepGrid {
            bits: Some(vec![1, 2]),
            ..SweepGrid::default()
        });
        assert_eq!(
            a.config_hash(),
            d.config_hash(),
            "grid axes are not run identity"
        );
    }

    #[test]
    fn sweep_expansion_is_a_cartesian_product() {
        let text = "\n[sweep]\nsections = [1, 2, 4, 6, 7, 8]\nbits = [1, 2, 3, 4, 5, 6, 7]\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let grid = cfg.sweep.clone().unwrap();
        let points = grid.expand(&cfg);
        assert_eq!(points.len(), 42);
        assert!(points.iter().all(|p| p.sweep.is_none()));
        // section-major, bits-minor ordering
        assert_eq!(points[0].encoding.sections, 1);
        assert_eq!(points[0].quantizer.bits, 1);
        assert_eq!(points[1].quantizer.bits, 2);
        assert_eq!(points[7].encoding.sections, 2);
        // unset axes inherit the base
        assert!(points
            .iter()
            .all(|p| p.device.tau == 6e-9 && p.encoding.parity));

        let tau_grid = SweepGrid {
            tau_ns: Some(vec![6.0, 10.0, 15.0, 20.0]),
            sections: Some(vec![1, 2, 4, 6, 7, 8]),
            ..SweepGrid::default()
        };
        assert_eq!(tau_grid.expand(&ExperimentConfig::default()).len(), 24);
        assert!((tau_grid.expand(&ExperimentConfig::default())[0].device.tau - 6e-9).abs() < 1e-24);
    }
}
