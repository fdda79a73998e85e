//! End-to-end experiments: binarize → encode → run reservoir → quantize →
//! train readout → evaluate, plus the Monte-Carlo and factorial-sweep
//! drivers built on top.
//!
//! Every random stream derives from the experiment's master seed through
//! fixed tags, and per-image work is independent, so results are identical
//! across repeat runs and across thread counts. Feature extraction may be
//! cached on disk (quantizer bins, one byte each) keyed by everything that
//! influences the bins — training hyper-parameters excluded, so readout
//! sweeps reuse reservoir output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::Serialize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::analysis::SweepRecord;
use crate::config::{self, ExperimentConfig};
use crate::dataset::{Dataset, DatasetHalf};
use crate::device::{CycleNoise, NoCycleNoise};
use crate::encoding::{binarize, encode, reservoir_size, EncodingConfig, GrayImage};
use crate::error::{Error, Result};
use crate::readout::{self, ReadoutWeights, SparseFeatures, TrainConfig};
use crate::reservoir::{quantize_bins, QuantizerConfig, Reservoir};
use crate::results::SCHEMA_VERSION;
use crate::rng::{derive_seed, stream, tags};
use crate::variability::{sample_run_factors, DeviceFactors, MonteCarloStats, UniformCycleNoise};

pub const NUM_CLASSES: usize = 10;

/// Which split an extraction serves; keys its noise substreams and cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn image_tag(self) -> u64 {
        match self {
            Split::Train => tags::TRAIN_IMAGE,
            Split::Test => tags::TEST_IMAGE,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Quantized reservoir output for a whole split: flat row-major bins.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBins {
    pub n_samples: usize,
    pub n_features: usize,
    pub bits: u32,
    pub bins: Vec<u16>,
}

impl FeatureBins {
    /// Sparse matrix over the selected rows (in the given order).
    pub fn select(&self, rows: &[usize]) -> Result<SparseFeatures> {
        SparseFeatures::from_flat_bins(&self.bins, self.n_features, self.bits, rows)
    }

    /// Sparse matrix over all rows in order.
    pub fn all(&self) -> Result<SparseFeatures> {
        self.select(&(0..self.n_samples).collect::<Vec<_>>())
    }
}

fn image_bins<N: CycleNoise>(
    res: &mut Reservoir,
    img: &GrayImage,
    ecfg: &EncodingConfig,
    q: &QuantizerConfig,
    noise: &mut N,
) -> Result<Vec<u16>> {
    let programs = encode(&binarize(img, ecfg.threshold), ecfg)?;
    let currents = res.run(&programs, noise)?;
    Ok(quantize_bins(&currents, q))
}

#[cfg(feature = "parallel")]
fn extract_rows<N, F>(
    res: &Reservoir,
    images: &[GrayImage],
    ecfg: &EncodingConfig,
    q: &QuantizerConfig,
    make_noise: F,
) -> Result<Vec<Vec<u16>>>
where
    N: CycleNoise,
    F: Fn(usize) -> N + Sync,
{
    images
        .par_iter()
        .enumerate()
        .map_init(
            || res.clone(),
            |res, (i, img)| image_bins(res, img, ecfg, q, &mut make_noise(i)),
        )
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn extract_rows<N, F>(
    res: &Reservoir,
    images: &[GrayImage],
    ecfg: &EncodingConfig,
    q: &QuantizerConfig,
    make_noise: F,
) -> Result<Vec<Vec<u16>>>
where
    N: CycleNoise,
    F: Fn(usize) -> N + Sync,
{
    let mut res = res.clone();
    images
        .iter()
        .enumerate()
        .map(|(i, img)| image_bins(&mut res, img, ecfg, q, &mut make_noise(i)))
        .collect()
}

/// Run the reservoir over a whole split and quantize every read current.
///
/// `run_index` selects the Monte-Carlo run: it keys the per-run seed that
/// device factors and cycle-noise streams derive from (run 0 is the
/// deterministic single-run pipeline). Pass a cache directory to reuse
/// bins across invocations; cache misses fall through to computation and
/// cache write failures are ignored (the cache is purely an optimization).
pub fn extract_features(
    cfg: &ExperimentConfig,
    half: &DatasetHalf,
    run_index: usize,
    split: Split,
    cache_dir: Option<&Path>,
) -> Result<FeatureBins> {
    if half.is_empty() {
        return Err(Error::config(format!("{} split is empty", split.name())));
    }
    let (n, m) = (half.images[0].rows, half.images[0].cols);
    cfg.encoding.validate_for(n, m)?;
    let q = cfg.resolved_quantizer(n, m)?;
    let n_features = reservoir_size(&cfg.encoding, n, m);

    let cache_key = feature_cache_key(cfg, run_index, split, half.len());
    if let Some(dir) = cache_dir {
        if let Some(bins) = try_load_cache(dir, cache_key, half.len(), n_features, q.bits) {
            return Ok(FeatureBins {
                n_samples: half.len(),
                n_features,
                bits: q.bits,
                bins,
            });
        }
    }

    let run_seed = derive_seed(cfg.master_seed, &[tags::RUN, run_index as u64]);
    let factors: Vec<DeviceFactors> =
        sample_run_factors(&cfg.variability, &cfg.device, n_features, run_seed);
    let res = Reservoir::configured(cfg.device, cfg.drive.v_write, cfg.drive.v_read, &factors)?;

    let rows = if cfg.variability.c2c_pct == 0.0 {
        extract_rows(&res, &half.images, &cfg.encoding, &q, |_| NoCycleNoise)?
    } else {
        let vcfg = cfg.variability;
        let tag = split.image_tag();
        extract_rows(
            &res,
            &half.images,
            &cfg.encoding,
            &q,
            move |i| -> UniformCycleNoise {
                crate::variability::c2c_stream(&vcfg, derive_seed(run_seed, &[tag, i as u64]))
            },
        )?
    };

    let mut bins = Vec::with_capacity(half.len() * n_features);
    for row in rows {
        bins.extend_from_slice(&row);
    }
    let features = FeatureBins {
        n_samples: half.len(),
        n_features,
        bits: q.bits,
        bins,
    };
    if let Some(dir) = cache_dir {
        // best-effort: a read-only or full disk must not fail the run
        let _ = store_cache(dir, cache_key, &features);
    }
    Ok(features)
}

/// Training rows: all of them, or the first `limit` of one master-seeded
/// shuffle. The prefix is stable — growing the limit only appends rows —
/// and the test split is never touched.
pub fn train_subset(n_train: usize, limit: Option<usize>, master_seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_train).collect();
    match limit {
        None => order,
        Some(l) => {
            order.shuffle(&mut stream(master_seed, &[tags::TRAIN_SUBSET]));
            order.truncate(l.min(n_train));
            order
        }
    }
}

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub test_accuracy: f64,
    pub weights: ReadoutWeights,
    /// `confusion[actual][predicted]` over the test split.
    pub confusion: Vec<Vec<u32>>,
    pub runtime_s: f64,
    pub record: SweepRecord,
}

fn record_for(cfg: &ExperimentConfig, seed: u64, accuracy: f64, runtime_s: f64) -> SweepRecord {
    SweepRecord {
        dimension: cfg.encoding.dimension,
        parity: cfg.encoding.parity,
        sections: cfg.encoding.sections,
        bits: cfg.quantizer.bits,
        tau_ns: cfg.device.tau * 1e9,
        variability_pct: cfg.variability.d2d_pct,
        seed,
        accuracy,
        runtime_s,
        config_hash: cfg.config_hash(),
        schema_version: SCHEMA_VERSION,
    }
}

fn cache_dir_of(cfg: &ExperimentConfig) -> Option<PathBuf> {
    cfg.out_dir.as_ref().map(|d| d.join("cache"))
}

fn run_once(cfg: &ExperimentConfig, data: &Dataset, run_index: usize) -> Result<PipelineOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let cache = cache_dir_of(cfg);
    let train_bins = extract_features(cfg, &data.train, run_index, Split::Train, cache.as_deref())?;
    let test_bins = extract_features(cfg, &data.test, run_index, Split::Test, cache.as_deref())?;

    let subset = train_subset(train_bins.n_samples, cfg.train_limit, cfg.master_seed);
    let train_features = train_bins.select(&subset)?;
    let train_labels: Vec<u8> = subset.iter().map(|&i| data.train.labels[i]).collect();

    let run_seed = derive_seed(cfg.master_seed, &[tags::RUN, run_index as u64]);
    let w0 = readout::init_weights(train_bins.n_features, NUM_CLASSES, run_seed);
    let tcfg = TrainConfig {
        seed: run_seed,
        ..cfg.train
    };
    let weights = readout::train(&train_features, &train_labels, &w0, &tcfg)?;

    let test_features = test_bins.all()?;
    let test_accuracy = readout::evaluate(&weights, &test_features, &data.test.labels)?;
    let confusion = readout::confusion(&weights, &test_features, &data.test.labels)?;

    let runtime_s = started.elapsed().as_secs_f64();
    let seed = if run_index == 0 {
        cfg.master_seed
    } else {
        run_seed
    };
    Ok(PipelineOutcome {
        test_accuracy,
        weights,
        confusion,
        runtime_s,
        record: record_for(cfg, seed, test_accuracy, runtime_s),
    })
}

/// One full experiment under the config's variability settings (run 0).
pub fn run_pipeline(cfg: &ExperimentConfig, data: &Dataset) -> Result<PipelineOutcome> {
    run_once(cfg, data, 0)
}

/// Repeat the pipeline with fresh device factors per run and retrain the
/// readout each time; returns the accuracy statistics plus one record per
/// run (the record's seed column carries the run's derived seed).
pub fn monte_carlo(
    cfg: &ExperimentConfig,
    data: &Dataset,
) -> Result<(MonteCarloStats, Vec<SweepRecord>)> {
    cfg.validate()?;
    let runs = cfg.variability.runs;
    let outcomes: Vec<PipelineOutcome> = run_indices(runs)
        .map(|r| run_once(cfg, data, r))
        .collect::<Result<_>>()?;
    let records: Vec<SweepRecord> = outcomes.iter().map(|o| o.record.clone()).collect();
    let stats =
        MonteCarloStats::from_accuracies(outcomes.iter().map(|o| o.test_accuracy).collect())?;
    Ok((stats, records))
}

#[cfg(feature = "parallel")]
fn run_indices(runs: usize) -> rayon::range::Iter<usize> {
    (0..runs).into_par_iter()
}

#[cfg(not(feature = "parallel"))]
fn run_indices(runs: usize) -> std::ops::Range<usize> {
    0..runs
}

/// Run every grid point of the config's sweep axes (or just the base
/// config when no grid is present). Per-point failures are reported in
/// place, never aborting the remaining points.
pub fn factor_sweep(
    base: &ExperimentConfig,
    data: &Dataset,
) -> Vec<(ExperimentConfig, Result<SweepRecord>)> {
    let points = match &base.sweep {
        Some(grid) => grid.expand(base),
        None => vec![base.clone()],
    };
    points
        .into_iter()
        .map(|cfg| {
            let result = run_pipeline(&cfg, data).map(|o| o.record);
            (cfg, result)
        })
        .collect()
}

fn feature_cache_key(
    cfg: &ExperimentConfig,
    run_index: usize,
    split: Split,
    n_samples: usize,
) -> u64 {
    #[derive(Serialize)]
    struct Key<'a> {
        encoding: &'a EncodingConfig,
        device: &'a crate::device::DeviceParams,
        drive: &'a crate::config::DriveConfig,
        quantizer: &'a crate::config::QuantizerSpec,
        variability: &'a crate::variability::VariabilityConfig,
        master_seed: u64,
        run_index: usize,
        split: &'a str,
        n_samples: usize,
    }
    let key = Key {
        encoding: &cfg.encoding,
        device: &cfg.device,
        drive: &cfg.drive,
        quantizer: &cfg.quantizer,
        variability: &cfg.variability,
        master_seed: cfg.master_seed,
        run_index,
        split: split.name(),
        n_samples,
    };
    config::fnv1a64(
        toml::to_string(&key)
            .expect("cache key serializes")
            .as_bytes(),
    )
}

const CACHE_MAGIC: &[u8; 6] = b"MRFC1\n";

fn cache_path(dir: &Path, key: u64) -> PathBuf {
    dir.join(format!("features-{key:016x}.bin"))
}

fn try_load_cache(
    dir: &Path,
    key: u64,
    n_samples: usize,
    n_features: usize,
    bits: u32,
) -> Option<Vec<u16>> {
    if bits > 8 {
        return None;
    }
    let bytes = std::fs::read(cache_path(dir, key)).ok()?;
    let header_len = CACHE_MAGIC.len() + 8 + 4 + 4 + 4;
    if bytes.len() != header_len + n_samples * n_features || &bytes[..6] != CACHE_MAGIC {
        return None;
    }
    let mut at = 6;
    let mut take = |n: usize| {
        let s = &bytes[at..at + n];
        at += n;
        s
    };
    if u64::from_le_bytes(take(8).try_into().unwrap()) != key
        || u32::from_le_bytes(take(4).try_into().unwrap()) as usize != n_samples
        || u32::from_le_bytes(take(4).try_into().unwrap()) as usize != n_features
        || u32::from_le_bytes(take(4).try_into().unwrap()) != bits
    {
        return None;
    }
    Some(bytes[header_len..].iter().map(|&b| b as u16).collect())
}

fn store_cache(dir: &Path, key: u64, features: &FeatureBins) -> std::io::Result<()> {
    if features.bits > 8 {
        return Ok(());
    }
    std::fs::create_dir_all(dir)?;
    let mut bytes =
        Vec::with_capacity(CACHE_MAGIC.len() + 20 + features.n_samples * features.n_features);
    bytes.extend_from_slice(CACHE_MAGIC);
    bytes.extend_from_slice(&key.to_le_bytes());
    bytes.extend_from_slice(&(features.n_samples as u32).to_le_bytes());
    bytes.extend_from_slice(&(features.n_features as u32).to_le_bytes());
    bytes.extend_from_slice(&features.bits.to_le_bytes());
    bytes.extend(features.bins.iter().map(|&b| b as u8));
    std::fs::write(cache_path(dir, key), bytes)
}
