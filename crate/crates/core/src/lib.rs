//! Reservoir computing on volatile memristors, in simulation.
//!
//! A bank of independent memristive devices receives binary pulse trains;
//! each device's conductance rises on `1` pulses and relaxes during `0`
//! slots, so its final read current is a nonlinear fingerprint of the
//! pulse history it saw. Feeding image rows/columns (plus optional parity
//! rows) through such a bank, quantizing the read currents, and training a
//! one-layer softmax readout on the quantized states yields a competitive
//! MNIST classifier with no recurrent weights to train.
//!
//! The crate is organized as a pipeline:
//!
//! - [`device`]: single-device physics — pulse-driven state updates,
//!   exponential relaxation, nonlinear read current.
//! - [`encoding`]: images → binary pulse programs (1-D/2-D scans, parity
//!   rows, section-parallel splitting).
//! - [`reservoir`]: a device bank that runs pulse programs and quantizes
//!   the resulting currents.
//! - [`readout`]: sparse one-layer classifier trained by SGD.
//! - [`variability`]: device-to-device and cycle-to-cycle perturbations,
//!   plus Monte-Carlo aggregation.
//! - [`analysis`]: state-separability tables, bin-occupancy counts, and
//!   factorial main effects.
//! - [`dataset`], [`config`], [`results`], [`pipeline`]: IDX loading, TOML
//!   experiment configs, CSV/checkpoint persistence, and the end-to-end
//!   experiment drivers.
//!
//! All randomness flows from one master seed through tagged derivations
//! ([`rng`]), so every experiment is reproducible bit-for-bit regardless
//! of thread count.

pub mod analysis;
pub mod config;
pub mod dataset;
pub mod device;
pub mod encoding;
pub mod error;
pub mod pipeline;
pub mod readout;
pub mod reservoir;
pub mod results;
pub mod rng;
pub mod variability;

pub use config::{DriveConfig, ExperimentConfig, QuantizerSpec, SweepGrid};
pub use dataset::{load_mnist, Dataset, DatasetHalf};
pub use device::{DeviceParams, MemristorState};
pub use encoding::{BinaryImage, Dimension, EncodingConfig, GrayImage};
pub use error::{Error, Result};
pub use pipeline::{
    extract_features, factor_sweep, monte_carlo, run_pipeline, FeatureBins, PipelineOutcome, Split,
    NUM_CLASSES,
};
pub use readout::{ReadoutWeights, SparseFeatures, TrainConfig};
pub use reservoir::{QuantizerConfig, Reservoir};
pub use variability::{DeviceFactors, MonteCarloStats, VariabilityConfig};
