//! Device-to-device and cycle-to-cycle variation.
//!
//! Fabricated devices differ from each other (fixed per-device offsets,
//! sampled once) and from cycle to cycle (fresh multiplicative noise on
//! every state update). Both are modeled as multiplicative perturbations
//! with half-width `p`: uniform on `[1−p, 1+p]` by default, Gaussian with
//! σ = p behind a flag.
//!
//! Reproducibility contract: every (run, device) pair draws from its own
//! derived substream, so results never depend on scheduling or thread
//! count, and a zero percentage yields exactly the unperturbed values
//! without consuming any randomness.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::{CycleNoise, DeviceParams};
use crate::error::{Error, Result};
use crate::rng::{self, tags};

/// Shape of the multiplicative perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    /// Uniform on `[1−p, 1+p]`.
    #[default]
    Uniform,
    /// Gaussian with mean 1 and σ = p (sensitivity analysis only).
    Gaussian,
}

/// Variation magnitudes and Monte-Carlo repetition count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariabilityConfig {
    /// Device-to-device half-width p (0, 0.05, and 0.20 in the studies).
    pub d2d_pct: f64,
    /// Cycle-to-cycle half-width.
    pub c2c_pct: f64,
    /// Also perturb the write-rate (λ) and drive-nonlinearity (η) constants
    /// per device (full Monte-Carlo mode), not just x_init and τ.
    pub vary_lambda_eta: bool,
    /// Monte-Carlo repetitions.
    pub runs: usize,
    pub distribution: PerturbationKind,
}

impl Default for VariabilityConfig {
    fn default() -> Self {
        VariabilityConfig {
            d2d_pct: 0.0,
            c2c_pct: 0.0,
            vary_lambda_eta: false,
            runs: 30,
            distribution: PerturbationKind::Uniform,
        }
    }
}

impl VariabilityConfig {
    /// A configuration with no variation at all.
    pub fn none() -> Self {
        VariabilityConfig::default()
    }

    pub fn is_noise_free(&self) -> bool {
        self.d2d_pct == 0.0 && self.c2c_pct == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("d2d_pct", self.d2d_pct), ("c2c_pct", self.c2c_pct)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::config(format!("{name} must lie in [0, 1), got {p}")));
            }
        }
        if self.runs == 0 {
            return Err(Error::config("variability runs must be at least 1"));
        }
        Ok(())
    }
}

/// Fixed per-device perturbation sample: concrete initial state and decay
/// constant, plus gain factors applied to every update and to the drive
/// voltage nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceFactors {
    pub x_init: f64,
    pub tau_eff: f64,
    /// Multiplier on every Δx (write and decay); perturbs the rate constant.
    pub update_gain: f64,
    /// Multiplier on η inside the write drive `sinh(η·V)`.
    pub eta_gain: f64,
}

impl DeviceFactors {
    /// The unperturbed device.
    pub fn nominal(params: &DeviceParams) -> Self {
        DeviceFactors {
            x_init: params.x_min,
            tau_eff: params.tau,
            update_gain: 1.0,
            eta_gain: 1.0,
        }
    }
}

fn draw_factor<R: Rng>(rng: &mut R, p: f64, kind: PerturbationKind) -> f64 {
    match kind {
        PerturbationKind::Uniform => 1.0 - p + 2.0 * p * rng.gen::<f64>(),
        PerturbationKind::Gaussian => {
            // Box–Muller; one normal per call keeps the draw count predictable.
            let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            let u2: f64 = rng.gen();
            let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            1.0 + p * z
        }
    }
}

/// Sample one device's fixed factors from the substream of
/// `(run_seed, device_index)`.
///
/// Draw order is fixed — x_init, τ, then (in full mode) λ and η — so adding
/// devices never shifts other devices' samples. A zero `d2d_pct` returns the
/// exact nominal factors without touching the generator.
pub fn sample_device_factors(
    cfg: &VariabilityConfig,
    params: &DeviceParams,
    device_index: u64,
    run_seed: u64,
) -> DeviceFactors {
    if cfg.d2d_pct == 0.0 {
        return DeviceFactors::nominal(params);
    }
    let mut rng = rng::stream(run_seed, &[tags::DEVICE, device_index]);
    let p = cfg.d2d_pct;
    let x_init = params.x_min * draw_factor(&mut rng, p, cfg.distribution);
    let tau_eff = params.tau * draw_factor(&mut rng, p, cfg.distribution);
    let (update_gain, eta_gain) = if cfg.vary_lambda_eta {
        (
            draw_factor(&mut rng, p, cfg.distribution),
            draw_factor(&mut rng, p, cfg.distribution),
        )
    } else {
        (1.0, 1.0)
    };
    DeviceFactors {
        x_init,
        tau_eff,
        update_gain,
        eta_gain,
    }
}

/// Sample a whole reservoir's factors for one Monte-Carlo run.
pub fn sample_run_factors(
    cfg: &VariabilityConfig,
    params: &DeviceParams,
    device_count: usize,
    run_seed: u64,
) -> Vec<DeviceFactors> {
    (0..device_count)
        .map(|d| sample_device_factors(cfg, params, d as u64, run_seed))
        .collect()
}

/// Seeded stream of per-update multipliers in `[1−p, 1+p]`.
///
/// With `p = 0` the stream is the constant 1.0 and never draws, so the
/// noise-free path is bit-identical to running without a noise source.
#[derive(Debug, Clone)]
pub struct UniformCycleNoise {
    rng: rand_chacha::ChaCha8Rng,
    p: f64,
    kind: PerturbationKind,
}

impl CycleNoise for UniformCycleNoise {
    #[inline]
    fn next_factor(&mut self) -> f64 {
        if self.p == 0.0 {
            1.0
        } else {
            draw_factor(&mut self.rng, self.p, self.kind)
        }
    }
}

/// Cycle-to-cycle noise source for one (image, run) evaluation.
pub fn c2c_stream(cfg: &VariabilityConfig, seed: u64) -> UniformCycleNoise {
    UniformCycleNoise {
        rng: rng::stream(seed, &[]),
        p: cfg.c2c_pct,
        kind: cfg.distribution,
    }
}

/// Accuracy statistics over Monte-Carlo runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloStats {
    pub runs: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Per-run accuracies in run order.
    pub accuracies: Vec<f64>,
}

impl MonteCarloStats {
    pub fn from_accuracies(accuracies: Vec<f64>) -> Result<Self> {
        if accuracies.is_empty() {
            return Err(Error::config(
                "Monte-Carlo statistics need at least one run",
            ));
        }
        let runs = accuracies.len();
        let mean = accuracies.iter().sum::<f64>() / runs as f64;
        let min = accuracies.iter().copied().fold(f64::INFINITY, f64::min);
        let max = accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(MonteCarloStats {
            runs,
            mean,
            min,
            max,
            accuracies,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: f64, full: bool) -> VariabilityConfig {
        VariabilityConfig {
            d2d_pct: p,
            vary_lambda_eta: full,
            ..VariabilityConfig::default()
        }
    }

    #[test]
    fn zero_percent_is_exactly_nominal() {
        let params = DeviceParams::default();
        let f = sample_device_factors(&cfg(0.0, true), &params, 17, 99);
        assert_eq!(f, DeviceFactors::nominal(&params));
    }

    #[test]
    fn factors_stay_within_support() {
        let params = DeviceParams::default();
        for d in 0..2000u64 {
            let f = sample_device_factors(&cfg(0.05, true), &params, d, 1);
            assert!(f.x_init >= params.x_min * 0.95 && f.x_init <= params.x_min * 1.05);
            assert!(f.tau_eff >= params.tau * 0.95 && f.tau_eff <= params.tau * 1.05);
            assert!(f.update_gain >= 0.95 && f.update_gain <= 1.05);
            assert!(f.eta_gain >= 0.95 && f.eta_gain <= 1.05);
        }
    }

    #[test]
    fn partial_mode_leaves_gains_at_one() {
        let params = DeviceParams::default();
        let f = sample_device_factors(&cfg(0.2, false), &params, 3, 7);
        assert_eq!(f.update_gain, 1.0);
        assert_eq!(f.eta_gain, 1.0);
        assert_ne!(f.x_init, params.x_min);
    }

    #[test]
    fn factor_mean_is_near_one() {
        let params = DeviceParams::default();
        let n = 10_000u64;
        let mut sums = [0.0f64; 4];
        for d in 0..n {
            let f = sample_device_factors(&cfg(0.2, true), &params, d, 5);
            sums[0] += f.x_init / params.x_min;
            sums[1] += f.tau_eff / params.tau;
            sums[2] += f.update_gain;
            sums[3] += f.eta_gain;
        }
        for s in sums {
            let mean = s / n as f64;
            assert!((mean - 1.0).abs() < 0.01, "mean factor {mean}");
        }
    }

    #[test]
    fn sampling_is_deterministic_and_per_device() {
        let params = DeviceParams::default();
        let a = sample_device_factors(&cfg(0.05, true), &params, 4, 11);
        let b = sample_device_factors(&cfg(0.05, true), &params, 4, 11);
        assert_eq!(a, b);
        let c = sample_device_factors(&cfg(0.05, true), &params, 5, 11);
        assert_ne!(a, c);
        let d = sample_device_factors(&cfg(0.05, true), &params, 4, 12);
        assert_ne!(a, d);
    }

    #[test]
    fn run_factors_cover_every_device() {
        let params = DeviceParams::default();
        let all = sample_run_factors(&cfg(0.05, true), &params, 64, 3);
        assert_eq!(all.len(), 64);
        assert_eq!(
            all[9],
            sample_device_factors(&cfg(0.05, true), &params, 9, 3)
        );
    }

    #[test]
    fn c2c_stream_support_and_determinism() {
        let noisy = VariabilityConfig {
            c2c_pct: 0.2,
            ..VariabilityConfig::default()
        };
        let mut s = c2c_stream(&noisy, 42);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..100_000 {
            let f = s.next_factor();
            lo = lo.min(f);
            hi = hi.max(f);
        }
        assert!(lo >= 0.8 && hi <= 1.2, "support violated: [{lo}, {hi}]");
        assert!(hi - lo > 0.35, "stream barely varies: [{lo}, {hi}]");

        let a: Vec<f64> = (0..10)
            .map(|_| c2c_stream(&noisy, 7).next_factor())
            .collect();
        assert!(
            a.windows(2).all(|w| w[0] == w[1]),
            "same seed must replay the stream"
        );
    }

    #[test]
    fn silent_c2c_stream_is_constant_one() {
        let mut s = c2c_stream(&VariabilityConfig::none(), 42);
        for _ in 0..100 {
            assert_eq!(s.next_factor(), 1.0);
        }
    }

    #[test]
    fn gaussian_mode_centers_on_one() {
        let params = DeviceParams::default();
        let g = VariabilityConfig {
            d2d_pct: 0.05,
            vary_lambda_eta: true,
            distribution: PerturbationKind::Gaussian,
            ..VariabilityConfig::default()
        };
        let n = 10_000u64;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for d in 0..n {
            let f = sample_device_factors(&g, &params, d, 9);
            sum += f.update_gain;
            sq += (f.update_gain - 1.0) * (f.update_gain - 1.0);
        }
        let mean = sum / n as f64;
        let sd = (sq / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 0.005);
        assert!((sd - 0.05).abs() < 0.005);
    }

    #[test]
    fn config_validation() {
        assert!(VariabilityConfig::none().validate().is_ok());
        assert!(VariabilityConfig {
            d2d_pct: 1.0,
            ..VariabilityConfig::default()
        }
        .validate()
        .is_err());
        assert!(VariabilityConfig {
            c2c_pct: -0.1,
            ..VariabilityConfig::default()
        }
        .validate()
        .is_err());
        assert!(VariabilityConfig {
            runs: 0,
            ..VariabilityConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn stats_summarize_runs() {
        let s = MonteCarloStats::from_accuracies(vec![0.9, 0.95, 0.92]).unwrap();
        assert_eq!(s.runs, 3);
        assert_eq!(s.min, 0.9);
        assert_eq!(s.max, 0.95);
        assert!((s.mean - 0.9233333333).abs() < 1e-9);
        assert!(MonteCarloStats::from_accuracies(vec![]).is_err());
    }
}
