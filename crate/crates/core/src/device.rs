//! Discrete model of a volatile memristor.
//!
//! The device carries a normalized internal state `x` in `[x_min, x_max]`.
//! A supra-threshold voltage pulse of duration `t_pulse` grows `x` by
//!
//! ```text
//! Δx = R(x) · t_pulse · λ · sinh(η · V),     R(x) = 1 − e^(3x) / e^(3·x_max)
//! ```
//!
//! where the window `R` shrinks updates toward zero as `x` approaches
//! `x_max` (saturation). Below threshold the state relaxes exponentially
//! toward its rest value:
//!
//! ```text
//! Δx = −(x − x_min) · (1 − e^(−dt/τ))
//! ```
//!
//! which gives the device a fading memory with time constant `τ`. A small
//! read voltage (at most the write threshold) probes the state through
//!
//! ```text
//! I = (1 − x) · α · (1 − e^(−β·V)) + x · γ · sinh(δ·V)
//! ```
//!
//! All operations are pure functions over value types; nothing here owns
//! shared mutable state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Steepness of the saturation window `R(x) = 1 − e^(Sx)/e^(S·x_max)`.
const WINDOW_STEEPNESS: f64 = 3.0;

/// Fitting constants of the dynamic memristor model.
///
/// Defaults are the reference parameter set used throughout:
/// α=1e-8 A, β=0.5 /V, γ=1e-5 A, δ=4 /V, λ=1e3 /s, η=8 /V,
/// x_max=1, x_min=0.1, v_th=0.6 V, t_pulse=1 ns, τ=6 ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceParams {
    /// Off-branch current scale (A).
    pub alpha: f64,
    /// Off-branch voltage nonlinearity (1/V).
    pub beta: f64,
    /// On-branch current scale (A).
    pub gamma: f64,
    /// On-branch voltage nonlinearity (1/V).
    pub delta: f64,
    /// Write-update rate constant (1/s).
    pub lambda_rate: f64,
    /// Write-update voltage nonlinearity (1/V).
    pub eta: f64,
    /// Upper bound of the internal state (unitless).
    pub x_max: f64,
    /// Lower (rest) bound of the internal state (unitless).
    pub x_min: f64,
    /// Write threshold voltage (V): pulses above it write, at or below it decay.
    pub v_th: f64,
    /// Duration of one pulse slot (s).
    pub t_pulse: f64,
    /// Decay time constant (s). The sweeps explore 1–50 ns; larger values
    /// are accepted for limit studies.
    pub tau: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            alpha: 1e-8,
            beta: 0.5,
            gamma: 1e-5,
            delta: 4.0,
            lambda_rate: 1e3,
            eta: 8.0,
            x_max: 1.0,
            x_min: 0.1,
            v_th: 0.6,
            t_pulse: 1e-9,
            tau: 6e-9,
        }
    }
}

impl DeviceParams {
    /// Same parameters with a different decay constant.
    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// Check positivity and ordering constraints.
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("lambda_rate", self.lambda_rate),
            ("eta", self.eta),
            ("x_max", self.x_max),
            ("x_min", self.x_min),
            ("v_th", self.v_th),
            ("t_pulse", self.t_pulse),
            ("tau", self.tau),
        ];
        for (name, v) in all {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!(
                    "device parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.x_min >= self.x_max {
            return Err(Error::config(format!(
                "x_min ({}) must be below x_max ({})",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }
}

/// Instantaneous state of one device, including its fixed per-device factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemristorState {
    /// Internal state variable, held in `[x_min, x_max]` by every update.
    pub x: f64,
    /// This device's decay constant (s); equals `params.tau` unless perturbed.
    pub tau_eff: f64,
    /// Per-device multiplier applied to every Δx (write and decay); nominal 1.
    pub update_gain: f64,
}

impl MemristorState {
    /// A device at rest with nominal factors.
    pub fn fresh(params: &DeviceParams) -> Self {
        MemristorState {
            x: params.x_min,
            tau_eff: params.tau,
            update_gain: 1.0,
        }
    }
}

/// Source of one multiplicative perturbation per state update.
///
/// The nominal implementation is [`NoCycleNoise`], which yields exactly 1.0;
/// see the variability module for the seeded uniform stream.
pub trait CycleNoise {
    fn next_factor(&mut self) -> f64;
}

/// Noise-free stream: every update factor is exactly 1.0.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoCycleNoise;

impl CycleNoise for NoCycleNoise {
    #[inline]
    fn next_factor(&mut self) -> f64 {
        1.0
    }
}

/// Saturation window `R(x)`: 1 at deep depression, exactly 0 at `x_max`.
pub fn window(x: f64, params: &DeviceParams) -> Result<f64> {
    if !(params.x_min..=params.x_max).contains(&x) {
        return Err(Error::domain(format!(
            "window: x = {x} outside [{}, {}]",
            params.x_min, params.x_max
        )));
    }
    Ok(window_unchecked(x, inv_exp_window_max(params)))
}

/// `e^(−S·x_max)`, the constant the hot path folds into the window.
#[inline]
pub(crate) fn inv_exp_window_max(params: &DeviceParams) -> f64 {
    (-WINDOW_STEEPNESS * params.x_max).exp()
}

#[inline]
pub(crate) fn window_unchecked(x: f64, inv_exp_max: f64) -> f64 {
    1.0 - (WINDOW_STEEPNESS * x).exp() * inv_exp_max
}

/// Per-pulse drive magnitude `gain · t_pulse · λ · sinh(η · v)`.
///
/// Shared by [`write_update`] and the reservoir's precomputed per-device path
/// so both produce bit-identical states.
#[inline]
pub(crate) fn write_drive(
    update_gain: f64,
    eta_gain: f64,
    v_pulse: f64,
    params: &DeviceParams,
) -> f64 {
    update_gain * params.t_pulse * params.lambda_rate * (params.eta * eta_gain * v_pulse).sinh()
}

/// Fraction of the excursion `(x − x_min)` lost in one decay interval,
/// scaled by the device gain: `gain · (1 − e^(−dt/τ))`.
#[inline]
pub(crate) fn decay_fraction(update_gain: f64, dt: f64, tau_eff: f64) -> f64 {
    update_gain * (1.0 - (-dt / tau_eff).exp())
}

#[inline]
pub(crate) fn apply_write(x: f64, drive: f64, inv_exp_max: f64, params: &DeviceParams) -> f64 {
    let x2 = x + drive * window_unchecked(x, inv_exp_max);
    x2.clamp(params.x_min, params.x_max)
}

#[inline]
pub(crate) fn apply_decay(x: f64, fraction: f64, params: &DeviceParams) -> f64 {
    let x2 = x - fraction * (x - params.x_min);
    x2.clamp(params.x_min, params.x_max)
}

/// One supra-threshold write pulse of duration `t_pulse`.
///
/// Errors if `v_pulse ≤ v_th`; sub-threshold drive must go through [`step`]
/// (or [`decay_update`]) instead.
pub fn write_update(
    state: MemristorState,
    v_pulse: f64,
    params: &DeviceParams,
) -> Result<MemristorState> {
    if v_pulse <= params.v_th {
        return Err(Error::domain(format!(
            "write_update: v_pulse = {v_pulse} V does not exceed the write threshold {} V",
            params.v_th
        )));
    }
    let drive = write_drive(state.update_gain, 1.0, v_pulse, params);
    Ok(MemristorState {
        x: apply_write(state.x, drive, inv_exp_window_max(params), params),
        ..state
    })
}

/// Relaxation toward `x_min` for a quiet interval `dt ≥ 0`.
pub fn decay_update(state: MemristorState, dt: f64, params: &DeviceParams) -> MemristorState {
    debug_assert!(dt >= 0.0, "decay_update: negative dt");
    let fraction = decay_fraction(state.update_gain, dt, state.tau_eff);
    MemristorState {
        x: apply_decay(state.x, fraction, params),
        ..state
    }
}

/// One pulse slot: write above threshold, decay for `t_pulse` otherwise.
/// `noise` contributes one fresh multiplicative factor to Δx either way.
pub fn step<N: CycleNoise>(
    state: MemristorState,
    v: f64,
    params: &DeviceParams,
    noise: &mut N,
) -> MemristorState {
    debug_assert!(v >= 0.0, "step: negative drive voltage");
    let factor = noise.next_factor();
    if v > params.v_th {
        let drive = factor * write_drive(state.update_gain, 1.0, v, params);
        MemristorState {
            x: apply_write(state.x, drive, inv_exp_window_max(params), params),
            ..state
        }
    } else {
        let fraction = factor * decay_fraction(state.update_gain, params.t_pulse, state.tau_eff);
        MemristorState {
            x: apply_decay(state.x, fraction, params),
            ..state
        }
    }
}

/// Non-destructive current readout at `0 < v_read ≤ v_th`.
pub fn read_current(state: MemristorState, v_read: f64, params: &DeviceParams) -> Result<f64> {
    if v_read > params.v_th {
        return Err(Error::domain(format!(
            "read_current: v_read = {v_read} V exceeds the write threshold {} V (destructive read)",
            params.v_th
        )));
    }
    if v_read <= 0.0 {
        return Err(Error::domain(format!(
            "read_current: v_read must be positive, got {v_read}"
        )));
    }
    Ok(current_of(state.x, v_read, params))
}

#[inline]
pub(crate) fn current_of(x: f64, v_read: f64, params: &DeviceParams) -> f64 {
    (1.0 - x) * params.alpha * (1.0 - (-params.beta * v_read).exp())
        + x * params.gamma * (params.delta * v_read).sinh()
}

/// Map an analog input amplitude `u ∈ [0, 0.5]` linearly onto the write
/// voltage range `[0.8, 1.8] V`.
pub fn scale_analog(u: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&u) {
        return Err(Error::domain(format!(
            "scale_analog: input {u} outside [0, 0.5]"
        )));
    }
    Ok(0.8 + 2.0 * u)
}
