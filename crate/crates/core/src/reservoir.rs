//! A bank of independent memristors driven by pulse programs.
//!
//! Each device executes its own program — write pulse on `1`, rest on `0`,
//! rest-padded to the common read time — and all devices are read
//! simultaneously at the end. There is no coupling between devices; the
//! reservoir's expressive power comes entirely from each device's nonlinear,
//! fading-memory response to its pulse history.
//!
//! Read currents are digitized by a fixed-range quantizer (the hardware
//! ADC): `bits` resolution over `[i_lo, i_hi]`, rescaled to `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::device::{
    self, apply_decay, apply_write, current_of, decay_fraction, inv_exp_window_max, write_drive,
    CycleNoise, DeviceParams, MemristorState,
};
use crate::encoding::PulseProgramSet;
use crate::error::{Error, Result};
use crate::variability::DeviceFactors;

/// Default write-pulse amplitude (V).
pub const V_WRITE_DEFAULT: f64 = 1.5;
/// Default read-pulse amplitude (V), at the write threshold.
pub const V_READ_DEFAULT: f64 = 0.6;

/// ADC model: `bits` of resolution across the fixed range `[i_lo, i_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    /// Resolution in bits; the studied range is 1–7, up to 16 accepted.
    pub bits: u32,
    /// Current mapped to the lowest bin (A).
    pub i_lo: f64,
    /// Current mapped to the highest bin (A).
    pub i_hi: f64,
}

impl QuantizerConfig {
    pub fn new(bits: u32, i_lo: f64, i_hi: f64) -> Result<Self> {
        let q = QuantizerConfig { bits, i_lo, i_hi };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.bits > 16 {
            return Err(Error::config(format!(
                "quantizer bits must be in [1, 16], got {}",
                self.bits
            )));
        }
        if !(self.i_lo < self.i_hi) || !self.i_lo.is_finite() || !self.i_hi.is_finite() {
            return Err(Error::config(format!(
                "quantizer range must satisfy i_lo < i_hi, got [{:e}, {:e}]",
                self.i_lo, self.i_hi
            )));
        }
        Ok(())
    }

    /// Number of bins, `2^bits`.
    #[inline]
    pub fn levels(&self) -> u32 {
        1u32 << self.bits
    }
}

/// The full-scale current range of an ideal device: `[I(x_min), I(x_max)]`
/// at the given read voltage. For the reference parameters at 0.6 V this is
/// `(5.46856e-6, 5.466229e-5)` A.
pub fn default_quantizer_range(params: &DeviceParams, v_read: f64) -> Result<(f64, f64)> {
    let lo = device::read_current(
        MemristorState {
            x: params.x_min,
            ..MemristorState::fresh(params)
        },
        v_read,
        params,
    )?;
    let hi = device::read_current(
        MemristorState {
            x: params.x_max,
            ..MemristorState::fresh(params)
        },
        v_read,
        params,
    )?;
    Ok((lo, hi))
}

/// The current range actually reachable by length-`max_len` binary programs:
/// `[I(x_min), I(x after max_len consecutive writes)]`.
///
/// Short programs only ever sample the bottom of the device's state range,
/// so an ADC spanning the full device range would waste most of its bins;
/// this range keeps every bin usable. It is the default full-scale range
/// for experiments (the ADC is calibrated once per configuration — the
/// range depends only on parameters and program length, not on data).
pub fn programmed_quantizer_range(
    params: &DeviceParams,
    v_write: f64,
    v_read: f64,
    max_len: usize,
) -> Result<(f64, f64)> {
    if max_len == 0 {
        return Err(Error::config(
            "programmed range needs at least one program slot",
        ));
    }
    let mut state = MemristorState::fresh(params);
    for _ in 0..max_len {
        state = device::write_update(state, v_write, params)?;
    }
    let lo = device::read_current(MemristorState::fresh(params), v_read, params)?;
    let hi = device::read_current(state, v_read, params)?;
    if !(lo < hi) {
        return Err(Error::config(format!(
            "degenerate programmed range [{lo:e}, {hi:e}] — writes at {v_write} V do not move the state"
        )));
    }
    Ok((lo, hi))
}

/// Quantize one current to its bin index.
#[inline]
pub fn quantize_bin(current: f64, q: &QuantizerConfig) -> u16 {
    let top = (q.levels() - 1) as f64;
    let scaled = (current - q.i_lo) / (q.i_hi - q.i_lo) * q.levels() as f64;
    scaled.floor().clamp(0.0, top) as u16
}

/// Quantize currents to rescaled features in `[0, 1]`:
/// `feature = bin / (2^bits − 1)`.
pub fn quantize(currents: &[f64], q: &QuantizerConfig) -> Vec<f64> {
    let top = (q.levels() - 1) as f64;
    currents
        .iter()
        .map(|&i| quantize_bin(i, q) as f64 / top)
        .collect()
}

/// Bin indices for all currents (the compact form features are cached in).
pub fn quantize_bins(currents: &[f64], q: &QuantizerConfig) -> Vec<u16> {
    currents.iter().map(|&i| quantize_bin(i, q)).collect()
}

/// Per-device execution constants, folded once per run.
#[derive(Debug, Clone, Copy)]
struct DeviceKernel {
    x_init: f64,
    /// Δx magnitude of one write pulse before windowing.
    drive: f64,
    /// Fraction of the excursion lost per rest slot.
    rest_fraction: f64,
}

/// A bank of independent devices bound to fixed drive voltages.
#[derive(Debug, Clone)]
pub struct Reservoir {
    params: DeviceParams,
    pub v_write: f64,
    pub v_read: f64,
    kernels: Vec<DeviceKernel>,
    states: Vec<MemristorState>,
    inv_exp_max: f64,
}

impl Reservoir {
    /// A nominal reservoir: every device identical, at rest, unit gains.
    pub fn new(params: DeviceParams, count: usize) -> Result<Self> {
        let nominal = DeviceFactors::nominal(&params);
        Self::with_factors(params, &vec![nominal; count])
    }

    /// A reservoir whose devices carry fixed per-device factors
    /// (initial state, decay constant, update gain, drive-voltage gain).
    pub fn with_factors(params: DeviceParams, factors: &[DeviceFactors]) -> Result<Self> {
        Self::configured(params, V_WRITE_DEFAULT, V_READ_DEFAULT, factors)
    }

    /// Fully specified reservoir: parameters, drive voltages, and factors.
    pub fn configured(
        params: DeviceParams,
        v_write: f64,
        v_read: f64,
        factors: &[DeviceFactors],
    ) -> Result<Self> {
        params.validate()?;
        if v_write <= params.v_th {
            return Err(Error::config(format!(
                "v_write = {v_write} V does not exceed the write threshold {} V",
                params.v_th
            )));
        }
        if v_read <= 0.0 || v_read > params.v_th {
            return Err(Error::config(format!(
                "v_read = {v_read} V outside (0, {}] V",
                params.v_th
            )));
        }
        let mut res = Reservoir {
            params,
            v_write,
            v_read,
            kernels: Vec::new(),
            states: Vec::new(),
            inv_exp_max: inv_exp_window_max(&params),
        };
        res.bind_factors(factors);
        Ok(res)
    }

    /// Replace the per-device factors (e.g. for the next Monte-Carlo run).
    pub fn bind_factors(&mut self, factors: &[DeviceFactors]) {
        self.kernels = factors
            .iter()
            .map(|f| DeviceKernel {
                x_init: f.x_init,
                drive: write_drive(f.update_gain, f.eta_gain, self.v_write, &self.params),
                rest_fraction: decay_fraction(f.update_gain, self.params.t_pulse, f.tau_eff),
            })
            .collect();
        self.states = factors
            .iter()
            .map(|f| MemristorState {
                x: f.x_init,
                tau_eff: f.tau_eff,
                update_gain: f.update_gain,
            })
            .collect();
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn device_count(&self) -> usize {
        self.kernels.len()
    }

    /// Device states after the most recent `run` (for inspection/plots).
    pub fn states(&self) -> &[MemristorState] {
        &self.states
    }

    /// Execute one image's programs and read every device.
    ///
    /// Devices start from their initial states (the reservoir is reset on
    /// entry), step through their programs in device order — write on `1`,
    /// rest on `0`, rest-padded to `programs.max_len` — and are read
    /// simultaneously at the end. The noise source contributes exactly one
    /// factor per device per slot, pads included, in device-major order.
    pub fn run<N: CycleNoise>(
        &mut self,
        programs: &PulseProgramSet,
        noise: &mut N,
    ) -> Result<Vec<f64>> {
        if programs.programs.len() != self.kernels.len() {
            return Err(Error::config(format!(
                "program count {} does not match device count {}",
                programs.programs.len(),
                self.kernels.len()
            )));
        }
        let p = &self.params;
        let mut currents = Vec::with_capacity(self.kernels.len());
        for (kernel, (state, program)) in self
            .kernels
            .iter()
            .zip(self.states.iter_mut().zip(&programs.programs))
        {
            let mut x = kernel.x_init;
            for slot in 0..programs.max_len {
                let factor = noise.next_factor();
                if program.get(slot).copied().unwrap_or(false) {
                    x = apply_write(x, factor * kernel.drive, self.inv_exp_max, p);
                } else {
                    x = apply_decay(x, factor * kernel.rest_fraction, p);
                }
            }
            state.x = x;
            currents.push(current_of(x, self.v_read, p));
        }
        Ok(currents)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{decay_update, step, write_update, NoCycleNoise};

    fn programs(bits: &[&[u8]], max_len: usize) -> PulseProgramSet {
        PulseProgramSet {
            programs: bits
                .iter()
                .map(|p| p.iter().map(|&b| b != 0).collect())
                .collect(),
            max_len,
        }
    }

    #[test]
    fn four_writes_match_composed_device_ops() {
        let params = DeviceParams::default();
        let mut res = Reservoir::new(params, 1).unwrap();
        let out = res
            .run(&programs(&[&[1, 1, 1, 1]], 4), &mut NoCycleNoise)
            .unwrap();

        let mut s = MemristorState::fresh(&params);
        for _ in 0..4 {
            s = write_update(s, V_WRITE_DEFAULT, &params).unwrap();
        }
        assert!((s.x - 0.3939013).abs() < 1e-6);
        let expect = device::read_current(s, V_READ_DEFAULT, &params).unwrap();
        assert_eq!(
            out[0], expect,
            "reservoir path must be bit-identical to composed ops"
        );
    }

    #[test]
    fn mixed_program_matches_step_sequence() {
        let params = DeviceParams::default().with_tau(10e-9);
        let mut res = Reservoir::with_factors(params, &[DeviceFactors::nominal(&params)]).unwrap();
        let out = res
            .run(&programs(&[&[1, 0, 1, 1, 0]], 5), &mut NoCycleNoise)
            .unwrap();

        let mut s = MemristorState::fresh(&params);
        for v in [1.5, 0.0, 1.5, 1.5, 0.0] {
            s = step(s, v, &params, &mut NoCycleNoise);
        }
        assert_eq!(
            out[0],
            device::read_current(s, V_READ_DEFAULT, &params).unwrap()
        );
    }

    #[test]
    fn empty_program_reads_initial_state() {
        let params = DeviceParams::default();
        let mut res = Reservoir::new(params, 2).unwrap();
        let out = res
            .run(&programs(&[&[], &[1, 1]], 2), &mut NoCycleNoise)
            .unwrap();
        let at_rest = device::read_current(MemristorState::fresh(&params), 0.6, &params).unwrap();
        assert_eq!(out[0], at_rest);
        assert!(out[1] > at_rest);
    }

    #[test]
    fn identical_programs_give_identical_currents() {
        let params = DeviceParams::default();
        let mut res = Reservoir::new(params, 3).unwrap();
        let out = res
            .run(
                &programs(&[&[1, 0, 1], &[1, 0, 1], &[1, 1, 1]], 3),
                &mut NoCycleNoise,
            )
            .unwrap();
        assert_eq!(out[0], out[1]);
        assert_ne!(out[0], out[2]);
    }

    #[test]
    fn short_program_equals_explicitly_padded_program() {
        let params = DeviceParams::default();
        let mut res = Reservoir::new(params, 2).unwrap();
        let out = res
            .run(&programs(&[&[1], &[1, 0, 0]], 3), &mut NoCycleNoise)
            .unwrap();
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn runs_are_independent_across_calls() {
        let params = DeviceParams::default();
        let mut res = Reservoir::new(params, 1).unwrap();
        let set = programs(&[&[1, 1, 0, 1]], 4);
        let a = res.run(&set, &mut NoCycleNoise).unwrap();
        let b = res.run(&set, &mut NoCycleNoise).unwrap();
        assert_eq!(a, b, "reservoir must reset between images");
    }

    #[test]
    fn program_count_mismatch_is_an_error() {
        let params = DeviceParams::default();
        let mut res = Reservoir::new(params, 2).unwrap();
        assert!(res.run(&programs(&[&[1]], 1), &mut NoCycleNoise).is_err());
    }

    #[test]
    fn extra_write_never_decreases_current() {
        // replace the first rest slot with a write → strictly more state
        let params = DeviceParams::default();
        let mut res = Reservoir::new(params, 2).unwrap();
        let out = res
            .run(&programs(&[&[1, 1, 0], &[1, 1, 1]], 3), &mut NoCycleNoise)
            .unwrap();
        assert!(out[1] > out[0]);
    }

    #[test]
    fn default_range_spans_the_device() {
        let (lo, hi) = default_quantizer_range(&DeviceParams::default(), 0.6).unwrap();
        assert!((lo - 5.46856e-6).abs() < 1e-10);
        assert!((hi - 5.466229e-5).abs() < 1e-10);
    }

    #[test]
    fn programmed_range_tops_out_at_the_reachable_state() {
        let params = DeviceParams::default();
        let (lo, hi) = programmed_quantizer_range(&params, 1.5, 0.6, 4).unwrap();
        let dev_range = default_quantizer_range(&params, 0.6).unwrap();
        assert_eq!(lo, dev_range.0);
        let mut s = MemristorState::fresh(&params);
        for _ in 0..4 {
            s = write_update(s, 1.5, &params).unwrap();
        }
        assert_eq!(hi, device::read_current(s, 0.6, &params).unwrap());
        assert!(hi < dev_range.1, "4 pulses cannot reach full scale");
        assert!(programmed_quantizer_range(&params, 1.5, 0.6, 0).is_err());
    }

    #[test]
    fn quantizer_bin_and_rescale_rules() {
        let q = QuantizerConfig::new(2, 0.0, 1.0).unwrap();
        assert_eq!(quantize(&[0.0], &q), vec![0.0]);
        assert_eq!(quantize(&[1.0], &q), vec![1.0]);
        // 30% of range → bin 1 of 4 → 1/3
        assert_eq!(quantize(&[0.3], &q), vec![1.0 / 3.0]);
        // out-of-range clamps to edge bins
        assert_eq!(quantize(&[-5.0, 7.0], &q), vec![0.0, 1.0]);
        // bin form and feature form agree
        let q6 = QuantizerConfig::new(6, 0.0, 1.0).unwrap();
        let xs = [0.0, 0.013, 0.5, 0.99, 1.0];
        let bins = quantize_bins(&xs, &q6);
        let feats = quantize(&xs, &q6);
        for (b, f) in bins.iter().zip(feats) {
            assert_eq!(f, *b as f64 / 63.0);
        }
    }

    #[test]
    fn quantizer_validation() {
        assert!(QuantizerConfig::new(0, 0.0, 1.0).is_err());
        assert!(QuantizerConfig::new(17, 0.0, 1.0).is_err());
        assert!(QuantizerConfig::new(4, 1.0, 1.0).is_err());
        assert!(QuantizerConfig::new(4, 2.0, 1.0).is_err());
        assert!(QuantizerConfig::new(7, 0.0, 1.0).is_ok());
    }

    #[test]
    fn decay_pad_matches_decay_update_composition() {
        let params = DeviceParams::default();
        let mut res = Reservoir::new(params, 1).unwrap();
        let out = res
            .run(&programs(&[&[1, 0, 0]], 3), &mut NoCycleNoise)
            .unwrap();
        let mut s = write_update(MemristorState::fresh(&params), 1.5, &params).unwrap();
        s = decay_update(s, params.t_pulse, &params);
        s = decay_update(s, params.t_pulse, &params);
        assert_eq!(out[0], device::read_current(s, 0.6, &params).unwrap());
    }
}
