//! Browser bindings for the memristor-reservoir simulator.
//!
//! Three interactive views, all running the same device model as the
//! native harness: a single-device pulse-train trace, the 2^L-sequence
//! separability table, and a paint-your-own-grid encoder that runs a
//! whole small reservoir.
//!
//! The `#[wasm_bindgen]` exports are thin shims over plain functions in
//! [`logic`], so everything is unit-testable on the host; build the
//! actual module with the wasm32 target + `wasm-bindgen` CLI (see the
//! workspace README).

use wasm_bindgen::prelude::*;

use memres_core::error::Result as CoreResult;

pub mod logic {
    //! Target-independent demo computations.

    use memres_core::analysis::{bin_occupancy, final_state_sweep};
    use memres_core::device::{step, DeviceParams, MemristorState, NoCycleNoise};
    use memres_core::encoding::{
        binarize, encode, latency, write_count, EncodingConfig, GrayImage,
    };
    use memres_core::error::{Error, Result};
    use memres_core::reservoir::{
        programmed_quantizer_range, quantize_bins, QuantizerConfig, Reservoir, V_WRITE_DEFAULT,
    };
    use memres_core::Dimension;

    pub const MAX_SEQ_LEN: usize = 12;

    fn params_with_tau(tau_ns: f64) -> Result<DeviceParams> {
        if !(tau_ns.is_finite() && tau_ns > 0.0) {
            return Err(Error::domain(format!(
                "tau must be a positive number of ns, got {tau_ns}"
            )));
        }
        let p = DeviceParams::default().with_tau(tau_ns * 1e-9);
        p.validate()?;
        Ok(p)
    }

    /// Internal state before the train, then after every pulse slot.
    /// `pattern` is a string of `0`/`1` characters.
    pub fn pulse_trace(pattern: &str, tau_ns: f64) -> Result<Vec<f64>> {
        let p = params_with_tau(tau_ns)?;
        if pattern.is_empty() || pattern.len() > 64 {
            return Err(Error::domain("pattern must hold 1..=64 pulses"));
        }
        let mut state = MemristorState::fresh(&p);
        let mut trace = Vec::with_capacity(pattern.len() + 1);
        trace.push(state.x);
        for ch in pattern.chars() {
            let v = match ch {
                '1' => V_WRITE_DEFAULT,
                '0' => 0.0,
                other => {
                    return Err(Error::domain(format!(
                        "pattern may only hold 0/1, got {other:?}"
                    )))
                }
            };
            state = step(state, v, &p, &mut NoCycleNoise);
            trace.push(state.x);
        }
        Ok(trace)
    }

    /// Final state of every `2^seq_len` pulse sequence (index = the
    /// sequence read MSB-first).
    pub fn sequence_states(seq_len: usize, tau_ns: f64) -> Result<Vec<f64>> {
        if !(1..=MAX_SEQ_LEN).contains(&seq_len) {
            return Err(Error::domain(format!(
                "sequence length must be 1..={MAX_SEQ_LEN}"
            )));
        }
        let p = params_with_tau(tau_ns)?;
        let table = final_state_sweep(seq_len, &[p.tau], &p)?;
        Ok(table.states.iter().map(|row| row[0]).collect())
    }

    /// How many of the `2^seq_len` sequences land in a bin of their own
    /// after reading the states out through a `bits`-deep quantizer.
    pub fn distinct_sequences(seq_len: usize, tau_ns: f64, bits: u32) -> Result<u32> {
        if !(1..=MAX_SEQ_LEN).contains(&seq_len) {
            return Err(Error::domain(format!(
                "sequence length must be 1..={MAX_SEQ_LEN}"
            )));
        }
        let p = params_with_tau(tau_ns)?;
        let table = final_state_sweep(seq_len, &[p.tau], &p)?;
        let occupancy = bin_occupancy(&table, &p, &[bits])?;
        Ok(occupancy.counts[0][0] as u32)
    }

    /// One encoded-and-executed grid: sizes plus per-device quantizer bins.
    pub struct GridRun {
        pub device_count: usize,
        pub latency: usize,
        pub write_count: usize,
        pub levels: u32,
        pub bins: Vec<u16>,
    }

    /// Encode an on/off pixel grid (row-major, nonzero = on), run a fresh
    /// reservoir over it, and quantize the read currents.
    #[allow(clippy::too_many_arguments)]
    pub fn encode_and_run(
        pixels: &[u8],
        rows: usize,
        cols: usize,
        sections: usize,
        parity: bool,
        two_d: bool,
        tau_ns: f64,
        bits: u32,
    ) -> Result<GridRun> {
        let p = params_with_tau(tau_ns)?;
        let img = GrayImage::new(rows, cols, pixels.to_vec())?;
        let cfg = EncodingConfig {
            dimension: if two_d {
                Dimension::TwoD
            } else {
                Dimension::OneD
            },
            parity,
            sections,
            threshold: 1,
        };
        cfg.validate_for(rows, cols)?;
        let programs = encode(&binarize(&img, cfg.threshold), &cfg)?;

        let mut reservoir = Reservoir::new(p, programs.programs.len())?;
        let currents = reservoir.run(&programs, &mut NoCycleNoise)?;
        let (i_lo, i_hi) = programmed_quantizer_range(
            &p,
            V_WRITE_DEFAULT,
            memres_core::reservoir::V_READ_DEFAULT,
            latency(&cfg, rows, cols).max(1),
        )?;
        let q = QuantizerConfig::new(bits, i_lo, i_hi)?;
        Ok(GridRun {
            device_count: programs.programs.len(),
            latency: latency(&cfg, rows, cols),
            write_count: write_count(&cfg, rows, cols),
            levels: q.levels(),
            bins: quantize_bins(&currents, &q),
        })
    }
}

fn to_js(e: memres_core::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn js<T>(r: CoreResult<T>) -> Result<T, JsValue> {
    r.map_err(to_js)
}

/// Device state before the train and after each `0`/`1` pulse slot.
#[wasm_bindgen]
pub fn pulse_trace(pattern: &str, tau_ns: f64) -> Result<Vec<f64>, JsValue> {
    js(logic::pulse_trace(pattern, tau_ns))
}

/// Final states of all 2^L pulse sequences at one decay constant.
#[wasm_bindgen]
pub fn sequence_states(seq_len: usize, tau_ns: f64) -> Result<Vec<f64>, JsValue> {
    js(logic::sequence_states(seq_len, tau_ns))
}

/// Count of sequences that stay uniquely identifiable after quantization.
#[wasm_bindgen]
pub fn distinct_sequences(seq_len: usize, tau_ns: f64, bits: u32) -> Result<u32, JsValue> {
    js(logic::distinct_sequences(seq_len, tau_ns, bits))
}

/// Result of encoding a pixel grid and running it through a reservoir.
#[wasm_bindgen]
pub struct GridRun(logic::GridRun);

#[wasm_bindgen]
impl GridRun {
    #[wasm_bindgen(getter)]
    pub fn device_count(&self) -> usize {
        self.0.device_count
    }

    #[wasm_bindgen(getter)]
    pub fn latency(&self) -> usize {
        self.0.latency
    }

    #[wasm_bindgen(getter)]
    pub fn write_count(&self) -> usize {
        self.0.write_count
    }

    #[wasm_bindgen(getter)]
    pub fn levels(&self) -> u32 {
        self.0.levels
    }

    #[wasm_bindgen(getter)]
    pub fn bins(&self) -> Vec<u16> {
        self.0.bins.clone()
    }
}

/// Encode an on/off pixel grid, run a reservoir over it, and return the
/// quantized read-out every device produced.
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn encode_and_run(
    pixels: &[u8],
    rows: usize,
    cols: usize,
    sections: usize,
    parity: bool,
    two_d: bool,
    tau_ns: f64,
    bits: u32,
) -> Result<GridRun, JsValue> {
    js(
        logic::encode_and_run(pixels, rows, cols, sections, parity, two_d, tau_ns, bits)
            .map(GridRun),
    )
}

#[cfg(test)]
mod tests {
    use super::logic;

    #[test]
    fn trace_rises_on_ones_and_falls_on_zeros() {
        let t = logic::pulse_trace("1100", 10.0).unwrap();
        assert_eq!(t.len(), 5);
        assert!(t[1] > t[0] && t[2] > t[1]);
        assert!(t[3] < t[2] && t[4] < t[3]);
        assert!(logic::pulse_trace("10x1", 10.0).is_err());
        assert!(logic::pulse_trace("", 10.0).is_err());
        assert!(logic::pulse_trace("11", 0.0).is_err());
    }

    #[test]
    fn sequence_states_order_matters_at_fast_decay() {
        let states = logic::sequence_states(4, 6.0).unwrap();
        assert_eq!(states.len(), 16);
        // 0b0001 (late pulse) must hold more state than 0b1000 (early pulse)
        assert!(states[0b0001] > states[0b1000]);
        // all-off stays at rest, all-on is the maximum
        let max = states.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(states[0b1111], max);
        assert!(states[0b0000] < 0.11);
    }

    #[test]
    fn distinct_counts_match_the_published_shape() {
        // fast decay: perfectly separable at 6 bits, degraded at 3
        assert_eq!(logic::distinct_sequences(4, 6.0, 6).unwrap(), 16);
        assert!(logic::distinct_sequences(4, 6.0, 3).unwrap() < 16);
        // slow decay: states collapse onto popcount groups
        assert!(logic::distinct_sequences(4, 1e6, 8).unwrap() <= 2);
    }

    #[test]
    fn grid_run_reports_consistent_sizes() {
        // 4×6 grid, 2 sections, 2-D with parity: (4+6+3)·2 devices
        let pixels: Vec<u8> = (0..24).map(|i| u8::from(i % 3 == 0)).collect();
        let run = logic::encode_and_run(&pixels, 4, 6, 2, true, true, 10.0, 4).unwrap();
        assert_eq!(run.device_count, 26);
        assert_eq!(run.bins.len(), 26);
        assert_eq!(run.latency, 3, "ceil(6/2) columns dominate");
        assert_eq!(run.levels, 16);
        assert!(run.bins.iter().all(|&b| b < 16));
        // blank grid: every device rests in the lowest bin
        let blank = logic::encode_and_run(&[0u8; 24], 4, 6, 2, true, true, 10.0, 4).unwrap();
        assert!(blank.bins.iter().all(|&b| b == 0));
        // oversized section count is rejected
        assert!(logic::encode_and_run(&pixels, 4, 6, 7, true, true, 10.0, 4).is_err());
    }
}
