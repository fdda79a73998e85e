//! Device-level separability studies and sweep summaries.
//!
//! The central question for a fading-memory device used as a reservoir:
//! after a length-L binary pulse program, how well does the final state
//! distinguish the 2^L possible programs? With a fast decay the device acts
//! as a nonlinear history encoder (distinct programs → distinct states);
//! as τ → ∞ decay vanishes and the device degenerates into a pulse counter
//! (states collapse onto popcount groups).
//!
//! `main_effects` gives a desk-scale factor ranking over sweep records:
//! per-level mean accuracies and the span between the best and worst level.

use serde::{Deserialize, Serialize};

use crate::device::{self, DeviceParams, MemristorState, NoCycleNoise};
use crate::encoding::Dimension;
use crate::error::{Error, Result};
use crate::reservoir::{self, QuantizerConfig};

/// Final states of one device for every length-L binary program, across a
/// τ grid. Row index is the program read as an integer with the **first
/// pulse as most significant bit**: row 0b1010 ran write, rest, write, rest.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityTable {
    pub seq_len: usize,
    /// Decay constants (s), one column per value.
    pub tau_grid: Vec<f64>,
    /// `states[sequence][tau_index]`, each within `[x_min, x_max]`.
    pub states: Vec<Vec<f64>>,
}

/// One pipeline result row; the schema of the experiment CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub dimension: Dimension,
    pub parity: bool,
    pub sections: usize,
    pub bits: u32,
    pub tau_ns: f64,
    pub variability_pct: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub runtime_s: f64,
    pub config_hash: String,
    pub schema_version: u32,
}

/// Drive every length-L program into a fresh device at each τ and record
/// the final state (noise-free, nominal write/read voltages).
pub fn final_state_sweep(
    seq_len: usize,
    tau_grid: &[f64],
    params: &DeviceParams,
) -> Result<SeparabilityTable> {
    if seq_len == 0 || seq_len > 24 {
        return Err(Error::domain(format!(
            "sequence length {seq_len} outside [1, 24]"
        )));
    }
    if tau_grid.is_empty() {
        return Err(Error::domain("final_state_sweep needs a nonempty tau grid"));
    }
    params.validate()?;
    let n_seqs = 1usize << seq_len;
    let mut states = vec![vec![0.0f64; tau_grid.len()]; n_seqs];
    for (t, &tau) in tau_grid.iter().enumerate() {
        let p = params.with_tau(tau);
        p.validate()?;
        for (seq, row) in states.iter_mut().enumerate() {
            let mut s = MemristorState::fresh(&p);
            for slot in 0..seq_len {
                let bit = (seq >> (seq_len - 1 - slot)) & 1 == 1;
                let v = if bit { reservoir::V_WRITE_DEFAULT } else { 0.0 };
                s = device::step(s, v, &p, &mut NoCycleNoise);
            }
            row[t] = s.x;
        }
    }
    Ok(SeparabilityTable {
        seq_len,
        tau_grid: tau_grid.to_vec(),
        states,
    })
}

impl SeparabilityTable {
    /// All final states of one τ column, indexed by sequence.
    pub fn column(&self, tau_index: usize) -> Vec<f64> {
        self.states.iter().map(|row| row[tau_index]).collect()
    }

    /// Max−min state spread within each popcount group (0..=L ones) of one
    /// τ column. As τ grows the device forgets pulse *placement* and these
    /// spreads collapse toward zero while groups stay apart.
    pub fn popcount_spreads(&self, tau_index: usize) -> Vec<f64> {
        let mut lo = vec![f64::INFINITY; self.seq_len + 1];
        let mut hi = vec![f64::NEG_INFINITY; self.seq_len + 1];
        for (seq, row) in self.states.iter().enumerate() {
            let ones = seq.count_ones() as usize;
            lo[ones] = lo[ones].min(row[tau_index]);
            hi[ones] = hi[ones].max(row[tau_index]);
        }
        lo.iter().zip(&hi).map(|(l, h)| h - l).collect()
    }

    /// Smallest gap between popcount-group state intervals of one τ column
    /// (how far apart the "counter levels" sit).
    pub fn popcount_group_gap(&self, tau_index: usize) -> f64 {
        let mut lo = vec![f64::INFINITY; self.seq_len + 1];
        let mut hi = vec![f64::NEG_INFINITY; self.seq_len + 1];
        for (seq, row) in self.states.iter().enumerate() {
            let ones = seq.count_ones() as usize;
            lo[ones] = lo[ones].min(row[tau_index]);
            hi[ones] = hi[ones].max(row[tau_index]);
        }
        (1..=self.seq_len)
            .map(|k| lo[k] - hi[k - 1])
            .fold(f64::INFINITY, f64::min)
    }
}

/// How many of the 2^L programs are *uniquely* separated per (τ, bits):
/// states are read out as currents and quantized over the range reachable
/// by length-L programs; a program counts when its bin holds no other
/// program.
#[derive(Debug, Clone, PartialEq)]
pub struct BinOccupancy {
    pub tau_grid: Vec<f64>,
    pub bits_grid: Vec<u32>,
    /// `counts[tau_index][bits_index]`.
    pub counts: Vec<Vec<usize>>,
}

pub fn bin_occupancy(
    table: &SeparabilityTable,
    params: &DeviceParams,
    bits_grid: &[u32],
) -> Result<BinOccupancy> {
    if bits_grid.is_empty() {
        return Err(Error::domain("bin_occupancy needs a nonempty bits grid"));
    }
    let (v_write, v_read) = (reservoir::V_WRITE_DEFAULT, reservoir::V_READ_DEFAULT);
    let (i_lo, i_hi) =
        reservoir::programmed_quantizer_range(params, v_write, v_read, table.seq_len)?;
    let mut counts = vec![vec![0usize; bits_grid.len()]; table.tau_grid.len()];
    for (t, row) in counts.iter_mut().enumerate() {
        let currents: Vec<f64> = table
            .column(t)
            .iter()
            .map(|&x| device::current_of(x, v_read, params))
            .collect();
        for (b, &bits) in bits_grid.iter().enumerate() {
            let q = QuantizerConfig::new(bits, i_lo, i_hi)?;
            let bins = reservoir::quantize_bins(&currents, &q);
            let mut occupants = vec![0u32; q.levels() as usize];
            for &bin in &bins {
                occupants[bin as usize] += 1;
            }
            row[b] = bins
                .iter()
                .filter(|&&bin| occupants[bin as usize] == 1)
                .count();
        }
    }
    Ok(BinOccupancy {
        tau_grid: table.tau_grid.clone(),
        bits_grid: bits_grid.to_vec(),
        counts,
    })
}

/// Mean accuracy of the records at one level of one factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelMean {
    pub level: String,
    pub mean_accuracy: f64,
    pub count: usize,
}

/// One factor's level means and its best-minus-worst span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorEffect {
    pub factor: &'static str,
    pub levels: Vec<LevelMean>,
    pub span: f64,
}

fn effect_of<F>(records: &[SweepRecord], factor: &'static str, key: F) -> FactorEffect
where
    F: Fn(&SweepRecord) -> (f64, String),
{
    // (sort key, label, accuracy sum, count)
    let mut groups: Vec<(f64, String, f64, usize)> = Vec::new();
    for r in records {
        let (sort_key, label) = key(r);
        match groups.iter_mut().find(|g| g.1 == label) {
            Some(g) => {
                g.2 += r.accuracy;
                g.3 += 1;
            }
            None => groups.push((sort_key, label, r.accuracy, 1)),
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let levels: Vec<LevelMean> = groups
        .into_iter()
        .map(|(_, level, sum, count)| LevelMean {
            level,
            mean_accuracy: sum / count as f64,
            count,
        })
        .collect();
    let span = if levels.len() < 2 {
        0.0
    } else {
        let means: Vec<f64> = levels.iter().map(|l| l.mean_accuracy).collect();
        means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - means.iter().copied().fold(f64::INFINITY, f64::min)
    };
    FactorEffect {
        factor,
        levels,
        span,
    }
}

/// Group records by each experimental factor and rank the factors by the
/// spread between their best and worst level means (largest first).
pub fn main_effects(records: &[SweepRecord]) -> Result<Vec<FactorEffect>> {
    if records.is_empty() {
        return Err(Error::config("main_effects needs at least one record"));
    }
    let mut effects = vec![
        effect_of(records, "dimension", |r| {
            (
                if r.dimension == Dimension::OneD {
                    1.0
                } else {
                    2.0
                },
                r.dimension.to_string(),
            )
        }),
        effect_of(records, "parity", |r| {
            (r.parity as u8 as f64, r.parity.to_string())
        }),
        effect_of(records, "sections", |r| {
            (r.sections as f64, r.sections.to_string())
        }),
        effect_of(records, "bits", |r| (r.bits as f64, r.bits.to_string())),
        effect_of(records, "tau_ns", |r| (r.tau_ns, format!("{}", r.tau_ns))),
        effect_of(records, "variability_pct", |r| {
            (r.variability_pct, format!("{}", r.variability_pct))
        }),
    ];
    effects.sort_by(|a, b| b.span.total_cmp(&a.span));
    Ok(effects)
}
