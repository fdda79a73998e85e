//! The only trained component: a logistic-regression readout.
//!
//! Training minimizes the sum of per-class binary cross-entropies against
//! one-hot targets with per-sample (batch size 1) SGD; inference applies
//! softmax over the logits and takes the argmax. The sigmoid-vs-softmax
//! asymmetry between training and inference is deliberate and preserved.
//!
//! Quantized feature vectors are mostly zeros (background pixels land in
//! bin 0), so the trainer runs on a compressed sparse row matrix; zero
//! features neither contribute to logits nor receive weight updates, which
//! makes the sparse path exactly equal to the dense one.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tags};

/// SGD hyper-parameters. Defaults are the reference recipe
/// (500 epochs, learning rate 0.02, reshuffled every epoch).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 0.02,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config(format!(
                "learning_rate must be strictly positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Dense readout weights, row-major: `w[feature * n_classes + class]`.
/// Keeping one feature's class weights contiguous makes the inner
/// class loop a short contiguous sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutWeights {
    pub n_features: usize,
    pub n_classes: usize,
    pub w: Vec<f64>,
}

impl ReadoutWeights {
    #[inline]
    pub fn row(&self, feature: usize) -> &[f64] {
        &self.w[feature * self.n_classes..(feature + 1) * self.n_classes]
    }
}

/// Random initial weights, i.i.d. uniform on `[−0.01, 0.01]`.
pub fn init_weights(n_features: usize, n_classes: usize, seed: u64) -> ReadoutWeights {
    let mut rng = rng::stream(seed, &[tags::WEIGHT_INIT]);
    let w = (0..n_features * n_classes)
        .map(|_| rng.gen_range(-0.01..=0.01))
        .collect();
    ReadoutWeights {
        n_features,
        n_classes,
        w,
    }
}

/// Feature batch in compressed sparse row form; `values[j]` belongs to
/// feature column `indices[j]`, rows delimited by `indptr`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFeatures {
    pub n_features: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseFeatures {
    pub fn n_samples(&self) -> usize {
        self.indptr.len() - 1
    }

    #[inline]
    pub fn row(&self, sample: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[sample], self.indptr[sample + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    /// Compress dense rows, dropping exact zeros.
    pub fn from_dense(rows: &[Vec<f64>], n_features: usize) -> Result<Self> {
        let mut m = SparseFeatures {
            n_features,
            indptr: Vec::with_capacity(rows.len() + 1),
            indices: Vec::new(),
            values: Vec::new(),
        };
        m.indptr.push(0);
        for row in rows {
            if row.len() != n_features {
                return Err(Error::config(format!(
                    "feature vector length {} does not match feature count {n_features}",
                    row.len()
                )));
            }
            for (i, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    m.indices.push(i as u32);
                    m.values.push(v);
                }
            }
            m.indptr.push(m.indices.len());
        }
        Ok(m)
    }

    /// Compress selected rows of a flat row-major bin matrix;
    /// `value = bin / (2^bits − 1)`, bin 0 drops.
    pub fn from_flat_bins(
        bins: &[u16],
        n_features: usize,
        bits: u32,
        rows: &[usize],
    ) -> Result<Self> {
        if n_features == 0 || !bins.len().is_multiple_of(n_features) {
            return Err(Error::config(format!(
                "{} bins do not tile into rows of {n_features}",
                bins.len()
            )));
        }
        let n_rows = bins.len() / n_features;
        let top = ((1u32 << bits) - 1) as f64;
        let mut m = SparseFeatures {
            n_features,
            indptr: Vec::with_capacity(rows.len() + 1),
            indices: Vec::new(),
            values: Vec::new(),
        };
        m.indptr.push(0);
        for &r in rows {
            if r >= n_rows {
                return Err(Error::config(format!(
                    "row {r} outside the {n_rows} available"
                )));
            }
            let row = &bins[r * n_features..(r + 1) * n_features];
            for (i, &b) in row.iter().enumerate() {
                if b != 0 {
                    m.indices.push(i as u32);
                    m.values.push(b as f64 / top);
                }
            }
            m.indptr.push(m.indices.len());
        }
        Ok(m)
    }

    /// Compress quantizer bin rows; `value = bin / (2^bits − 1)`, bin 0 drops.
    pub fn from_bins(rows: &[Vec<u16>], n_features: usize, bits: u32) -> Result<Self> {
        let top = ((1u32 << bits) - 1) as f64;
        let mut m = SparseFeatures {
            n_features,
            indptr: Vec::with_capacity(rows.len() + 1),
            indices: Vec::new(),
            values: Vec::new(),
        };
        m.indptr.push(0);
        for row in rows {
            if row.len() != n_features {
                return Err(Error::config(format!(
                    "bin vector length {} does not match feature count {n_features}",
                    row.len()
                )));
            }
            for (i, &b) in row.iter().enumerate() {
                if b != 0 {
                    m.indices.push(i as u32);
                    m.values.push(b as f64 / top);
                }
            }
            m.indptr.push(m.indices.len());
        }
        Ok(m)
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax (max-shifted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Stable per-class binary cross-entropy from the logit:
/// `max(z,0) − z·y + ln(1 + e^(−|z|))`.
#[inline]
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

fn logits_into(w: &ReadoutWeights, cols: &[u32], vals: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (&c, &v) in cols.iter().zip(vals) {
        for (z, &wi) in out.iter_mut().zip(w.row(c as usize)) {
            *z += v * wi;
        }
    }
}

fn check_training_inputs(
    features: &SparseFeatures,
    labels: &[u8],
    w: &ReadoutWeights,
) -> Result<()> {
    if features.n_samples() == 0 {
        return Err(Error::config("training batch is empty"));
    }
    if labels.len() != features.n_samples() {
        return Err(Error::config(format!(
            "{} labels for {} samples",
            labels.len(),
            features.n_samples()
        )));
    }
    if features.n_features != w.n_features {
        return Err(Error::config(format!(
            "feature count {} does not match weight rows {}",
            features.n_features, w.n_features
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= w.n_classes) {
        return Err(Error::config(format!(
            "label {bad} outside the {} configured classes",
            w.n_classes
        )));
    }
    Ok(())
}

/// The objective SGD descends: per-class binary cross-entropy summed over
/// classes and samples. Exposed so gradient behaviour can be checked from
/// the outside against finite differences.
pub fn batch_loss(w: &ReadoutWeights, features: &SparseFeatures, labels: &[u8]) -> Result<f64> {
    check_training_inputs(features, labels, w)?;
    let mut logits = vec![0.0f64; w.n_classes];
    let mut total = 0.0;
    for (s, &label) in labels.iter().enumerate() {
        let (cols, vals) = features.row(s);
        logits_into(w, cols, vals, &mut logits);
        for (c, &z) in logits.iter().enumerate() {
            total += bce_from_logit(z, (c == label as usize) as u8 as f64);
        }
    }
    Ok(total)
}

/// Per-sample SGD on summed per-class binary cross-entropy.
///
/// Each visited sample updates `w[i][c] −= lr · f_i · (sigmoid(z_c) − y_c)`;
/// visit order reshuffles every epoch from the config seed. Returns the
/// trained weights (the input is not mutated).
pub fn train(
    features: &SparseFeatures,
    labels: &[u8],
    w0: &ReadoutWeights,
    cfg: &TrainConfig,
) -> Result<ReadoutWeights> {
    Ok(train_tracked(features, labels, w0, cfg, false)?.0)
}

/// [`train`], optionally recording the mean training loss of each epoch
/// (measured on the pre-update predictions while the epoch runs).
pub fn train_tracked(
    features: &SparseFeatures,
    labels: &[u8],
    w0: &ReadoutWeights,
    cfg: &TrainConfig,
    track_loss: bool,
) -> Result<(ReadoutWeights, Vec<f64>)> {
    cfg.validate()?;
    check_training_inputs(features, labels, w0)?;
    let mut w = w0.clone();
    let n = features.n_samples();
    let n_classes = w.n_classes;
    let lr = cfg.learning_rate;
    let mut order: Vec<usize> = (0..n).collect();
    let mut logits = vec![0.0f64; n_classes];
    let mut epoch_losses = Vec::new();
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            let mut rng = rng::stream(cfg.seed, &[tags::EPOCH_SHUFFLE, epoch as u64]);
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for &s in &order {
            let (cols, vals) = features.row(s);
            logits_into(&w, cols, vals, &mut logits);
            let label = labels[s] as usize;
            if track_loss {
                for (c, &z) in logits.iter().enumerate() {
                    loss_sum += bce_from_logit(z, (c == label) as u8 as f64);
                }
            }
            // overwrite logits with lr·(p − y): the per-class error signal
            for (c, z) in logits.iter_mut().enumerate() {
                let y = (c == label) as u8 as f64;
                *z = lr * (sigmoid(*z) - y);
            }
            for (&c, &v) in cols.iter().zip(vals) {
                let row = &mut w.w[c as usize * n_classes..(c as usize + 1) * n_classes];
                for (wi, &g) in row.iter_mut().zip(logits.iter()) {
                    *wi -= v * g;
                }
            }
        }
        if track_loss {
            epoch_losses.push(loss_sum / n as f64);
        }
    }
    Ok((w, epoch_losses))
}

/// Most probable class under softmax; ties resolve to the lowest index.
/// (Softmax is rank-preserving, so the argmax is taken over the logits.)
pub fn predict(w: &ReadoutWeights, cols: &[u32], vals: &[f64]) -> u8 {
    let mut logits = vec![0.0f64; w.n_classes];
    logits_into(w, cols, vals, &mut logits);
    argmax(&logits)
}

/// Softmax class probabilities for one sample.
pub fn class_probabilities(w: &ReadoutWeights, cols: &[u32], vals: &[f64]) -> Vec<f64> {
    let mut logits = vec![0.0f64; w.n_classes];
    logits_into(w, cols, vals, &mut logits);
    softmax(&logits)
}

fn argmax(xs: &[f64]) -> u8 {
    let mut best = 0usize;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best as u8
}

/// Predicted class for every sample.
pub fn predict_batch(w: &ReadoutWeights, features: &SparseFeatures) -> Result<Vec<u8>> {
    if features.n_features != w.n_features {
        return Err(Error::config(format!(
            "feature count {} does not match weight rows {}",
            features.n_features, w.n_features
        )));
    }
    Ok((0..features.n_samples())
        .map(|s| {
            let (cols, vals) = features.row(s);
            predict(w, cols, vals)
        })
        .collect())
}

/// Fraction of correctly classified samples.
pub fn evaluate(w: &ReadoutWeights, features: &SparseFeatures, labels: &[u8]) -> Result<f64> {
    if labels.len() != features.n_samples() || labels.is_empty() {
        return Err(Error::config(format!(
            "{} labels for {} samples (empty evaluation is undefined)",
            labels.len(),
            features.n_samples()
        )));
    }
    let predictions = predict_batch(w, features)?;
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Per-class confusion counts: `counts[actual][predicted]`.
pub fn confusion(
    w: &ReadoutWeights,
    features: &SparseFeatures,
    labels: &[u8],
) -> Result<Vec<Vec<u32>>> {
    let predictions = predict_batch(w, features)?;
    let mut counts = vec![vec![0u32; w.n_classes]; w.n_classes];
    for (p, &l) in predictions.iter().zip(labels) {
        counts[l as usize][*p as usize] += 1;
    }
    Ok(counts)
}

/// Total training loss of one sample under weights `w` (for gradient tests).
#[cfg(test)]
fn sample_loss(w: &ReadoutWeights, cols: &[u32], vals: &[f64], label: usize) -> f64 {
    let mut logits = vec![0.0f64; w.n_classes];
    logits_into(w, cols, vals, &mut logits);
    logits
        .iter()
        .enumerate()
        .map(|(c, &z)| bce_from_logit(z, (c == label) as u8 as f64))
        .sum()
}
