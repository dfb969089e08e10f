//! Hashed n-gram logistic baseline.
//!
//! One logistic head per intent over shared hashed features. The training
//! objective on a batch of `B` samples is
//!
//! ```text
//! (1/B) * sum_i sum_k BCE(sigmoid(w_k . x_i + b_k), y_ik) + (l2/2) * sum_k |w_k|^2
//! ```
//!
//! with the biases left unregularized.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::features::{FeatureHasher, SparseFeatures};
use crate::filter::IntentScorer;
use crate::intent::{Labels, Scores};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: SparseFeatures,
    pub labels: Labels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub hasher: FeatureHasher,
    pub separator: String,
    /// `weights[k]` has one entry per hash bucket.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(z)` against `y`, computed from the logit.
pub fn bce_with_logit(z: f64, y: bool) -> f64 {
    let softplus = z.max(0.0) + libm::log1p(libm::exp(-z.abs()));
    if y {
        softplus - z
    } else {
        softplus
    }
}

/// Gradient of the batch objective. Data terms are sparse; the L2 term is
/// `l2 * w` on every weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub l2: f64,
    pub bias: Vec<f64>,
    /// Per intent: sorted `(bucket, data gradient)` pairs.
    pub data: Vec<Vec<(u32, f64)>>,
}

impl Gradient {
    /// Full partial derivative for weight `bucket` of intent `k`.
    pub fn weight(&self, model: &BaselineModel, k: usize, bucket: usize) -> f64 {
        let data = match self.data[k].binary_search_by_key(&(bucket as u32), |(i, _)| *i) {
            Ok(pos) => self.data[k][pos].1,
            Err(_) => 0.0,
        };
        data + self.l2 * model.weights[k][bucket]
    }
}

impl BaselineModel {
    pub fn zeros(intents: usize, hasher: FeatureHasher, separator: impl Into<String>) -> Self {
        Self {
            hasher,
            separator: separator.into(),
            weights: vec![vec![0.0; hasher.buckets]; intents],
            bias: vec![0.0; intents],
        }
    }

    pub fn intent_count(&self) -> usize {
        self.bias.len()
    }

    pub fn featurize(&self, text: &str) -> SparseFeatures {
        self.hasher.features(text, &self.separator)
    }

    pub fn logits(&self, x: &SparseFeatures) -> Vec<f64> {
        self.weights.iter().zip(&self.bias).map(|(w, b)| b + x.iter().map(|(i, v)| w[i] * v).sum::<f64>()).collect()
    }

    pub fn predict_features(&self, x: &SparseFeatures) -> Scores {
        Scores::new(self.logits(x).into_iter().map(sigmoid).collect())
    }

    pub fn predict(&self, text: &str) -> Scores {
        self.predict_features(&self.featurize(text))
    }

    /// Mean summed BCE over `batch`, without the L2 term.
    pub fn data_loss(&self, batch: &[Sample]) -> f64 {
        if batch.is_empty() {
            return 0.0;
        }
        let total: f64 = batch
            .iter()
            .map(|s| {
                self.logits(&s.features).iter().enumerate().map(|(k, &z)| bce_with_logit(z, s.labels[k])).sum::<f64>()
            })
            .sum();
        total / batch.len() as f64
    }

    /// `sum_k |w_k|^2` with compensated summation.
    pub fn weight_norm_sq(&self) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for w in self.weights.iter().flatten() {
            let term = w * w;
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }

    pub fn objective(&self, batch: &[Sample], l2: f64) -> f64 {
        self.data_loss(batch) + 0.5 * l2 * self.weight_norm_sq()
    }

    pub fn gradient(&self, batch: &[Sample], l2: f64) -> Gradient {
        let k_count = self.intent_count();
        let mut bias = vec![0.0; k_count];
        let mut data: Vec<Vec<(u32, f64)>> = vec![Vec::new(); k_count];
        let scale = if batch.is_empty() { 0.0 } else { 1.0 / batch.len() as f64 };
        for s in batch {
            for (k, z) in self.logits(&s.features).into_iter().enumerate() {
                let err = (sigmoid(z) - if s.labels[k] { 1.0 } else { 0.0 }) * scale;
                bias[k] += err;
                data[k].extend(s.features.indices.iter().zip(&s.features.values).map(|(&i, &v)| (i, err * v)));
            }
        }
        for entries in &mut data {
            entries.sort_unstable_by_key(|(i, _)| *i);
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
            for &(i, g) in entries.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == i => last.1 += g,
                    _ => merged.push((i, g)),
                }
            }
            *entries = merged;
        }
        Gradient { l2, bias, data }
    }

    /// One gradient-descent step: `w <- w - lr * (g_data + l2 * w)`.
    pub fn apply(&mut self, grad: &Gradient, lr: f64) {
        if lr == 0.0 {
            return;
        }
        let decay = 1.0 - lr * grad.l2;
        for (k, w) in self.weights.iter_mut().enumerate() {
            if decay != 1.0 {
                w.iter_mut().for_each(|x| *x *= decay);
            }
            for &(i, g) in &grad.data[k] {
                w[i as usize] -= lr * g;
            }
            self.bias[k] -= lr * grad.bias[k];
        }
    }
}

impl IntentScorer for BaselineModel {
    fn intent_count(&self) -> usize {
        BaselineModel::intent_count(self)
    }

    fn score(&self, text: &str) -> Result<Scores> {
        Ok(self.predict(text))
    }
}

/// Relative errors below this absolute gradient magnitude are measured
/// against the floor instead, so near-zero partials do not divide by ~0.
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-6;

/// Compares analytic partial derivatives against central finite differences
/// of [`BaselineModel::objective`] and returns the largest relative error.
///
/// Checked coordinates: every bias, every weight touched by the batch, and up
/// to 16 untouched weights per intent (those only see the L2 term).
pub fn gradient_check(model: &BaselineModel, batch: &[Sample], l2: f64) -> f64 {
    const STEP: f64 = 1e-5;
    let grad = model.gradient(batch, l2);
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut compare = |analytic: f64, numeric: f64| {
        let denom = analytic.abs().max(numeric.abs()).max(GRADIENT_CHECK_FLOOR);
        worst = worst.max((analytic - numeric).abs() / denom);
    };

    for k in 0..model.intent_count() {
        let original = probe.bias[k];
        probe.bias[k] = original + STEP;
        let up = probe.objective(batch, l2);
        probe.bias[k] = original - STEP;
        let down = probe.objective(batch, l2);
        probe.bias[k] = original;
        compare(grad.bias[k], (up - down) / (2.0 * STEP));

        let mut coords: Vec<usize> = grad.data[k].iter().map(|(i, _)| *i as usize).collect();
        let stride = (model.hasher.buckets / 16).max(1);
        coords.extend((0..model.hasher.buckets).step_by(stride).take(16));
        coords.sort_unstable();
        coords.dedup();
        for j in coords {
            let original = probe.weights[k][j];
            probe.weights[k][j] = original + STEP;
            let up = probe.objective(batch, l2);
            probe.weights[k][j] = original - STEP;
            let down = probe.objective(batch, l2);
            probe.weights[k][j] = original;
            compare(grad.weight(model, k, j), (up - down) / (2.0 * STEP));
        }
    }
    worst
}
