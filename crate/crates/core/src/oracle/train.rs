use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::rng_for;
use crate::tensor::Matrix;

use super::metrics::wta;
use super::network::{InputScaling, OracleModel, Prediction};

/// Probabilities are clamped into `[EPS, 1 - EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

/// Samples per gradient chunk; chunks are reduced in a fixed order so the
/// result does not depend on the thread count.
const CHUNK: usize = 8;

/// One training example: a permutation's feature rows and its label.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub x: Matrix,
    pub y: f64,
}

/// `KL((y, 1 - y) || probs)` and its gradient with respect to the logits.
pub fn kl_divergence(pred: &Prediction, y: f64) -> (f64, [f64; 2]) {
    let target = [y, 1.0 - y];
    let mut loss = 0.0;
    let mut dp = [0.0; 2];
    for c in 0..2 {
        let p = pred.probs[c];
        let clamped = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        if target[c] > 0.0 {
            loss += target[c] * (target[c].max(PROB_EPS).ln() - clamped.ln());
            if clamped == p {
                dp[c] = -target[c] / p;
            }
        }
    }
    // Softmax Jacobian: dz_j = p_j (dp_j - sum_c p_c dp_c).
    let dot = pred.probs[0] * dp[0] + pred.probs[1] * dp[1];
    let dz = [pred.probs[0] * (dp[0] - dot), pred.probs[1] * (dp[1] - dot)];
    (loss, dz)
}

/// Mean KL divergence over a batch of predictions.
pub fn kl_loss(preds: &[Prediction], labels: &[f64]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::ShapeMismatch { expected: preds.len().to_string(), found: labels.len().to_string() });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput("kl_loss batch"));
    }
    Ok(preds.iter().zip(labels).map(|(p, &y)| kl_divergence(p, y).0).sum::<f64>() / preds.len() as f64)
}

/// Mean loss and its gradient over `batch`. With `dropout = Some((seed,
/// path))`, sample `k` draws its masks from `(seed, path ++ [k])`.
pub fn loss_and_gradient(model: &OracleModel, batch: &[&Example], dropout: Option<(u64, &[u64])>) -> (f64, Vec<f64>) {
    let n = model.n_params();
    let partial: Vec<(f64, Vec<f64>)> = batch
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut grad = vec![0.0; n];
            let mut loss = 0.0;
            for (k, ex) in chunk.iter().enumerate() {
                let tape = match dropout {
                    Some((seed, path)) => {
                        let mut key = path.to_vec();
                        key.push((c * CHUNK + k) as u64);
                        model.run(&ex.x, Some(&mut rng_for(seed, &key)))
                    }
                    None => model.run(&ex.x, None::<&mut rand_chacha::ChaCha8Rng>),
                };
                let (l, dz) = kl_divergence(tape.prediction.as_ref().expect("forward sets the prediction"), ex.y);
                loss += l;
                model.backward(&tape, dz, &mut grad);
            }
            (loss, grad)
        })
        .collect();
    let mut grad = vec![0.0; n];
    let mut loss = 0.0;
    for (l, g) in partial {
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let inv = 1.0 / batch.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    (loss * inv, grad)
}

/// Evaluation-mode predictions, in input order.
pub fn predict_all(model: &OracleModel, examples: &[Example]) -> Result<Vec<Prediction>> {
    examples.par_iter().map(|e| model.forward(&e.x)).collect()
}

/// Evaluation-mode mean loss.
pub fn mean_loss(model: &OracleModel, examples: &[Example]) -> Result<f64> {
    let preds = predict_all(model, examples)?;
    let labels: Vec<f64> = examples.iter().map(|e| e.y).collect();
    kl_loss(&preds, &labels)
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { beta1, beta2, eps, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Rescales `grad` to norm `max_norm` if it is longer. Returns the norm
/// before clipping.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub epochs: usize,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub schedule: Vec<Phase>,
    pub seed: u64,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

const FULL_SCHEDULE: [(usize, f64); 4] = [(40, 0.005), (30, 0.002), (20, 0.001), (10, 0.0005)];

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            schedule: FULL_SCHEDULE.iter().map(|&(epochs, lr)| Phase { epochs, lr }).collect(),
            seed: 0,
            clip_norm: Some(5.0),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    /// The default four-phase schedule shrunk to `total` epochs, keeping the
    /// learning rates and the phase proportions (largest remainder, ties to
    /// the earlier phase).
    pub fn scaled(total: usize) -> Self {
        let base = Self::default();
        let full: usize = base.schedule.iter().map(|p| p.epochs).sum();
        let quotas: Vec<f64> = base.schedule.iter().map(|p| p.epochs as f64 * total as f64 / full as f64).collect();
        let mut epochs: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
        let missing = total - epochs.iter().sum::<usize>();
        for &k in order.iter().take(missing) {
            epochs[k] += 1;
        }
        let schedule = base.schedule.iter().zip(epochs).map(|(p, epochs)| Phase { epochs, lr: p.lr }).collect();
        Self { schedule, ..base }
    }

    pub fn total_epochs(&self) -> usize {
        self.schedule.iter().map(|p| p.epochs).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if self.schedule.iter().any(|p| !(p.lr > 0.0)) {
            return Err(Error::InvalidConfig("learning rates must be positive".into()));
        }
        Ok(())
    }

    /// Learning rate for the zero-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let mut e = epoch;
        for p in &self.schedule {
            if e < p.epochs {
                return p.lr;
            }
            e -= p.epochs;
        }
        self.schedule.last().map_or(0.0, |p| p.lr)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean training-mode loss over the epoch's batches.
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub test_wta_05: Option<f64>,
    pub test_wta_07: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("epoch,lr,train_loss,test_loss,test_wta_05,test_wta_07\n");
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        for r in &self.epochs {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch,
                r.lr,
                r.train_loss,
                opt(r.test_loss),
                opt(r.test_wta_05),
                opt(r.test_wta_07)
            )
            .unwrap();
        }
        out
    }
}

/// Mini-batch Adam over the configured schedule. The model's input scaling is
/// first refitted on `train_set`. Batches are reshuffled each epoch;
/// everything is a function of `cfg.seed`.
pub fn train(model: &mut OracleModel, train_set: &[Example], test_set: &[Example], cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    model.set_scaling(InputScaling::fit(model.config().features, train_set.iter().map(|e| &e.x))?)?;
    let mut adam = Adam::new(model.n_params(), cfg.beta1, cfg.beta2, cfg.eps);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History::default();
    for epoch in 0..cfg.total_epochs() {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng_for(cfg.seed, &[0, epoch as u64]));
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Example> = idx.iter().map(|&i| &train_set[i]).collect();
            let path = [1, epoch as u64, b as u64];
            let (loss, mut grad) = loss_and_gradient(model, &batch, Some((cfg.seed, &path)));
            if let Some(max) = cfg.clip_norm {
                clip_global_norm(&mut grad, max);
            }
            adam.step(model.params_mut(), &grad, lr);
            total += loss * batch.len() as f64;
        }
        let mut record = EpochRecord {
            epoch: epoch + 1,
            lr,
            train_loss: total / train_set.len() as f64,
            test_loss: None,
            test_wta_05: None,
            test_wta_07: None,
        };
        if !test_set.is_empty() {
            let preds = predict_all(model, test_set)?;
            let y_hat: Vec<f64> = preds.iter().map(Prediction::y_hat).collect();
            let labels: Vec<f64> = test_set.iter().map(|e| e.y).collect();
            record.test_loss = Some(kl_loss(&preds, &labels)?);
            record.test_wta_05 = Some(wta(&y_hat, &labels, 0.05)?);
            record.test_wta_07 = Some(wta(&y_hat, &labels, 0.07)?);
        }
        log::info!(
            "epoch {} lr {} train loss {:.5} test wta(.05) {:?}",
            record.epoch,
            lr,
            record.train_loss,
            record.test_wta_05
        );
        history.epochs.push(record);
    }
    Ok(history)
}
