//! Cross-entropy objective, Adagrad, the training loop and evaluation.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, TrainConfig};
use crate::encoding::{EpisodeFeatures, Modality, NUM_ANSWERS};
use crate::error::{Error, Result};
use crate::model::{forward, forward_on_tape};
use crate::params::{InputDims, ModelParams};
use crate::synth::EpisodeRecord;
use crate::tape::Tape;
use crate::tensor::Tensor;

pub const ADAGRAD_EPSILON: f64 = 1e-8;

/// `-ln z[label]` for a probability vector `z`.
pub fn nll_loss(z: &[f64], label: usize) -> Result<f64> {
    let p = z
        .get(label)
        .ok_or_else(|| Error::InvalidArgument(format!("label {label} out of range for {} answers", z.len())))?;
    Ok(-p.ln())
}

/// Mean of `nll_loss` over a batch of `(z, label)` pairs.
pub fn batch_nll_loss(batch: &[(Vec<f64>, usize)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut total = 0.0;
    for (z, label) in batch {
        total += nll_loss(z, *label)?;
    }
    Ok(total / batch.len() as f64)
}

/// Per-coordinate Adagrad with a persistent squared-gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Adagrad {
    pub learning_rate: f64,
    pub epsilon: f64,
    accum: BTreeMap<String, Vec<f64>>,
}

impl Adagrad {
    pub fn new(params: &ModelParams, learning_rate: f64) -> Self {
        Adagrad {
            learning_rate,
            epsilon: ADAGRAD_EPSILON,
            accum: params.iter().map(|(p, t)| (p.to_string(), vec![0.0; t.numel()])).collect(),
        }
    }

    pub fn accumulator(&self, path: &str) -> Option<&[f64]> {
        self.accum.get(path).map(Vec::as_slice)
    }

    /// `G += g²; p -= lr · g / (√G + ε)`. Every registry path must have a
    /// gradient of matching shape and vice versa.
    pub fn step(&mut self, params: &mut ModelParams, grads: &BTreeMap<String, Tensor>) -> Result<()> {
        if grads.len() != params.len() {
            let missing = params
                .paths()
                .find(|p| !grads.contains_key(*p))
                .or_else(|| grads.keys().map(String::as_str).find(|g| params.get(g).is_none()))
                .unwrap_or("?")
                .to_string();
            return Err(Error::Param {
                path: missing,
                reason: "gradient registry does not match parameter registry".into(),
            });
        }
        for (path, p) in params.iter_mut() {
            let g = grads.get(path).ok_or_else(|| Error::Param {
                path: path.to_string(),
                reason: "no gradient supplied".into(),
            })?;
            let acc = self.accum.get_mut(path).ok_or_else(|| Error::Param {
                path: path.to_string(),
                reason: "no optimizer state".into(),
            })?;
            if g.shape() != p.shape() || acc.len() != p.numel() {
                return Err(Error::Param {
                    path: path.to_string(),
                    reason: format!("gradient shape {:?} vs parameter {:?}", g.shape(), p.shape()),
                });
            }
            for ((w, &gi), a) in p.data_mut().iter_mut().zip(g.data()).zip(acc.iter_mut()) {
                *a += gi * gi;
                *w -= self.learning_rate * gi / (a.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Loss and parameter gradients of one episode.
pub fn episode_gradients(
    ep: &EpisodeFeatures,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<(f64, BTreeMap<String, Tensor>)> {
    let tape = Tape::new();
    let vars = params.on_tape(&tape);
    let pass = forward_on_tape(&tape, ep, &vars, cfg)?;
    let loss = pass.loss(ep.label)?;
    let grads = tape.backward(loss)?;
    let by_path = vars.iter().map(|(p, v)| (p.to_string(), grads.wrt(v))).collect();
    Ok((loss.value().item().expect("scalar loss"), by_path))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    /// Seconds since training started.
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the highest validation accuracy.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub metrics: Vec<EpochMetrics>,
}

pub fn input_dims(ep: &EpisodeFeatures) -> InputDims {
    InputDims {
        question: ep.question.numel(),
        video: ep.video.shape()[1],
        subtitle: ep.subtitle.shape()[1],
    }
}

/// Mini-batch Adagrad on `train`, keeping the best checkpoint on `val`.
/// `on_epoch` observes each metrics record as it is produced.
pub fn train_with(
    train: &[EpisodeRecord],
    val: &[EpisodeRecord],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    if val.is_empty() {
        return Err(Error::InvalidArgument("validation split is empty".into()));
    }
    let mut params = ModelParams::init(input_dims(&train[0].features), &cfg.model, cfg.seed)?;
    let mut opt = Adagrad::new(&params, cfg.learning_rate);
    let start = Instant::now();

    let mut best = None::<(usize, f64, ModelParams)>;
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut sum: BTreeMap<String, Tensor> = BTreeMap::new();
            for &i in batch {
                let (loss, grads) = episode_gradients(&train[i].features, &params, &cfg.model)?;
                loss_sum += loss;
                for (path, g) in grads {
                    match sum.get_mut(&path) {
                        Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b),
                        None => {
                            sum.insert(path, g);
                        }
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for (path, g) in sum.iter_mut() {
                let p = params.get(path).expect("gradient paths come from the registry");
                for (gi, &w) in g.data_mut().iter_mut().zip(p.data()) {
                    *gi = *gi * inv + cfg.weight_decay * w;
                }
            }
            opt.step(&mut params, &sum)?;
        }

        let val_acc = evaluate(val, &params, &cfg.model)?.accuracy;
        let record = EpochMetrics {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_acc,
            wall_time: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        metrics.push(record);
        if best.as_ref().is_none_or(|(_, acc, _)| val_acc > *acc) {
            best = Some((epoch, val_acc, params.clone()));
        }
        if cfg.target_val_acc.is_some_and(|t| val_acc >= t) {
            break;
        }
    }
    let (best_epoch, best_val_acc, params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params,
        best_epoch,
        best_val_acc,
        metrics,
    })
}

pub fn train(train: &[EpisodeRecord], val: &[EpisodeRecord], cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(train, val, cfg, |_| {})
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub overall: Tally,
    /// Keyed by evidence modality.
    pub by_modality: BTreeMap<Modality, Tally>,
    pub predictions: Vec<usize>,
}

/// Accuracy over `records`, in record order.
pub fn evaluate(records: &[EpisodeRecord], params: &ModelParams, cfg: &ModelConfig) -> Result<Evaluation> {
    params.check_compatible(cfg)?;
    let mut overall = Tally::default();
    let mut by_modality: BTreeMap<Modality, Tally> = Modality::BOTH.iter().map(|&m| (m, Tally::default())).collect();
    let mut predictions = Vec::with_capacity(records.len());
    for rec in records {
        let p = forward(&rec.features, params, cfg)?;
        let hit = usize::from(p.predicted == rec.features.label);
        overall.correct += hit;
        overall.total += 1;
        let t = by_modality.get_mut(&rec.evidence_modality).expect("both modalities present");
        t.correct += hit;
        t.total += 1;
        predictions.push(p.predicted);
    }
    Ok(Evaluation {
        accuracy: overall.accuracy(),
        overall,
        by_modality,
        predictions,
    })
}

/// Chance accuracy of a uniform guesser.
pub const CHANCE: f64 = 1.0 / NUM_ANSWERS as f64;
