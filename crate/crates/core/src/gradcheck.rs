//! Central finite-difference verification of tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::encoding::{EpisodeFeatures, NUM_ANSWERS};
use crate::error::Result;
use crate::model::forward_on_tape;
use crate::params::{InputDims, ModelParams};
use crate::tape::{Fault, Tape};
use crate::tensor::Tensor;

pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const STEP: f64 = 1e-5;
/// Lower bound on the relative-error denominator, so that coordinates whose
/// true derivative is numerically zero are judged on absolute agreement.
pub const DENOMINATOR_FLOOR: f64 = 1e-6;

pub const TINY_SEQ_LEN: usize = 8;
pub const TINY_DIMS: InputDims = InputDims {
    question: 5,
    video: 4,
    subtitle: 3,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathCheck {
    pub path: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub paths: Vec<PathCheck>,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&PathCheck> {
        self.paths.iter().max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }

    pub fn failing(&self) -> impl Iterator<Item = &PathCheck> {
        self.paths.iter().filter(|p| !p.passed)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR);
    (analytic - numeric).abs() / denom
}

/// A random episode and parameter set for `cfg`, with `T = 8` and small
/// input widths.
pub fn tiny_instance(cfg: &ModelConfig, seed: u64) -> Result<(EpisodeFeatures, ModelParams)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |shape: &[usize]| {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    };
    let ep = EpisodeFeatures::new(
        "gradcheck",
        uniform(&[TINY_SEQ_LEN, TINY_DIMS.video])?,
        uniform(&[TINY_SEQ_LEN, TINY_DIMS.subtitle])?,
        uniform(&[TINY_DIMS.question])?,
        uniform(&[NUM_ANSWERS, TINY_DIMS.question])?,
        (seed % NUM_ANSWERS as u64) as usize,
    )?;
    let params = ModelParams::init(TINY_DIMS, cfg, seed.wrapping_add(1))?;
    Ok((ep, params))
}

fn loss_at(ep: &EpisodeFeatures, params: &ModelParams, cfg: &ModelConfig) -> Result<f64> {
    let tape = Tape::new();
    let vars = params.on_tape(&tape);
    let loss = forward_on_tape(&tape, ep, &vars, cfg)?.loss(ep.label)?;
    Ok(loss.value().item().expect("scalar loss"))
}

/// Compares the tape gradient of the episode loss against central
/// differences for every coordinate of every registry path. `fault`, when
/// set, corrupts the backward pass only.
pub fn grad_check_episode(
    ep: &EpisodeFeatures,
    params: &ModelParams,
    cfg: &ModelConfig,
    tolerance: f64,
    fault: Option<Fault>,
) -> Result<GradCheckReport> {
    let tape = match fault {
        Some(f) => Tape::with_fault(f),
        None => Tape::new(),
    };
    let vars = params.on_tape(&tape);
    let loss = forward_on_tape(&tape, ep, &vars, cfg)?.loss(ep.label)?;
    let grads = tape.backward(loss)?;

    let mut probe = params.clone();
    let mut paths = Vec::with_capacity(params.len());
    for (path, var) in vars.iter() {
        let analytic = grads.wrt(var);
        let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
        for i in 0..analytic.numel() {
            let original = params.get(path).expect("registry path").data()[i];
            probe.get_mut(path).expect("registry path").data_mut()[i] = original + STEP;
            let up = loss_at(ep, &probe, cfg)?;
            probe.get_mut(path).expect("registry path").data_mut()[i] = original - STEP;
            let down = loss_at(ep, &probe, cfg)?;
            probe.get_mut(path).expect("registry path").data_mut()[i] = original;

            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic.data()[i];
            max_rel = max_rel.max(relative_error(a, numeric));
            max_abs = max_abs.max((a - numeric).abs());
        }
        paths.push(PathCheck {
            path: path.to_string(),
            max_rel_error: max_rel,
            max_abs_error: max_abs,
            passed: max_rel <= tolerance,
        });
    }
    let passed = paths.iter().all(|p| p.passed);
    Ok(GradCheckReport {
        tolerance,
        paths,
        passed,
    })
}

/// Gradient check of `cfg` on [`tiny_instance`].
pub fn grad_check(cfg: &ModelConfig, tolerance: f64, seed: u64) -> Result<GradCheckReport> {
    let (ep, params) = tiny_instance(cfg, seed)?;
    grad_check_episode(&ep, &params, cfg, tolerance, None)
}

/// `cfg` with its width and pooling shrunk to the tiny instance (`d = 6`,
/// four slots over eight steps); hops, betas and switches are kept.
pub fn shrink_to_tiny(cfg: &ModelConfig) -> ModelConfig {
    let tiny = ModelConfig::tiny();
    ModelConfig {
        memory_dim: tiny.memory_dim,
        ffn_hidden: None,
        pool_size: tiny.pool_size,
        pool_stride: tiny.pool_stride,
        ..cfg.clone()
    }
}
