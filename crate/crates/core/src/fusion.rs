//! Question-conditioned soft weighting of the two memory readouts.

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::encoding::{DualMemory, Modality};
use crate::error::{Error, Result};
use crate::tape::Var;
use crate::tensor::Tensor;

/// Modality weights `(video, subtitle)` at both stages.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FusionTrace {
    pub question_stage: Vec<f64>,
    /// One pair per answer.
    pub answer_stage: Vec<Vec<f64>>,
    /// Mean pair over the five answers.
    pub answer_stage_mean: Vec<f64>,
}

/// Sum (or mean) over the slot axis: `N × d → d`, `5 × N × d → 5 × d`.
pub fn memory_readout(bank: Var<'_>, mean: bool) -> Result<Var<'_>> {
    let shape = bank.shape();
    if !(2..=3).contains(&shape.len()) {
        return Err(Error::invalid_shape("memory_readout", &shape, "expected N × d or 5 × N × d"));
    }
    let axis = shape.len() - 2;
    let total = bank.sum_axis(axis)?;
    Ok(if mean { total.scale(1.0 / shape[axis] as f64) } else { total })
}

/// `softmax(u · o^v, u · o^s)`: a `2`-vector for `d`-wide readouts, or
/// `5 × 2` (one pair per answer) for `5 × d` readouts.
pub fn dmf_weights<'t>(u: Var<'t>, video: Var<'t>, subtitle: Var<'t>, cosine: bool) -> Result<Var<'t>> {
    let shape = video.shape();
    if shape != subtitle.shape() || shape.last() != u.shape().last() {
        return Err(Error::shape("dmf_weights", &shape, &subtitle.shape()));
    }
    let (u, video, subtitle) = if cosine {
        (u.normalize_last(), video.normalize_last(), subtitle.normalize_last())
    } else {
        (u, video, subtitle)
    };
    let tape = u.tape();
    match shape.len() {
        1 => tape.stack(&[u.dot(video)?, u.dot(subtitle)?], 0)?.softmax(0),
        2 => {
            let sv = video.mul(u)?.sum_axis(1)?;
            let ss = subtitle.mul(u)?.sum_axis(1)?;
            tape.stack(&[sv, ss], 1)?.softmax(1)
        }
        _ => Err(Error::invalid_shape("dmf_weights", &shape, "expected d or 5 × d readouts")),
    }
}

/// `o = α^v o^v + α^s o^s`, per answer when the weights are `5 × 2`.
pub fn fuse<'t>(weights: Var<'t>, video: Var<'t>, subtitle: Var<'t>) -> Result<Var<'t>> {
    let wshape = weights.shape();
    let axis = wshape.len() - 1;
    if wshape[axis] != 2 {
        return Err(Error::invalid_shape("fuse", &wshape, "expected weight pairs"));
    }
    let mut wv = weights.select(axis, 0)?;
    let mut ws = weights.select(axis, 1)?;
    if axis == 1 {
        wv = wv.reshape(&[wshape[0], 1])?;
        ws = ws.reshape(&[wshape[0], 1])?;
    }
    wv.mul(video)?.add(ws.mul(subtitle)?)
}

/// Fused readout of one stage plus the weights used, as a `2`-vector or `5 × 2`.
pub fn fuse_memory<'t>(mem: &DualMemory<'t>, u: Var<'t>, cfg: &ModelConfig) -> Result<(Var<'t>, Tensor)> {
    match (mem.video, mem.subtitle) {
        (Some(v), Some(s)) => {
            let ov = memory_readout(v, cfg.readout_mean)?;
            let os = memory_readout(s, cfg.readout_mean)?;
            if cfg.no_dmf {
                let o = ov.add(os)?.scale(0.5);
                Ok((o, fixed_weights(&ov.shape(), [0.5, 0.5])))
            } else {
                let w = dmf_weights(u, ov, os, cfg.cosine_attention)?;
                Ok((fuse(w, ov, os)?, w.value()))
            }
        }
        (Some(bank), None) | (None, Some(bank)) => {
            let only = if mem.video.is_some() { Modality::Video } else { Modality::Subtitle };
            let o = memory_readout(bank, cfg.readout_mean)?;
            let pair = match only {
                Modality::Video => [1.0, 0.0],
                Modality::Subtitle => [0.0, 1.0],
            };
            Ok((o, fixed_weights(&o.shape(), pair)))
        }
        (None, None) => Err(Error::Config("no memory bank in use".into())),
    }
}

fn fixed_weights(readout_shape: &[usize], pair: [f64; 2]) -> Tensor {
    if readout_shape.len() == 1 {
        Tensor::vector(pair.to_vec())
    } else {
        let rows = vec![pair.to_vec(); readout_shape[0]];
        Tensor::from_rows(&rows).expect("non-empty rows")
    }
}
