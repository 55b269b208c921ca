//! Two-stage multi-hop temporal attention over the dual memory.
//!
//! The question stage attends each `N × d` bank with `u` and rewrites it as
//! `(α ⊙ M) W + b`. The answer stage does the same with each of the five
//! answer embeddings, which splits every bank into one `N × d` bank per
//! answer (`5 × N × d`). Later answer hops attend answer `i`'s bank with
//! `g_i` only.

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::encoding::{DualMemory, Modality, NUM_ANSWERS};
use crate::error::{Error, Result};
use crate::params::{hop_prefix, ParamVars, Stage};
use crate::tape::Var;

/// Question-stage weights of one hop, `N` per modality.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionHopTrace {
    pub video: Option<Vec<f64>>,
    pub subtitle: Option<Vec<f64>>,
}

/// Answer-stage weights of one hop, `5 × N` per modality.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnswerHopTrace {
    pub video: Option<Vec<Vec<f64>>>,
    pub subtitle: Option<Vec<Vec<f64>>>,
}

impl AnswerHopTrace {
    pub fn bank(&self, modality: Modality) -> Option<&Vec<Vec<f64>>> {
        match modality {
            Modality::Video => self.video.as_ref(),
            Modality::Subtitle => self.subtitle.as_ref(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    pub question_hops: Vec<QuestionHopTrace>,
    pub answer_hops: Vec<AnswerHopTrace>,
}

fn score_inputs<'t>(mem: Var<'t>, query: Var<'t>, cosine: bool) -> (Var<'t>, Var<'t>) {
    if cosine {
        (mem.normalize_last(), query.normalize_last())
    } else {
        (mem, query)
    }
}

/// One question hop on an `N × d` bank: `α = softmax(u Mᵀ)`,
/// `M ← (α ⊙ M) W + b`. Returns the new bank and `α`.
pub fn attend_by_question<'t>(
    mem: Var<'t>,
    u: Var<'t>,
    w: Var<'t>,
    b: Var<'t>,
    cosine: bool,
) -> Result<(Var<'t>, Var<'t>)> {
    let shape = mem.shape();
    let width = u.shape()[0];
    if shape.len() != 2 || shape[1] != width {
        return Err(Error::shape("attend_by_question", &shape, &u.shape()));
    }
    let slots = shape[0];
    let (m, q) = score_inputs(mem, u, cosine);
    let scores = m.matmul(q.reshape(&[width, 1])?)?.reshape(&[slots])?;
    let alpha = scores.softmax(0)?;
    let weighted = alpha.reshape(&[slots, 1])?.mul(mem)?;
    Ok((weighted.matmul(w)?.add(b)?, alpha))
}

/// One answer hop. `mem` is `N × d` (first hop, shared by all answers) or
/// `5 × N × d` (answer `i` reads its own bank). Returns the `5 × N × d`
/// bank and the `5 × N` weights.
pub fn attend_by_answers<'t>(
    mem: Var<'t>,
    g: Var<'t>,
    w: Var<'t>,
    b: Var<'t>,
    cosine: bool,
) -> Result<(Var<'t>, Var<'t>)> {
    let g_shape = g.shape();
    if g_shape.len() != 2 || g_shape[0] != NUM_ANSWERS {
        return Err(Error::invalid_shape(
            "attend_by_answers",
            &g_shape,
            format!("expected {NUM_ANSWERS} answer embeddings"),
        ));
    }
    let width = g_shape[1];
    let shape = mem.shape();
    let (m, q) = score_inputs(mem, g, cosine);
    let scores = match shape.as_slice() {
        &[_, dd] if dd == width => q.matmul(m.transpose()?)?,
        &[a, slots, dd] if a == NUM_ANSWERS && dd == width => {
            q.reshape(&[NUM_ANSWERS, 1, width])?.mul(m)?.sum_axis(2)?.reshape(&[NUM_ANSWERS, slots])?
        }
        _ => return Err(Error::shape("attend_by_answers", &shape, &g_shape)),
    };
    let slots = shape[shape.len() - 2];
    let alpha = scores.softmax(1)?;
    let weighted = alpha.reshape(&[NUM_ANSWERS, slots, 1])?.mul(mem)?;
    Ok((weighted.matmul(w)?.add(b)?, alpha))
}

fn hop_layer<'t>(vars: &ParamVars<'t>, stage: Stage, m: Modality, hop: usize) -> Result<(Var<'t>, Var<'t>)> {
    let p = hop_prefix(stage, m, hop);
    Ok((vars.get(&format!("{p}.w"))?, vars.get(&format!("{p}.b"))?))
}

pub struct ProgressiveOutput<'t> {
    pub after_question: DualMemory<'t>,
    pub after_answers: DualMemory<'t>,
    pub trace: AttentionTrace,
}

/// `hops_mu` question hops followed by `hops_mg` answer hops. Each hop reads
/// the previous hop's memory; with `no_pa` the answer stage starts from
/// `fresh` instead of the question stage's output.
pub fn run_progressive_attention<'t>(
    fresh: DualMemory<'t>,
    u: Var<'t>,
    g: Var<'t>,
    vars: &ParamVars<'t>,
    cfg: &ModelConfig,
) -> Result<ProgressiveOutput<'t>> {
    if cfg.hops_mu == 0 || cfg.hops_mg == 0 {
        return Err(Error::Config("hop counts must be >= 1".into()));
    }
    let mut trace = AttentionTrace::default();

    let mut mem = fresh;
    for hop in 1..=cfg.hops_mu {
        let mut step = QuestionHopTrace::default();
        mem = mem.try_map(|m, bank| {
            let (w, b) = hop_layer(vars, Stage::Question, m, hop)?;
            let (next, alpha) = attend_by_question(bank, u, w, b, cfg.cosine_attention)?;
            let weights = Some(alpha.data());
            match m {
                Modality::Video => step.video = weights,
                Modality::Subtitle => step.subtitle = weights,
            }
            Ok(next)
        })?;
        trace.question_hops.push(step);
    }
    let after_question = mem;

    let mut mem = if cfg.no_pa { fresh } else { after_question };
    for hop in 1..=cfg.hops_mg {
        let mut step = AnswerHopTrace::default();
        mem = mem.try_map(|m, bank| {
            let (w, b) = hop_layer(vars, Stage::Answers, m, hop)?;
            let (next, alpha) = attend_by_answers(bank, g, w, b, cfg.cosine_attention)?;
            let weights = Some(alpha.value().to_rows());
            match m {
                Modality::Video => step.video = weights,
                Modality::Subtitle => step.subtitle = weights,
            }
            Ok(next)
        })?;
        trace.answer_hops.push(step);
    }

    Ok(ProgressiveOutput {
        after_question,
        after_answers: mem,
        trace,
    })
}
