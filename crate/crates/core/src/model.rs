//! The full pipeline: embedding, dual memory, progressive attention,
//! modality fusion and belief correction.

use serde::{Deserialize, Serialize};

use crate::attention::{run_progressive_attention, AttentionTrace};
use crate::belief::{mg_correction, mu_correction, predict, u_correction, BeliefState, BeliefStep};
use crate::config::ModelConfig;
use crate::encoding::{build_dual_memory, embed_qa, EpisodeFeatures, Modality, NUM_ANSWERS};
use crate::error::{Error, Result};
use crate::fusion::{fuse_memory, FusionTrace};
use crate::params::{ffn_prefix, ModelParams, ParamVars};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceTrace {
    pub attention: AttentionTrace,
    pub fusion: FusionTrace,
    pub belief: BeliefState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// `z = softmax(B)`
    pub probabilities: Vec<f64>,
    pub predicted: usize,
    pub trace: InferenceTrace,
}

pub struct ForwardPass<'t> {
    /// Final belief `B`, the logits of the answer distribution.
    pub belief: Var<'t>,
    pub prediction: Prediction,
}

impl<'t> ForwardPass<'t> {
    /// `-log z[label]` on the tape.
    pub fn loss(&self, label: usize) -> Result<Var<'t>> {
        self.belief.cross_entropy(label)
    }
}

fn check_widths(ep: &EpisodeFeatures, vars: &ParamVars<'_>, cfg: &ModelConfig) -> Result<()> {
    ep.validate()?;
    let mismatch = |path: String, want: usize, got: usize, what: &str| Error::Param {
        path,
        reason: format!("expects {what} width {want}, episode {} has {got}", ep.id),
    };
    let wq = vars.get("embed.w_ug")?.shape()[0];
    if wq != ep.question.numel() {
        return Err(mismatch("embed.w_ug".into(), wq, ep.question.numel(), "question"));
    }
    for m in Modality::BOTH {
        let path = format!("{}.w1", ffn_prefix(cfg, m));
        let want = vars.get(&path)?.shape()[0];
        let got = ep.stream(m).shape()[1];
        if want != got {
            return Err(mismatch(path, want, got, m.name()));
        }
    }
    Ok(())
}

/// Runs the model on `ep`, recording every op on `tape`.
pub fn forward_on_tape<'t>(
    tape: &'t Tape,
    ep: &EpisodeFeatures,
    vars: &ParamVars<'t>,
    cfg: &ModelConfig,
) -> Result<ForwardPass<'t>> {
    cfg.validate()?;
    check_widths(ep, vars, cfg)?;

    let (u, g) = embed_qa(
        tape.leaf(ep.question.clone()),
        tape.leaf(ep.answers.clone()),
        vars.get("embed.w_ug")?,
        vars.get("embed.b_ug")?,
    )?;
    let fresh = build_dual_memory(tape, ep, vars, cfg)?;
    let progressive = run_progressive_attention(fresh, u, g, vars, cfg)?;

    let (o_mu, w_mu) = fuse_memory(&progressive.after_question, u, cfg)?;
    let (o_mg, w_mg) = fuse_memory(&progressive.after_answers, u, cfg)?;

    let mut state = BeliefState::new();
    let mut belief = u_correction(tape.leaf(Tensor::zeros(&[NUM_ANSWERS])), u, g, cfg.normalize_u_step)?;
    state.record(BeliefStep::U, belief.data());
    if !cfg.no_mu_correction {
        belief = mu_correction(belief, o_mu, g, cfg.beta_mu)?;
    }
    state.record(BeliefStep::Mu, belief.data());
    if !cfg.no_mg_correction {
        belief = mg_correction(belief, o_mg, g, cfg.beta_mg)?;
    }
    state.record(BeliefStep::Mg, belief.data());

    let (z, predicted) = predict(&belief.value());
    let answer_pairs = w_mg.to_rows();
    let mean = (0..2)
        .map(|k| answer_pairs.iter().map(|p| p[k]).sum::<f64>() / answer_pairs.len() as f64)
        .collect();
    let trace = InferenceTrace {
        attention: progressive.trace,
        fusion: FusionTrace {
            question_stage: w_mu.into_data(),
            answer_stage: answer_pairs,
            answer_stage_mean: mean,
        },
        belief: state,
    };
    Ok(ForwardPass {
        belief,
        prediction: Prediction {
            probabilities: z.into_data(),
            predicted,
            trace,
        },
    })
}

/// Inference without keeping the tape.
pub fn forward(ep: &EpisodeFeatures, params: &ModelParams, cfg: &ModelConfig) -> Result<Prediction> {
    let tape = Tape::new();
    let vars = params.on_tape(&tape);
    Ok(forward_on_tape(&tape, ep, &vars, cfg)?.prediction)
}
