//! Three-step belief correction over the five candidate answers.

use serde::{Deserialize, Serialize};

use crate::encoding::NUM_ANSWERS;
use crate::error::{Error, Result};
use crate::tape::Var;
use crate::tensor::{argmax, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BeliefStep {
    #[serde(rename = "init")]
    Init,
    #[serde(rename = "u")]
    U,
    #[serde(rename = "Mu")]
    Mu,
    #[serde(rename = "Mg")]
    Mg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub step: BeliefStep,
    pub belief: Vec<f64>,
}

/// Final belief and the snapshot taken after every step, starting from the
/// zero vector. Ablated steps record the belief unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub belief: Vec<f64>,
    pub history: Vec<BeliefSnapshot>,
}

impl BeliefState {
    pub fn new() -> Self {
        let zero = vec![0.0; NUM_ANSWERS];
        BeliefState {
            belief: zero.clone(),
            history: vec![BeliefSnapshot {
                step: BeliefStep::Init,
                belief: zero,
            }],
        }
    }

    pub fn record(&mut self, step: BeliefStep, belief: Vec<f64>) {
        self.belief = belief.clone();
        self.history.push(BeliefSnapshot { step, belief });
    }

    /// Predicted answer after each recorded step.
    pub fn path(&self) -> Vec<usize> {
        self.history.iter().map(|s| argmax(&s.belief)).collect()
    }
}

impl Default for BeliefState {
    fn default() -> Self {
        Self::new()
    }
}

fn scores_against<'t>(g: Var<'t>, x: Var<'t>) -> Result<Var<'t>> {
    let width = x.shape()[0];
    g.matmul(x.reshape(&[width, 1])?)?.reshape(&[NUM_ANSWERS])
}

fn check_answers(g: Var<'_>) -> Result<()> {
    let shape = g.shape();
    if shape.len() != 2 || shape[0] != NUM_ANSWERS {
        return Err(Error::invalid_shape("belief", &shape, "expected 5 answer embeddings"));
    }
    Ok(())
}

/// `B ← B + u gᵀ`, then (optionally) unit-normalize.
pub fn u_correction<'t>(belief: Var<'t>, u: Var<'t>, g: Var<'t>, normalize: bool) -> Result<Var<'t>> {
    check_answers(g)?;
    let b = belief.add(scores_against(g, u)?)?;
    Ok(if normalize { b.normalize_last() } else { b })
}

/// `B ← normalize(B + β o_Mu gᵀ)`.
pub fn mu_correction<'t>(belief: Var<'t>, readout: Var<'t>, g: Var<'t>, beta: f64) -> Result<Var<'t>> {
    check_answers(g)?;
    Ok(belief.add(scores_against(g, readout)?.scale(beta))?.normalize_last())
}

/// `B ← normalize(B + β [o_Mg,i · g_i]_i)`.
pub fn mg_correction<'t>(belief: Var<'t>, readouts: Var<'t>, g: Var<'t>, beta: f64) -> Result<Var<'t>> {
    check_answers(g)?;
    if readouts.shape() != g.shape() {
        return Err(Error::shape("mg_correction", &readouts.shape(), &g.shape()));
    }
    let diag = readouts.mul(g)?.sum_axis(1)?;
    Ok(belief.add(diag.scale(beta))?.normalize_last())
}

/// `z = softmax(B)` and the lowest-index maximizer of `z`.
pub fn predict(belief: &Tensor) -> (Tensor, usize) {
    let z = belief.softmax(0).expect("belief is a vector");
    let y = z.argmax();
    (z, y)
}
