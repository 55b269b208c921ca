//! Question/answer embedding, the per-modality memory FFN, pooled dual
//! memory, and the position-encoding sentence featurizer.

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::params::{ffn_prefix, ParamVars};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const NUM_ANSWERS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Video,
    Subtitle,
}

impl Modality {
    pub const BOTH: [Modality; 2] = [Modality::Video, Modality::Subtitle];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Video => "video",
            Modality::Subtitle => "subtitle",
        }
    }

    pub fn other(self) -> Modality {
        match self {
            Modality::Video => Modality::Subtitle,
            Modality::Subtitle => Modality::Video,
        }
    }
}

/// One multiple-choice instance with temporally aligned streams.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeFeatures {
    pub id: String,
    /// `T × D_v`
    pub video: Tensor,
    /// `T × D_s`
    pub subtitle: Tensor,
    /// `D_q`
    pub question: Tensor,
    /// `5 × D_q`
    pub answers: Tensor,
    pub label: usize,
}

impl EpisodeFeatures {
    pub fn new(
        id: impl Into<String>,
        video: Tensor,
        subtitle: Tensor,
        question: Tensor,
        answers: Tensor,
        label: usize,
    ) -> Result<Self> {
        let ep = EpisodeFeatures {
            id: id.into(),
            video,
            subtitle,
            question,
            answers,
            label,
        };
        ep.validate()?;
        Ok(ep)
    }

    pub fn seq_len(&self) -> usize {
        self.video.shape()[0]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidArgument(format!("episode {}: {what}", self.id)));
        if self.video.rank() != 2 || self.subtitle.rank() != 2 {
            return bad("streams must be T × D matrices".into());
        }
        if self.video.shape()[0] != self.subtitle.shape()[0] {
            return bad(format!(
                "video has {} steps, subtitle {}",
                self.video.shape()[0],
                self.subtitle.shape()[0]
            ));
        }
        if self.question.rank() != 1 {
            return bad(format!("question shape {:?}", self.question.shape()));
        }
        if self.answers.shape() != [NUM_ANSWERS, self.question.numel()] {
            return bad(format!(
                "answers shape {:?}, expected [{NUM_ANSWERS}, {}]",
                self.answers.shape(),
                self.question.numel()
            ));
        }
        if self.label >= NUM_ANSWERS {
            return bad(format!("label {} out of range", self.label));
        }
        Ok(())
    }

    pub fn stream(&self, modality: Modality) -> &Tensor {
        match modality {
            Modality::Video => &self.video,
            Modality::Subtitle => &self.subtitle,
        }
    }
}

/// Position weight `l[k, j] = (1 - j/J) - (k/D)(1 - 2j/J)` with 1-based
/// word index `j` and coordinate `k`.
pub fn position_weight(k: usize, j: usize, dim: usize, words: usize) -> f64 {
    let (k, j, d, n) = (k as f64, j as f64, dim as f64, words as f64);
    (1.0 - j / n) - (k / d) * (1.0 - 2.0 * j / n)
}

/// Order-aware sentence feature `Σ_j l_j ⊙ w_j` over a `J × D` matrix of
/// word vectors.
pub fn position_encode(words: &Tensor) -> Result<Tensor> {
    if words.rank() != 2 {
        return Err(Error::invalid_shape("position_encode", words.shape(), "expected J × D word vectors"));
    }
    let (count, dim) = (words.shape()[0], words.shape()[1]);
    let mut out = vec![0.0; dim];
    for (j, word) in words.rows().enumerate() {
        for (k, (o, &w)) in out.iter_mut().zip(word).enumerate() {
            *o += position_weight(k + 1, j + 1, dim, count) * w;
        }
    }
    Ok(Tensor::vector(out))
}

/// `u = q W_ug + b_ug`, `g_i = a_i W_ug + b_ug` with one shared layer.
pub fn embed_qa<'t>(question: Var<'t>, answers: Var<'t>, w: Var<'t>, b: Var<'t>) -> Result<(Var<'t>, Var<'t>)> {
    let width = question.shape()[0];
    let u = question.reshape(&[1, width])?.matmul(w)?;
    let u = u.reshape(&[u.shape()[1]])?.add(b)?;
    let g = answers.matmul(w)?.add(b)?;
    Ok((u, g))
}

/// `ReLU(x W1 + b1) W2 + b2`, row by row.
pub fn ffn<'t>(x: Var<'t>, w1: Var<'t>, b1: Var<'t>, w2: Var<'t>, b2: Var<'t>) -> Result<Var<'t>> {
    x.matmul(w1)?.add(b1)?.relu().matmul(w2)?.add(b2)
}

/// The video and subtitle memory banks. A bank is `N × d` before answer
/// attention and `5 × N × d` after. Single-modality ablations leave one
/// side empty.
#[derive(Clone, Copy, Debug)]
pub struct DualMemory<'t> {
    pub video: Option<Var<'t>>,
    pub subtitle: Option<Var<'t>>,
}

impl<'t> DualMemory<'t> {
    pub fn bank(&self, modality: Modality) -> Option<Var<'t>> {
        match modality {
            Modality::Video => self.video,
            Modality::Subtitle => self.subtitle,
        }
    }

    pub fn banks(&self) -> impl Iterator<Item = (Modality, Var<'t>)> + '_ {
        Modality::BOTH.into_iter().filter_map(|m| self.bank(m).map(|v| (m, v)))
    }

    /// Applies `f` to each present bank.
    pub fn try_map(&self, mut f: impl FnMut(Modality, Var<'t>) -> Result<Var<'t>>) -> Result<DualMemory<'t>> {
        Ok(DualMemory {
            video: self.video.map(|v| f(Modality::Video, v)).transpose()?,
            subtitle: self.subtitle.map(|v| f(Modality::Subtitle, v)).transpose()?,
        })
    }

    /// Slot count `N` (the temporal axis of any bank).
    pub fn slots(&self) -> usize {
        let (_, bank) = self.banks().next().expect("at least one bank");
        let shape = bank.shape();
        shape[shape.len() - 2]
    }
}

/// `M^m = AvgPool(FFN_m(stream_m); pool_size, pool_stride)` per used modality.
pub fn build_dual_memory<'t>(
    tape: &'t Tape,
    ep: &EpisodeFeatures,
    vars: &ParamVars<'t>,
    cfg: &ModelConfig,
) -> Result<DualMemory<'t>> {
    if ep.seq_len() == 0 {
        return Err(Error::InvalidArgument("episode has no timesteps".into()));
    }
    let bank = |m: Modality| -> Result<Var<'t>> {
        let p = ffn_prefix(cfg, m);
        let x = tape.leaf(ep.stream(m).clone());
        let h = ffn(
            x,
            vars.get(&format!("{p}.w1"))?,
            vars.get(&format!("{p}.b1"))?,
            vars.get(&format!("{p}.w2"))?,
            vars.get(&format!("{p}.b2"))?,
        )?;
        h.avg_pool_1d(cfg.pool_size, cfg.pool_stride)
    };
    Ok(DualMemory {
        video: cfg.uses_video().then(|| bank(Modality::Video)).transpose()?,
        subtitle: cfg.uses_subtitle().then(|| bank(Modality::Subtitle)).transpose()?,
    })
}
