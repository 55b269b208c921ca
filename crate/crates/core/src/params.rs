//! The learnable-parameter registry, keyed by stable path names.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::encoding::Modality;
use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Input feature widths of an episode stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDims {
    pub question: usize,
    pub video: usize,
    pub subtitle: usize,
}

impl InputDims {
    pub fn of(&self, modality: Modality) -> usize {
        match modality {
            Modality::Video => self.video,
            Modality::Subtitle => self.subtitle,
        }
    }
}

/// Attention stage a hop belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Question,
    Answers,
}

impl Stage {
    fn tag(self) -> &'static str {
        match self {
            Stage::Question => "u",
            Stage::Answers => "g",
        }
    }
}

pub fn ffn_prefix(cfg: &ModelConfig, modality: Modality) -> String {
    if cfg.tie_ffn {
        "ffn.shared".to_string()
    } else {
        format!("ffn.{}", modality.name())
    }
}

/// Path prefix of the update layer for `hop` (1-based).
pub fn hop_prefix(stage: Stage, modality: Modality, hop: usize) -> String {
    format!("attn.{}.{}.hop{hop}", stage.tag(), modality.name())
}

/// Every registry path with its shape, for the given widths and config.
pub fn expected_shapes(dims: &InputDims, cfg: &ModelConfig) -> Result<BTreeMap<String, Vec<usize>>> {
    cfg.validate()?;
    let d = cfg.memory_dim;
    let h = cfg.hidden_dim();
    let mut shapes = BTreeMap::new();
    shapes.insert("embed.w_ug".to_string(), vec![dims.question, d]);
    shapes.insert("embed.b_ug".to_string(), vec![d]);
    if cfg.tie_ffn && dims.video != dims.subtitle {
        return Err(Error::Config(format!(
            "tie_ffn needs equal video/subtitle widths (got {} and {})",
            dims.video, dims.subtitle
        )));
    }
    for m in Modality::BOTH {
        let p = ffn_prefix(cfg, m);
        shapes.insert(format!("{p}.w1"), vec![dims.of(m), h]);
        shapes.insert(format!("{p}.b1"), vec![h]);
        shapes.insert(format!("{p}.w2"), vec![h, d]);
        shapes.insert(format!("{p}.b2"), vec![d]);
        for (stage, hops) in [(Stage::Question, cfg.hops_mu), (Stage::Answers, cfg.hops_mg)] {
            for k in 1..=hops {
                let p = hop_prefix(stage, m, k);
                shapes.insert(format!("{p}.w"), vec![d, d]);
                shapes.insert(format!("{p}.b"), vec![d]);
            }
        }
    }
    Ok(shapes)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    dims: InputDims,
    entries: BTreeMap<String, Tensor>,
}

impl ModelParams {
    /// Glorot-uniform weights and zero biases, drawn in path order from a
    /// ChaCha8 stream seeded with `seed`.
    pub fn init(dims: InputDims, cfg: &ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = BTreeMap::new();
        for (path, shape) in expected_shapes(&dims, cfg)? {
            let tensor = if shape.len() == 2 {
                let limit = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                let data = (0..shape[0] * shape[1]).map(|_| rng.random_range(-limit..limit)).collect();
                Tensor::new(shape, data)?
            } else {
                Tensor::zeros(&shape)
            };
            entries.insert(path, tensor);
        }
        Ok(ModelParams { dims, entries })
    }

    pub fn from_entries(dims: InputDims, entries: BTreeMap<String, Tensor>) -> Self {
        ModelParams { dims, entries }
    }

    pub fn dims(&self) -> InputDims {
        self.dims
    }

    pub fn get(&self, path: &str) -> Option<&Tensor> {
        self.entries.get(path)
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(path)
    }

    pub fn set(&mut self, path: &str, value: Tensor) -> Result<()> {
        let slot = self.entries.get_mut(path).ok_or_else(|| Error::Param {
            path: path.to_string(),
            reason: "unknown path".into(),
        })?;
        if slot.shape() != value.shape() {
            return Err(Error::Param {
                path: path.to_string(),
                reason: format!("shape {:?} does not match {:?}", value.shape(), slot.shape()),
            });
        }
        *slot = value;
        Ok(())
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(Tensor::numel).sum()
    }

    /// Errors naming the first path whose presence or shape disagrees with `cfg`.
    pub fn check_compatible(&self, cfg: &ModelConfig) -> Result<()> {
        let expected = expected_shapes(&self.dims, cfg)?;
        for (path, shape) in &expected {
            match self.entries.get(path) {
                None => {
                    return Err(Error::Param {
                        path: path.clone(),
                        reason: "missing from registry".into(),
                    })
                }
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(Error::Param {
                        path: path.clone(),
                        reason: format!("shape {:?}, config expects {shape:?}", t.shape()),
                    })
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = self.entries.keys().find(|p| !expected.contains_key(*p)) {
            return Err(Error::Param {
                path: extra.clone(),
                reason: "not used by this config".into(),
            });
        }
        Ok(())
    }

    /// Records every parameter as a leaf on `tape`.
    pub fn on_tape<'t>(&self, tape: &'t Tape) -> ParamVars<'t> {
        ParamVars {
            vars: self.entries.iter().map(|(k, v)| (k.clone(), tape.leaf(v.clone()))).collect(),
        }
    }
}

/// Parameters recorded on a tape.
pub struct ParamVars<'t> {
    vars: BTreeMap<String, Var<'t>>,
}

impl<'t> ParamVars<'t> {
    pub fn get(&self, path: &str) -> Result<Var<'t>> {
        self.vars.get(path).copied().ok_or_else(|| Error::Param {
            path: path.to_string(),
            reason: "missing from registry".into(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var<'t>)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }
}
