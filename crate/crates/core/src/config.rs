//! Model and training configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MEMORY_DIM: usize = 64;
pub const DEFAULT_HOPS_MU: usize = 2;
pub const DEFAULT_HOPS_MG: usize = 2;
pub const DEFAULT_POOL_SIZE: usize = 24;
pub const DEFAULT_POOL_STRIDE: usize = 16;
pub const DEFAULT_BETA_MU: f64 = 1.0;
pub const DEFAULT_BETA_MG: f64 = 0.5;
pub const DEFAULT_LEARNING_RATE: f64 = 0.001;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_EPOCHS: usize = 30;
pub const DEFAULT_SEED: u64 = 2019;

/// Architecture, hyperparameters and ablation switches of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Memory width `d`.
    pub memory_dim: usize,
    /// Hidden width of the memory FFN; `memory_dim` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ffn_hidden: Option<usize>,
    pub hops_mu: usize,
    pub hops_mg: usize,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub beta_mu: f64,
    pub beta_mg: f64,
    /// Both attention stages read the freshly pooled memory.
    pub no_pa: bool,
    /// Fuse modalities by their mean instead of question-conditioned weights.
    pub no_dmf: bool,
    pub no_mu_correction: bool,
    pub no_mg_correction: bool,
    pub video_only: bool,
    pub subtitle_only: bool,
    /// Normalize query and memory rows before the attention and fusion dot products.
    pub cosine_attention: bool,
    /// Read memories out by their temporal mean instead of their sum.
    pub readout_mean: bool,
    /// Share one FFN between the two modalities.
    pub tie_ffn: bool,
    /// L2-normalize the belief after the u-correction as well.
    pub normalize_u_step: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            memory_dim: DEFAULT_MEMORY_DIM,
            ffn_hidden: None,
            hops_mu: DEFAULT_HOPS_MU,
            hops_mg: DEFAULT_HOPS_MG,
            pool_size: DEFAULT_POOL_SIZE,
            pool_stride: DEFAULT_POOL_STRIDE,
            beta_mu: DEFAULT_BETA_MU,
            beta_mg: DEFAULT_BETA_MG,
            no_pa: false,
            no_dmf: false,
            no_mu_correction: false,
            no_mg_correction: false,
            video_only: false,
            subtitle_only: false,
            cosine_attention: false,
            readout_mean: false,
            tie_ffn: false,
            normalize_u_step: true,
        }
    }
}

impl ModelConfig {
    /// A small instance for gradient checks: `d = 6`, pool 3/2 (four slots
    /// over eight timesteps), two hops per stage.
    pub fn tiny() -> Self {
        ModelConfig {
            memory_dim: 6,
            pool_size: 3,
            pool_stride: 2,
            ..ModelConfig::default()
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.ffn_hidden.unwrap_or(self.memory_dim)
    }

    pub fn uses_video(&self) -> bool {
        !self.subtitle_only
    }

    pub fn uses_subtitle(&self) -> bool {
        !self.video_only
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.memory_dim == 0 || self.hidden_dim() == 0 {
            return fail("memory_dim and ffn_hidden must be >= 1".into());
        }
        if self.hops_mu == 0 || self.hops_mg == 0 {
            return fail(format!("hop counts must be >= 1 (got {}/{})", self.hops_mu, self.hops_mg));
        }
        if self.pool_size == 0 || self.pool_stride == 0 {
            return fail(format!(
                "pool size and stride must be >= 1 (got {}/{})",
                self.pool_size, self.pool_stride
            ));
        }
        for (name, beta) in [("beta_mu", self.beta_mu), ("beta_mg", self.beta_mg)] {
            if !beta.is_finite() || beta < 0.0 {
                return fail(format!("{name} must be finite and >= 0 (got {beta})"));
            }
        }
        if self.video_only && self.subtitle_only {
            return fail("video_only and subtitle_only are mutually exclusive".into());
        }
        Ok(())
    }
}

/// The structural ablations, each a single switch on top of the full model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoPa,
    NoDmf,
    NoMuCorrection,
    NoMgCorrection,
    VideoOnly,
    SubtitleOnly,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Full,
        Variant::NoPa,
        Variant::NoDmf,
        Variant::NoMuCorrection,
        Variant::NoMgCorrection,
        Variant::VideoOnly,
        Variant::SubtitleOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoPa => "no_pa",
            Variant::NoDmf => "no_dmf",
            Variant::NoMuCorrection => "no_mu_correction",
            Variant::NoMgCorrection => "no_mg_correction",
            Variant::VideoOnly => "video_only",
            Variant::SubtitleOnly => "subtitle_only",
        }
    }

    pub fn apply(self, cfg: &ModelConfig) -> ModelConfig {
        let mut cfg = cfg.clone();
        match self {
            Variant::Full => {}
            Variant::NoPa => cfg.no_pa = true,
            Variant::NoDmf => cfg.no_dmf = true,
            Variant::NoMuCorrection => cfg.no_mu_correction = true,
            Variant::NoMgCorrection => cfg.no_mg_correction = true,
            Variant::VideoOnly => cfg.video_only = true,
            Variant::SubtitleOnly => cfg.subtitle_only = true,
        }
        cfg
    }
}

/// Optimizer and schedule settings plus the model they train.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds parameter initialization and per-epoch shuffling.
    pub seed: u64,
    pub weight_decay: f64,
    /// Stop once validation accuracy reaches this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_val_acc: Option<f64>,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            epochs: DEFAULT_EPOCHS,
            seed: DEFAULT_SEED,
            weight_decay: 0.0,
            target_val_acc: None,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be > 0 (got {})", self.learning_rate)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be >= 1".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight_decay must be >= 0 (got {})", self.weight_decay)));
        }
        self.model.validate()
    }
}
