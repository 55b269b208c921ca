use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, Parser, Subcommand};
use pamn_core::config::{
    DEFAULT_BATCH_SIZE, DEFAULT_BETA_MG, DEFAULT_BETA_MU, DEFAULT_EPOCHS, DEFAULT_HOPS_MG, DEFAULT_HOPS_MU,
    DEFAULT_LEARNING_RATE, DEFAULT_MEMORY_DIM, DEFAULT_POOL_SIZE, DEFAULT_POOL_STRIDE, DEFAULT_SEED,
};
use pamn_core::gradcheck::DEFAULT_TOLERANCE;
use pamn_core::{ModelConfig, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "pamn", version, about = "Progressive attention memory network toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic planted-evidence episode file.
    GenData(GenDataArgs),
    /// Train a model and write a checkpoint plus per-epoch metrics.
    Train(TrainArgs),
    /// Report accuracy of a checkpoint, overall and per evidence modality.
    Eval(EvalArgs),
    /// Compare tape gradients with central finite differences on a tiny instance.
    Gradcheck(GradcheckArgs),
    /// Write the attention, fusion and belief trace of one episode.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Run configuration file; its [synth] table is used.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run configuration file; its [train] table is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Validation episodes. When absent, a seeded fraction of --data is held out.
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Fraction of --data held out for validation when --val is absent.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics log path; defaults to the checkpoint path with a .metrics.jsonl suffix.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[command(flatten)]
    pub optim: OptimFlags,
    #[command(flatten)]
    pub model: ModelFlags,
}

#[derive(Debug, Args)]
pub struct OptimFlags {
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    pub batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    /// Stop early once validation accuracy reaches this value.
    #[arg(long)]
    pub target_val_acc: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ModelFlags {
    /// Memory width d.
    #[arg(long, default_value_t = DEFAULT_MEMORY_DIM)]
    pub memory_dim: usize,
    /// Question-stage hops.
    #[arg(long, default_value_t = DEFAULT_HOPS_MU)]
    pub hops_mu: usize,
    /// Answer-stage hops.
    #[arg(long, default_value_t = DEFAULT_HOPS_MG)]
    pub hops_mg: usize,
    #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
    pub pool_size: usize,
    #[arg(long, default_value_t = DEFAULT_POOL_STRIDE)]
    pub pool_stride: usize,
    #[arg(long, default_value_t = DEFAULT_BETA_MU)]
    pub beta_mu: f64,
    #[arg(long, default_value_t = DEFAULT_BETA_MG)]
    pub beta_mg: f64,
    /// Answer attention reads the fresh memory instead of the question-attended one.
    #[arg(long)]
    pub no_pa: bool,
    /// Fuse modalities by their mean.
    #[arg(long)]
    pub no_dmf: bool,
    #[arg(long)]
    pub no_mu_correction: bool,
    #[arg(long)]
    pub no_mg_correction: bool,
    #[arg(long, conflicts_with = "subtitle_only")]
    pub video_only: bool,
    #[arg(long)]
    pub subtitle_only: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Run configuration file; switches, hops and betas of [train.model] are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Seed of the random tiny instance.
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub episode: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn given(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

impl OptimFlags {
    /// Applies the flags the user actually typed on top of `cfg`.
    pub fn apply(&self, m: &ArgMatches, cfg: &mut TrainConfig) {
        if given(m, "epochs") {
            cfg.epochs = self.epochs;
        }
        if given(m, "batch_size") {
            cfg.batch_size = self.batch_size;
        }
        if given(m, "learning_rate") {
            cfg.learning_rate = self.learning_rate;
        }
        if given(m, "seed") {
            cfg.seed = self.seed;
        }
        if given(m, "weight_decay") {
            cfg.weight_decay = self.weight_decay;
        }
        if self.target_val_acc.is_some() {
            cfg.target_val_acc = self.target_val_acc;
        }
    }
}

impl ModelFlags {
    pub fn apply(&self, m: &ArgMatches, cfg: &mut ModelConfig) {
        if given(m, "memory_dim") {
            cfg.memory_dim = self.memory_dim;
        }
        if given(m, "hops_mu") {
            cfg.hops_mu = self.hops_mu;
        }
        if given(m, "hops_mg") {
            cfg.hops_mg = self.hops_mg;
        }
        if given(m, "pool_size") {
            cfg.pool_size = self.pool_size;
        }
        if given(m, "pool_stride") {
            cfg.pool_stride = self.pool_stride;
        }
        if given(m, "beta_mu") {
            cfg.beta_mu = self.beta_mu;
        }
        if given(m, "beta_mg") {
            cfg.beta_mg = self.beta_mg;
        }
        cfg.no_pa |= self.no_pa;
        cfg.no_dmf |= self.no_dmf;
        cfg.no_mu_correction |= self.no_mu_correction;
        cfg.no_mg_correction |= self.no_mg_correction;
        cfg.video_only |= self.video_only;
        cfg.subtitle_only |= self.subtitle_only;
    }
}
