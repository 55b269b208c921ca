use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ArgMatches;
use pamn_core::checkpoint::Checkpoint;
use pamn_core::episode_io::{read_episodes, write_episodes};
use pamn_core::gradcheck::{grad_check, shrink_to_tiny};
use pamn_core::synth::{generate, split, windows_containing, EpisodeRecord};
use pamn_core::train::{evaluate, input_dims, train_with, EpochMetrics};
use pamn_core::{forward, InferenceTrace, Modality};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{EvalArgs, GenDataArgs, GradcheckArgs, InspectArgs, TrainArgs};
use crate::config_file::RunConfigFile;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

fn emit(value: Value) {
    println!("{}", serde_json::to_string_pretty(&value).expect("JSON values serialize"));
}

fn load_data(path: &Path) -> CliResult<Vec<EpisodeRecord>> {
    Ok(read_episodes(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?)
}

pub fn gen_data(args: &GenDataArgs) -> CliResult<()> {
    let mut spec = RunConfigFile::load(args.spec.as_deref())?.synth;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let records = generate(&spec, args.count)?;
    write_episodes(&args.out, &records)?;
    let video = records.iter().filter(|r| r.evidence_modality == Modality::Video).count();
    emit(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "gen-data",
        "count": records.len(),
        "seed": spec.seed,
        "video_evidence_fraction": video as f64 / records.len() as f64,
        "out": args.out,
    }));
    Ok(())
}

#[derive(Serialize)]
struct MetricsLine<'a> {
    schema_version: u32,
    #[serde(flatten)]
    metrics: &'a EpochMetrics,
}

fn metrics_path(args: &TrainArgs) -> PathBuf {
    args.metrics.clone().unwrap_or_else(|| {
        let mut name = args.out.clone().into_os_string();
        name.push(".metrics.jsonl");
        PathBuf::from(name)
    })
}

pub fn train(args: &TrainArgs, matches: &ArgMatches) -> CliResult<()> {
    let mut cfg = RunConfigFile::load(args.config.as_deref())?.train;
    args.optim.apply(matches, &mut cfg);
    args.model.apply(matches, &mut cfg.model);
    cfg.validate()?;

    let data = load_data(&args.data)?;
    let (train_set, val_set) = match &args.val {
        Some(path) => (data, load_data(path)?),
        None => {
            let f = args.val_fraction;
            if !(f > 0.0 && f < 1.0) {
                return Err(CliError::Usage(format!("--val-fraction must lie in (0, 1) (got {f})")));
            }
            let mut parts = split(&data, &[1.0 - f, f], cfg.seed)?;
            let val = parts.pop().expect("two parts");
            (parts.pop().expect("two parts"), val)
        }
    };

    let metrics_path = metrics_path(args);
    let file = File::create(&metrics_path)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", metrics_path.display())))?;
    let mut log = BufWriter::new(file);
    let mut log_err = None;
    let outcome = train_with(&train_set, &val_set, &cfg, |m| {
        let line = MetricsLine {
            schema_version: SCHEMA_VERSION,
            metrics: m,
        };
        let res = serde_json::to_writer(&mut log, &line)
            .map_err(std::io::Error::from)
            .and_then(|_| log.write_all(b"\n"))
            .and_then(|_| log.flush());
        if let Err(e) = res {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(CliError::Data(format!("{}: {e}", metrics_path.display())));
    }

    let ckpt = Checkpoint {
        config: cfg,
        params: outcome.params,
        best_epoch: Some(outcome.best_epoch),
        best_val_acc: Some(outcome.best_val_acc),
    };
    ckpt.save(&args.out)?;
    emit(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "train",
        "train_episodes": train_set.len(),
        "val_episodes": val_set.len(),
        "epochs_run": outcome.metrics.len(),
        "best_epoch": outcome.best_epoch,
        "best_val_acc": outcome.best_val_acc,
        "checkpoint": args.out,
        "metrics": metrics_path,
    }));
    Ok(())
}

fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    Checkpoint::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Rejects data whose widths differ from what the checkpoint was trained on.
fn check_widths(ckpt: &Checkpoint, data: &[EpisodeRecord]) -> CliResult<()> {
    let want = ckpt.params.dims();
    for rec in data {
        let got = input_dims(&rec.features);
        if got != want {
            return Err(CliError::Data(format!(
                "episode {}: widths (question {}, video {}, subtitle {}) do not match checkpoint \
                 (question {}, video {}, subtitle {})",
                rec.features.id, got.question, got.video, got.subtitle, want.question, want.video, want.subtitle
            )));
        }
    }
    Ok(())
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let ckpt = load_checkpoint(&args.ckpt)?;
    let data = load_data(&args.data)?;
    if data.is_empty() {
        return Err(CliError::Data(format!("{}: no episodes", args.data.display())));
    }
    check_widths(&ckpt, &data)?;
    let ev = evaluate(&data, &ckpt.params, &ckpt.config.model)?;
    let breakdown: serde_json::Map<String, Value> = ev
        .by_modality
        .iter()
        .map(|(m, t)| {
            (
                m.name().to_string(),
                json!({ "accuracy": t.accuracy(), "correct": t.correct, "total": t.total }),
            )
        })
        .collect();
    emit(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "eval",
        "accuracy": ev.accuracy,
        "correct": ev.overall.correct,
        "total": ev.overall.total,
        "by_evidence_modality": breakdown,
    }));
    Ok(())
}

pub fn gradcheck(args: &GradcheckArgs) -> CliResult<()> {
    let model = RunConfigFile::load(args.config.as_deref())?.train.model;
    model.validate()?;
    let cfg = shrink_to_tiny(&model);
    let report = grad_check(&cfg, args.tolerance, args.seed)?;
    let worst = report.worst().cloned();
    emit(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "gradcheck",
        "passed": report.passed,
        "tolerance": report.tolerance,
        "worst_path": worst.as_ref().map(|w| w.path.clone()),
        "worst_rel_error": worst.as_ref().map(|w| w.max_rel_error),
        "paths": report.paths,
    }));
    if report.passed {
        Ok(())
    } else {
        let w = worst.expect("a failing report has paths");
        Err(CliError::Verification(format!(
            "gradient check failed: worst path {} has relative error {:e} > {:e}",
            w.path, w.max_rel_error, report.tolerance
        )))
    }
}

#[derive(Serialize)]
struct InspectOutput<'a> {
    schema_version: u32,
    episode: &'a str,
    label: usize,
    predicted: usize,
    probabilities: &'a [f64],
    evidence_slot: usize,
    evidence_modality: Modality,
    /// Memory slots whose pooling window covers the evidence timestep.
    evidence_memory_slots: Vec<usize>,
    #[serde(flatten)]
    trace: &'a InferenceTrace,
}

pub fn inspect(args: &InspectArgs) -> CliResult<()> {
    let ckpt = load_checkpoint(&args.ckpt)?;
    let data = load_data(&args.data)?;
    let rec = data
        .iter()
        .find(|r| r.features.id == args.episode)
        .ok_or_else(|| CliError::Data(format!("episode `{}` not found in {}", args.episode, args.data.display())))?;
    check_widths(&ckpt, std::slice::from_ref(rec))?;
    let model = &ckpt.config.model;
    let p = forward(&rec.features, &ckpt.params, model)?;
    let out = InspectOutput {
        schema_version: SCHEMA_VERSION,
        episode: &rec.features.id,
        label: rec.features.label,
        predicted: p.predicted,
        probabilities: &p.probabilities,
        evidence_slot: rec.evidence_slot,
        evidence_modality: rec.evidence_modality,
        evidence_memory_slots: windows_containing(
            rec.evidence_slot,
            rec.features.seq_len(),
            model.pool_size,
            model.pool_stride,
        ),
        trace: &p.trace,
    };
    let text = serde_json::to_string_pretty(&out).expect("trace serializes");
    std::fs::write(&args.out, text + "\n")
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", args.out.display())))?;
    emit(json!({
        "schema_version": SCHEMA_VERSION,
        "command": "inspect",
        "episode": rec.features.id,
        "label": rec.features.label,
        "predicted": p.predicted,
        "out": args.out,
    }));
    Ok(())
}
