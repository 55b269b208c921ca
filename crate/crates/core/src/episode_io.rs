//! Line-delimited JSON episode files, one record per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoding::{EpisodeFeatures, Modality};
use crate::error::{Error, Result};
use crate::synth::EpisodeRecord;
use crate::tensor::Tensor;

pub const EPISODE_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    schema_version: u32,
    id: String,
    #[serde(rename = "T")]
    seq_len: usize,
    video: Vec<Vec<f64>>,
    subtitle: Vec<Vec<f64>>,
    question: Vec<f64>,
    answers: Vec<Vec<f64>>,
    label: usize,
    evidence_slot: usize,
    evidence_modality: Modality,
}

impl Line {
    fn from_record(rec: &EpisodeRecord) -> Self {
        let f = &rec.features;
        Line {
            schema_version: EPISODE_SCHEMA_VERSION,
            id: f.id.clone(),
            seq_len: f.seq_len(),
            video: f.video.to_rows(),
            subtitle: f.subtitle.to_rows(),
            question: f.question.data().to_vec(),
            answers: f.answers.to_rows(),
            label: f.label,
            evidence_slot: rec.evidence_slot,
            evidence_modality: rec.evidence_modality,
        }
    }

    fn into_record(self) -> std::result::Result<EpisodeRecord, String> {
        if self.schema_version != EPISODE_SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {}", self.schema_version));
        }
        for (name, rows) in [("video", &self.video), ("subtitle", &self.subtitle)] {
            if rows.len() != self.seq_len {
                return Err(format!("{name} has {} rows but T = {}", rows.len(), self.seq_len));
            }
        }
        if self.evidence_slot >= self.seq_len {
            return Err(format!("evidence_slot {} must be < T = {}", self.evidence_slot, self.seq_len));
        }
        let matrix = |name: &str, rows: &[Vec<f64>]| {
            Tensor::from_rows(rows).map_err(|e| format!("{name}: {e}"))
        };
        let features = EpisodeFeatures::new(
            self.id,
            matrix("video", &self.video)?,
            matrix("subtitle", &self.subtitle)?,
            Tensor::new(vec![self.question.len()], self.question).map_err(|e| format!("question: {e}"))?,
            matrix("answers", &self.answers)?,
            self.label,
        )
        .map_err(|e| e.to_string())?;
        Ok(EpisodeRecord {
            features,
            evidence_slot: self.evidence_slot,
            evidence_modality: self.evidence_modality,
        })
    }
}

pub fn write_episodes_to(mut out: impl Write, records: &[EpisodeRecord]) -> std::io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut out, &Line::from_record(rec))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Parses every non-blank line; errors carry the 1-based line number.
pub fn read_episodes_from(input: impl Read) -> Result<Vec<EpisodeRecord>> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| Error::Format {
            line: line_no,
            reason: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&text).map_err(|e| Error::Format {
            line: line_no,
            reason: e.to_string(),
        })?;
        records.push(parsed.into_record().map_err(|reason| Error::Format { line: line_no, reason })?);
    }
    Ok(records)
}

pub fn write_episodes(path: impl AsRef<Path>, records: &[EpisodeRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_episodes_to(BufWriter::new(file), records).map_err(|e| Error::io(path, e))
}

pub fn read_episodes(path: impl AsRef<Path>) -> Result<Vec<EpisodeRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_episodes_from(file)
}
