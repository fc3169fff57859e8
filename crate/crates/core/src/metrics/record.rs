use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// One (image, prompt, backend, plan) trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    /// Resume key, see [`PredictionRecord::key_for`].
    pub key: String,
    pub image_id: String,
    pub prompt_id: String,
    pub prompt: String,
    pub backend_id: String,
    pub plan_id: String,
    pub raw_text: String,
    /// `None` when the answer could not be parsed into a count.
    pub parsed_count: Option<u64>,
    pub true_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Directory holding attention captures for this trial, relative to the run output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub captures: Option<String>,
}

impl PredictionRecord {
    /// Hex SHA-256 over the NUL-separated identifying fields.
    pub fn key_for(image_id: &str, prompt: &str, backend_id: &str, plan_id: &str) -> String {
        let mut h = Sha256::new();
        for part in [image_id, prompt, backend_id, plan_id] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }

    pub fn is_correct(&self) -> bool {
        self.parsed_count == Some(self.true_count as u64)
    }

    pub fn is_unparsable(&self) -> bool {
        self.parsed_count.is_none()
    }

    #[doc(hidden)]
    pub fn for_test(image_id: &str, parsed_count: Option<u64>, true_count: u32) -> Self {
        Self {
            key: Self::key_for(image_id, "", "test", "baseline"),
            image_id: image_id.to_string(),
            prompt_id: "P1".into(),
            prompt: String::new(),
            backend_id: "test".into(),
            plan_id: "baseline".into(),
            raw_text: String::new(),
            parsed_count,
            true_count,
            error: None,
            captures: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads JSONL records, skipping blank lines.
pub fn read_records_jsonl(reader: impl BufRead) -> Result<Vec<PredictionRecord>, RecordError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| RecordError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_records_jsonl(mut writer: impl Write, records: &[PredictionRecord]) -> Result<(), RecordError> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
