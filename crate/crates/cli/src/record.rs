//! Run records: one JSON document per run.
//!
//! Everything except `timestamp_unix_s` is a pure function of the resolved
//! configuration and master seed, so two runs with the same inputs differ
//! only in that one designated header field. `schema_version` gates
//! parsing: readers must reject versions they do not know.

use serde::{Deserialize, Serialize};
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("unsupported record schema_version {found:?}, expected {expected:?}")]
    SchemaVersion { found: String, expected: String },
    #[error("record is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: String,
    pub tool_version: String,
    pub command: String,
    /// Wall-clock stamp; the only field excluded from byte comparisons.
    pub timestamp_unix_s: u64,
    pub master_seed: u64,
    /// Echo of the fully resolved configuration the run used.
    pub config: serde_json::Value,
    pub results: serde_json::Value,
}

impl RunRecord {
    pub fn new(
        command: &str,
        master_seed: u64,
        config: serde_json::Value,
        results: serde_json::Value,
    ) -> Self {
        let timestamp_unix_s = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            timestamp_unix_s,
            master_seed,
            config,
            results,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        let mut json = serde_json::to_string_pretty(self).expect("record serializes");
        json.push('\n');
        json
    }

    /// Parses a record, rejecting unknown schema versions.
    pub fn from_json(raw: &str) -> Result<Self, RecordError> {
        let record: RunRecord = serde_json::from_str(raw)?;
        if record.schema_version != SCHEMA_VERSION {
            return Err(RecordError::SchemaVersion {
                found: record.schema_version,
                expected: SCHEMA_VERSION.to_string(),
            });
        }
        Ok(record)
    }
}
