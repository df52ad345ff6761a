//! The four harness commands and their shared plumbing.

pub mod calibrate;
pub mod replicate;
pub mod simulate;
pub mod sweep;

use std::path::{Path, PathBuf};

use spotcheck::detgen::{ModelConfig, SequenceRole, TokenSequence};

use crate::record::RunRecord;
use crate::CliError;

/// Resolved global options every command receives.
#[derive(Debug, Clone)]
pub struct CommandCtx {
    pub out_dir: PathBuf,
    pub master_seed: u64,
    pub format: OutputFormat,
    pub svg: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Shortest round-trip float formatting; stable across runs and platforms.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_output(out_dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", out_dir.display())))?;
    let path = out_dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Serializes a run record, validates it back through the schema gate,
/// then writes it. A record the parser would reject must never ship.
pub fn write_record(out_dir: &Path, name: &str, record: &RunRecord) -> Result<PathBuf, CliError> {
    let json = record.to_json_pretty();
    RunRecord::from_json(&json)
        .map_err(|e| CliError::usage(format!("internal: record failed validation: {e}")))?;
    write_output(out_dir, name, &json)
}

/// The fixed prompt used by generated claims: a short token list reduced
/// into the model's vocabulary. Keeping it constant makes every run
/// reproducible from the seeds alone.
pub fn default_prompt(vocab_size: u32) -> TokenSequence {
    let ids: Vec<u32> = [3u32, 1, 4, 1, 5, 9, 2, 6]
        .iter()
        .map(|&v| v % vocab_size)
        .collect();
    TokenSequence::from_ids(SequenceRole::Prompt, &ids)
}

/// Defaults for the reference model: a prime vocabulary keeps the hash
/// chain's token feedback from collapsing (see the generator docs).
pub const MODEL_DEFAULTS: (&str, u64, u32, u32) = ("ref", 42, 9973, 4096);
/// Defaults for the adversary's cheaper model.
pub const ALT_MODEL_DEFAULTS: (&str, u64, u32, u32) = ("cheap", 7, 9973, 4096);

pub fn alt_for(model: &ModelConfig, alt: &ModelConfig) -> Result<(), CliError> {
    if alt.vocab_size() != model.vocab_size() {
        return Err(CliError::usage(format!(
            "alt model vocab_size {} must match model vocab_size {}",
            alt.vocab_size(),
            model.vocab_size()
        )));
    }
    Ok(())
}
