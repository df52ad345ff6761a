//! Layered configuration: built-in defaults, then the optional config
//! file, then command-line flags. Flags win over file values.

use serde::{Deserialize, Serialize};
use spotcheck::detgen::ModelConfig;
use std::path::Path;

use crate::CliError;

/// Whole config file; every section and field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub model: Option<ModelSection>,
    pub alt_model: Option<ModelSection>,
    pub replicate: Option<ReplicateSection>,
    pub grid: Option<GridSection>,
    pub simulate: Option<SimulateSection>,
    pub calibrate_cost: Option<CalibrateSection>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub model_id: Option<String>,
    pub seed: Option<u64>,
    pub vocab_size: Option<u32>,
    pub max_output: Option<u32>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateSection {
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub spans: Option<usize>,
    pub tamper_segments: Option<usize>,
    pub drift_flip_probability: Option<f64>,
    pub drift_seed: Option<u64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub k: Option<String>,
    pub f: Option<String>,
    pub r: Option<String>,
    pub q: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub trials: Option<u64>,
    pub mode: Option<String>,
    pub m: Option<usize>,
    pub allowed_outliers: Option<u64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    pub rows: Option<String>,
    pub include_prefill: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let raw = std::fs::read_to_string(p).map_err(|e| {
                    CliError::usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                toml::from_str(&raw)
                    .map_err(|e| CliError::usage(format!("config {}: {e}", p.display())))
            }
        }
    }
}

/// Picks flag over file over default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Resolved reference-model parameters, echoed into run records.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedModel {
    pub model_id: String,
    pub seed: u64,
    pub vocab_size: u32,
    pub max_output: u32,
}

impl ResolvedModel {
    pub fn resolve(
        section: Option<&ModelSection>,
        id_flag: Option<&str>,
        seed_flag: Option<u64>,
        defaults: (&str, u64, u32, u32),
    ) -> Self {
        let empty = ModelSection::default();
        let s = section.unwrap_or(&empty);
        Self {
            model_id: id_flag
                .map(str::to_string)
                .or_else(|| s.model_id.clone())
                .unwrap_or_else(|| defaults.0.to_string()),
            seed: pick(seed_flag, s.seed, defaults.1),
            vocab_size: s.vocab_size.unwrap_or(defaults.2),
            max_output: s.max_output.unwrap_or(defaults.3),
        }
    }

    pub fn build(&self) -> Result<ModelConfig, CliError> {
        ModelConfig::new(
            self.model_id.clone(),
            self.seed,
            self.vocab_size,
            self.max_output,
        )
        .map_err(|e| CliError::usage(format!("invalid model config: {e}")))
    }
}

/// Parses a grid axis: either a comma list `1,2,5` or an inclusive range
/// `1..20`.
pub fn parse_axis(spec: &str) -> Result<Vec<u32>, CliError> {
    let spec = spec.trim();
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u32 = lo
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("bad axis range {spec:?}")))?;
        let hi: u32 = hi
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("bad axis range {spec:?}")))?;
        if lo > hi {
            return Err(CliError::usage(format!("empty axis range {spec:?}")));
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .map_err(|_| CliError::usage(format!("bad axis value {part:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_accepts_lists_and_ranges() {
        assert_eq!(parse_axis("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_axis("20").unwrap(), vec![20]);
        assert_eq!(parse_axis("1, 3 ,5").unwrap(), vec![1, 3, 5]);
        assert!(parse_axis("4..1").is_err());
        assert!(parse_axis("a,b").is_err());
    }

    #[test]
    fn file_config_rejects_unknown_fields() {
        let err = toml::from_str::<FileConfig>("[simulate]\nbanana = 3\n");
        assert!(err.is_err());
    }

    #[test]
    fn precedence_is_flag_file_default() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick::<u32>(None, None, 3), 3);
    }
}
