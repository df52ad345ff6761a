//! `calibrate-cost`: fit the linear cost model to a measurement set and
//! reproduce the published asymmetric-effort ratios.

use serde::{Deserialize, Serialize};
use spotcheck::cost::{self, CostFit, MeasurementRow};

use crate::record::RunRecord;
use crate::CliError;

use super::{write_record, CommandCtx};

/// The measurement fixture shipped with the binary.
pub const EMBEDDED_ROWS: &str = include_str!("../../fixtures/table1.toml");

#[derive(Debug, Clone, Serialize)]
pub struct CalibrateConfig {
    pub rows: Option<String>,
    pub include_prefill: bool,
}

#[derive(Debug, Deserialize)]
pub struct RowsFile {
    pub total_tokens: u64,
    pub rows: Vec<FixtureRow>,
}

#[derive(Debug, Deserialize)]
pub struct FixtureRow {
    pub label: String,
    pub prefill_extra_tokens: u64,
    pub decode_tokens: u64,
    pub seconds: f64,
    #[serde(default)]
    pub published_ratio: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RatioRow {
    label: String,
    seconds: f64,
    ratio: f64,
    published_ratio: Option<f64>,
    abs_delta: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CalibrateResults {
    verification_fit: CostFit,
    prefill_degeneracy_detected: Option<bool>,
    full_generation_seconds: Option<f64>,
    ratios: Vec<RatioRow>,
    max_relative_residual: f64,
}

pub fn parse_rows(raw: &str) -> Result<RowsFile, CliError> {
    toml::from_str(raw).map_err(|e| CliError::usage(format!("measurement rows: {e}")))
}

pub fn run(ctx: &CommandCtx, cfg: &CalibrateConfig) -> Result<(), CliError> {
    let raw = match &cfg.rows {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read rows {path}: {e}")))?,
        None => EMBEDDED_ROWS.to_string(),
    };
    let file = parse_rows(&raw)?;

    let full_row = file
        .rows
        .iter()
        .find(|r| r.decode_tokens == file.total_tokens);
    let verification: Vec<MeasurementRow> = file
        .rows
        .iter()
        .filter(|r| r.decode_tokens != file.total_tokens)
        .map(|r| MeasurementRow::new(&r.label, r.prefill_extra_tokens, r.decode_tokens, r.seconds))
        .collect();

    let verification_fit =
        cost::fit(&verification, false).map_err(|e| CliError::usage(e.to_string()))?;

    // The shipped set has prefill + decode constant on every row; with
    // prefill enabled the fitter must flag the collinearity.
    let prefill_degeneracy_detected = if cfg.include_prefill {
        let all: Vec<MeasurementRow> = file
            .rows
            .iter()
            .map(|r| {
                MeasurementRow::new(&r.label, r.prefill_extra_tokens, r.decode_tokens, r.seconds)
            })
            .collect();
        let fit = cost::fit(&all, true).map_err(|e| CliError::usage(e.to_string()))?;
        Some(fit.prefill_dropped)
    } else {
        None
    };

    let mut ratios = Vec::new();
    if let Some(full) = full_row {
        for row in file
            .rows
            .iter()
            .filter(|r| r.decode_tokens != file.total_tokens)
        {
            let ratio = cost::effort_ratio(full.seconds, row.seconds)
                .map_err(|e| CliError::usage(e.to_string()))?;
            ratios.push(RatioRow {
                label: row.label.clone(),
                seconds: row.seconds,
                ratio,
                published_ratio: row.published_ratio,
                abs_delta: row.published_ratio.map(|p| (ratio - p).abs()),
            });
        }
    }

    let max_relative_residual = verification_fit
        .relative_residuals
        .iter()
        .copied()
        .fold(0.0f64, f64::max);

    println!("calibrate-cost ({} verification rows)", verification.len());
    println!(
        "fit: overhead {:.4} s, decode {:.5} s/token, R^2 {:.6}, max relative residual {:.2}%",
        verification_fit.model.fixed_overhead_s,
        verification_fit.model.decode_rate_s,
        verification_fit.r_squared,
        max_relative_residual * 100.0
    );
    if let Some(degenerate) = prefill_degeneracy_detected {
        if degenerate {
            println!(
                "prefill column is collinear with decode (constant token sum); \
                 prefill rate dropped from the three-column fit"
            );
        }
    }
    if let Some(full) = full_row {
        println!("effort ratios against {} ({} s):", full.label, full.seconds);
        println!(
            "{:<18} {:>9} {:>9} {:>10} {:>8}",
            "verification", "seconds", "ratio", "published", "|delta|"
        );
        for row in &ratios {
            println!(
                "{:<18} {:>9.2} {:>9.2} {:>10} {:>8}",
                row.label,
                row.seconds,
                row.ratio,
                row.published_ratio
                    .map(|p| format!("{p:.2}"))
                    .unwrap_or_else(|| "-".into()),
                row.abs_delta
                    .map(|d| format!("{d:.4}"))
                    .unwrap_or_else(|| "-".into()),
            );
        }
    } else {
        println!("no full-generation row (decode == total_tokens); ratio table skipped");
    }

    let results = CalibrateResults {
        verification_fit,
        prefill_degeneracy_detected,
        full_generation_seconds: full_row.map(|r| r.seconds),
        ratios,
        max_relative_residual,
    };
    let record = RunRecord::new(
        "calibrate-cost",
        ctx.master_seed,
        serde_json::to_value(cfg).expect("config serializes"),
        serde_json::to_value(&results).expect("results serialize"),
    );
    let path = write_record(&ctx.out_dir, "calibrate_cost_record.json", &record)?;
    println!("record: {}", path.display());
    Ok(())
}
