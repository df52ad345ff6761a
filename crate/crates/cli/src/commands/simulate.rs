//! `simulate`: Monte Carlo trials over a parameter grid, empirical
//! detection rate against the closed form, 3-sigma acceptance gate.

use serde::Serialize;
use spotcheck::plot::{LineChart, Series};
use spotcheck::rng::derive_seed;
use spotcheck::seqlab::ReplacementSource;
use spotcheck::simnet::{self, ClaimTemplate, SimMode, SimulationReport};
use spotcheck::AuditParams;

use crate::config::ResolvedModel;
use crate::record::RunRecord;
use crate::CliError;

use super::{default_prompt, fmt_f64, write_output, write_record, CommandCtx, OutputFormat};

pub const SIMULATE_CSV_HEADER: &str =
    "k,f,r,q,trials,exact_detect,empirical_detect,abs_error,three_sigma,within_3sigma";

#[derive(Debug, Clone, Serialize)]
pub struct SimulateConfig {
    pub model: ResolvedModel,
    pub alt_model: ResolvedModel,
    pub k: Vec<u32>,
    pub f: Vec<u32>,
    pub r: Vec<u32>,
    pub q: Vec<u32>,
    pub trials: u64,
    pub mode: String,
    pub m: usize,
    pub allowed_outliers: u64,
}

pub fn parse_mode(mode: &str) -> Result<SimMode, CliError> {
    match mode {
        "oracle" => Ok(SimMode::Oracle),
        "full" => Ok(SimMode::Full),
        other => Err(CliError::usage(format!(
            "mode must be 'oracle' or 'full', got {other:?}"
        ))),
    }
}

fn report_csv_line(report: &SimulationReport) -> String {
    let p = report.params;
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        p.k,
        p.f,
        p.r,
        p.q,
        report.trials,
        fmt_f64(report.exact_detect),
        fmt_f64(report.empirical_detect),
        fmt_f64(report.abs_error),
        fmt_f64(report.three_sigma),
        report.within_three_sigma(),
    )
}

fn overlay_chart(reports: &[SimulationReport]) -> LineChart {
    let mut lines: Vec<Series> = Vec::new();
    let mut scatters: Vec<Series> = Vec::new();
    for report in reports {
        let p = report.params;
        let label = format!("r={} (k={} f={})", p.r, p.k, p.f);
        let q = f64::from(p.q);
        match lines.iter_mut().position(|s| s.label == label) {
            Some(i) => {
                lines[i].points.push((q, report.exact_detect));
                scatters[i].points.push((q, report.empirical_detect));
            }
            None => {
                lines.push(Series::new(label, vec![(q, report.exact_detect)]));
                scatters.push(Series::new(
                    String::new(),
                    vec![(q, report.empirical_detect)],
                ));
            }
        }
    }
    LineChart {
        title: "Detection probability: exact curves, empirical markers".into(),
        x_label: "validators q".into(),
        y_label: "detection probability".into(),
        lines,
        scatters,
        y_range: Some((0.0, 1.0)),
    }
}

pub fn run(ctx: &CommandCtx, cfg: &SimulateConfig) -> Result<(), CliError> {
    let mode = parse_mode(&cfg.mode)?;
    let model = cfg.model.build()?;
    let alt = cfg.alt_model.build()?;
    super::alt_for(&model, &alt)?;

    let mut axes = [cfg.k.clone(), cfg.f.clone(), cfg.r.clone(), cfg.q.clone()];
    for axis in &mut axes {
        axis.sort_unstable();
        axis.dedup();
    }
    let [ks, fs, rs, qs] = axes;

    let mut reports = Vec::new();
    for &k in &ks {
        if (k as usize) > cfg.m {
            return Err(CliError::usage(format!(
                "grid k={k} exceeds sequence length m={}",
                cfg.m
            )));
        }
        let template = ClaimTemplate {
            config: model.clone(),
            prompt: default_prompt(model.vocab_size()),
            m: cfg.m,
            k: k as usize,
            tamper_source: ReplacementSource::AltModel(alt.clone()),
        };
        for &f in &fs {
            for &r in &rs {
                for &q in &qs {
                    let params =
                        AuditParams::new(k, f, r, q).map_err(|e| CliError::usage(e.to_string()))?;
                    // Every grid point gets its own derived stream, so the
                    // point set can change without reshuffling results.
                    let point_seed = derive_seed(&[
                        ctx.master_seed,
                        u64::from(k),
                        u64::from(f),
                        u64::from(r),
                        u64::from(q),
                    ]);
                    let report = simnet::run_experiment(
                        &template, &params, cfg.trials, point_seed, mode, false,
                    )
                    .map_err(|e| CliError::usage(e.to_string()))?;
                    reports.push(report);
                }
            }
        }
    }

    let mut csv = String::from(SIMULATE_CSV_HEADER);
    csv.push('\n');
    for report in &reports {
        csv.push_str(&report_csv_line(report));
        csv.push('\n');
    }

    let payload_path = match ctx.format {
        OutputFormat::Csv => write_output(&ctx.out_dir, "simulate.csv", &csv)?,
        OutputFormat::Json => {
            let mut json = serde_json::to_string_pretty(&reports).expect("reports serialize");
            json.push('\n');
            write_output(&ctx.out_dir, "simulate.json", &json)?
        }
    };

    let mut svg_path = None;
    if ctx.svg {
        let svg = overlay_chart(&reports).to_svg(720, 480);
        svg_path = Some(write_output(&ctx.out_dir, "simulate.svg", &svg)?);
    }

    let outliers = reports.iter().filter(|r| !r.within_three_sigma()).count() as u64;

    let record = RunRecord::new(
        "simulate",
        ctx.master_seed,
        serde_json::to_value(cfg).expect("config serializes"),
        serde_json::json!({
            "points": reports.len(),
            "outliers_beyond_3sigma": outliers,
            "allowed_outliers": cfg.allowed_outliers,
            "reports": reports,
            "payload": payload_path.file_name().map(|n| n.to_string_lossy().into_owned()),
        }),
    );
    let record_path = write_record(&ctx.out_dir, "simulate_record.json", &record)?;

    println!(
        "simulate: {} points x {} trials ({}) -> {}",
        reports.len(),
        cfg.trials,
        cfg.mode,
        payload_path.display()
    );
    println!(
        "outliers beyond 3-sigma: {outliers} (allowed {})",
        cfg.allowed_outliers
    );
    if let Some(p) = svg_path {
        println!("chart: {}", p.display());
    }
    println!("record: {}", record_path.display());

    if outliers > cfg.allowed_outliers {
        return Err(CliError::statistical(format!(
            "{outliers} grid points outside 3-sigma exceeds the allowed {}",
            cfg.allowed_outliers
        )));
    }
    Ok(())
}
