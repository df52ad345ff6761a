//! `sweep-detect`: exact detection probability over a parameter grid.

use serde::Serialize;
use spotcheck::detmath::{self, SweepGrid, SweepRow};
use spotcheck::plot::{LineChart, Series};

use crate::record::RunRecord;
use crate::CliError;

use super::{fmt_f64, write_output, write_record, CommandCtx, OutputFormat};

pub const SWEEP_CSV_HEADER: &str = "k,f,r,q,p_detect";

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub k: Vec<u32>,
    pub f: Vec<u32>,
    pub r: Vec<u32>,
    pub q: Vec<u32>,
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    for row in rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.k,
            row.f,
            row.r,
            row.q,
            fmt_f64(row.p_detect)
        ));
    }
    csv
}

type CurveGroup = ((u32, u32, u32), Vec<(f64, f64)>);

/// One polyline per (k, f, r) combination, q on the horizontal axis.
pub fn chart(rows: &[SweepRow], title: &str) -> LineChart {
    let mut groups: Vec<CurveGroup> = Vec::new();
    for row in rows {
        let key = (row.k, row.f, row.r);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push((f64::from(row.q), row.p_detect)),
            None => groups.push((key, vec![(f64::from(row.q), row.p_detect)])),
        }
    }
    let single_kf = groups
        .iter()
        .all(|((k, f, _), _)| (*k, *f) == (groups[0].0 .0, groups[0].0 .1));
    let lines = groups
        .into_iter()
        .map(|((k, f, r), points)| {
            let label = if single_kf {
                format!("r={r}")
            } else {
                format!("k={k} f={f} r={r}")
            };
            Series::new(label, points)
        })
        .collect();
    LineChart {
        title: title.to_string(),
        x_label: "validators q".into(),
        y_label: "detection probability".into(),
        lines,
        scatters: Vec::new(),
        y_range: Some((0.0, 1.0)),
    }
}

pub fn run(ctx: &CommandCtx, cfg: &SweepConfig) -> Result<(), CliError> {
    let grid = SweepGrid {
        k: cfg.k.clone(),
        f: cfg.f.clone(),
        r: cfg.r.clone(),
        q: cfg.q.clone(),
    };
    let rows = detmath::sweep(&grid).map_err(|e| CliError::usage(e.to_string()))?;

    let payload_path = match ctx.format {
        OutputFormat::Csv => write_output(&ctx.out_dir, "sweep_detect.csv", &rows_to_csv(&rows))?,
        OutputFormat::Json => {
            let mut json = serde_json::to_string_pretty(&rows).expect("rows serialize");
            json.push('\n');
            write_output(&ctx.out_dir, "sweep_detect.json", &json)?
        }
    };

    let mut svg_path = None;
    if ctx.svg {
        let svg = chart(&rows, "Exact detection probability").to_svg(720, 480);
        svg_path = Some(write_output(&ctx.out_dir, "sweep_detect.svg", &svg)?);
    }

    let record = RunRecord::new(
        "sweep-detect",
        ctx.master_seed,
        serde_json::to_value(cfg).expect("config serializes"),
        serde_json::json!({
            "rows": rows,
            "payload": payload_path.file_name().map(|n| n.to_string_lossy().into_owned()),
        }),
    );
    let record_path = write_record(&ctx.out_dir, "sweep_detect_record.json", &record)?;

    println!(
        "sweep-detect: {} rows -> {}",
        rows.len(),
        payload_path.display()
    );
    if let Some(p) = svg_path {
        println!("chart: {}", p.display());
    }
    println!("record: {}", record_path.display());
    Ok(())
}
