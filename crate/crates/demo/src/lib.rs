//! Browser demo for the audit protocol, compiled to WebAssembly.
//!
//! Three interactive operations, each returning a ready-to-inject string:
//!
//! - [`detection_curves_svg`]: exact detection-probability curves over
//!   the validator count, optionally overlaid with in-browser Monte Carlo
//!   markers.
//! - [`audit_trial_svg`]: one real end-to-end trial: generate, tamper,
//!   let validators sample and replay segments, draw who checked what and
//!   what they caught.
//! - [`plan_validators_json`]: the smallest validator count reaching a
//!   target detection probability.
//!
//! The heavy lifting lives in plain functions returning
//! `Result<String, String>` so the same code runs in host-side tests; the
//! `wasm_bindgen` exports are thin wrappers.

use spotcheck::detgen::{ModelConfig, SequenceRole, TokenSequence};
use spotcheck::detmath;
use spotcheck::plot::{LineChart, Series};
use spotcheck::seqlab::{apply_tamper, ClaimedOutput, ReplacementSource, TamperPlan};
use spotcheck::simnet::{self, ClaimTemplate, SimMode};
use spotcheck::AuditParams;

use wasm_bindgen::prelude::*;

#[wasm_bindgen(start)]
pub fn start() {
    console_error_panic_hook::set_once();
}

const DEMO_VOCAB: u32 = 9973;
const MAX_TRIALS: u64 = 200_000;

fn parse_r_list(spec: &str) -> Result<Vec<u32>, String> {
    let spec = spec.trim();
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u32 = lo
            .trim()
            .parse()
            .map_err(|_| format!("bad range {spec:?}"))?;
        let hi: u32 = hi
            .trim()
            .parse()
            .map_err(|_| format!("bad range {spec:?}"))?;
        if lo > hi {
            return Err(format!("empty range {spec:?}"));
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|p| {
            p.trim()
                .parse::<u32>()
                .map_err(|_| format!("bad value {p:?}"))
        })
        .collect()
}

fn demo_model(seed: u64, max_output: u32) -> ModelConfig {
    ModelConfig::new("ref", seed, DEMO_VOCAB, max_output).expect("valid demo config")
}

fn demo_alt(seed: u64, max_output: u32) -> ModelConfig {
    ModelConfig::new("cheap", seed ^ 0xbeef, DEMO_VOCAB, max_output).expect("valid demo config")
}

pub fn detection_curves(
    k: u32,
    f: u32,
    r_spec: &str,
    q_max: u32,
    trials: u64,
    seed: u64,
) -> Result<String, String> {
    if q_max == 0 || q_max > 200 {
        return Err("q_max must be in 1..=200".into());
    }
    if trials > MAX_TRIALS {
        return Err(format!("trials capped at {MAX_TRIALS}"));
    }
    let rs = parse_r_list(r_spec)?;
    if rs.is_empty() {
        return Err("need at least one r value".into());
    }
    // Keep one click bounded: the page runs on the UI thread.
    let total_trials = trials * u64::from(q_max) * rs.len() as u64;
    if total_trials > 20_000_000 {
        return Err(format!(
            "{total_trials} total trials would stall the page; lower trials, q_max, or the r list"
        ));
    }

    let mut lines = Vec::new();
    let mut scatters = Vec::new();
    for &r in &rs {
        let mut exact_points = Vec::with_capacity(q_max as usize);
        let mut empirical_points = Vec::new();
        for q in 1..=q_max {
            let exact = detmath::p_detect(k, f, r, q).map_err(|e| e.to_string())?;
            exact_points.push((f64::from(q), exact));
            if trials > 0 && f > 0 {
                let params = AuditParams::new(k, f, r, q).map_err(|e| e.to_string())?;
                let template = ClaimTemplate {
                    config: demo_model(seed, 64),
                    prompt: TokenSequence::from_ids(SequenceRole::Prompt, &[3, 1, 4]),
                    m: k as usize,
                    k: k as usize,
                    tamper_source: ReplacementSource::AltModel(demo_alt(seed, 64)),
                };
                let point_seed = spotcheck::rng::derive_seed(&[
                    seed,
                    u64::from(k),
                    u64::from(f),
                    u64::from(r),
                    u64::from(q),
                ]);
                let report = simnet::run_experiment(
                    &template,
                    &params,
                    trials,
                    point_seed,
                    SimMode::Oracle,
                    false,
                )
                .map_err(|e| e.to_string())?;
                empirical_points.push((f64::from(q), report.empirical_detect));
            }
        }
        lines.push(Series::new(format!("r={r}"), exact_points));
        scatters.push(Series::new(String::new(), empirical_points));
    }

    let subtitle = if trials > 0 && f > 0 {
        format!("k={k}, f={f}; markers: {trials} trials per point")
    } else {
        format!("k={k}, f={f}")
    };
    let chart = LineChart {
        title: format!("Detection probability ({subtitle})"),
        x_label: "validators q".into(),
        y_label: "detection probability".into(),
        lines,
        scatters,
        y_range: Some((0.0, 1.0)),
    };
    Ok(chart.to_svg(720, 440))
}

/// Runs one real trial and draws it: the segment strip with planted
/// tampering, each validator's sampled segments, and the replay verdicts.
pub fn audit_trial(seed: u64, m: usize, k: u32, f: u32, r: u32, q: u32) -> Result<String, String> {
    if m == 0 || m > 4096 {
        return Err("m must be in 1..=4096".into());
    }
    if q == 0 || q > 24 {
        return Err("q must be in 1..=24".into());
    }
    let params = AuditParams::new(k, f, r, q).map_err(|e| e.to_string())?;
    if k as usize > m {
        return Err(format!("k={k} exceeds m={m}"));
    }

    let model = demo_model(seed, m as u32);
    let prompt = TokenSequence::from_ids(SequenceRole::Prompt, &[3, 1, 4, 1, 5]);
    let honest = ClaimedOutput::honest(&model, prompt, m, k as usize).map_err(|e| e.to_string())?;
    let claim = if f == 0 {
        honest
    } else {
        let indices = simnet::trial_tamper_indices(k, f, seed, 0).map_err(|e| e.to_string())?;
        let plan = if f == k {
            TamperPlan::full_replacement(
                k as usize,
                ReplacementSource::AltModel(demo_alt(seed, m as u32)),
            )
        } else {
            TamperPlan::segment_injection(
                indices,
                ReplacementSource::AltModel(demo_alt(seed, m as u32)),
            )
        }
        .map_err(|e| e.to_string())?;
        apply_tamper(&honest, &plan).map_err(|e| e.to_string())?
    };

    let trial =
        simnet::run_trial(&claim, &params, seed, 0, SimMode::Full).map_err(|e| e.to_string())?;
    let tampered = claim.tampered_indices();

    // Layout: one strip of k cells, one row per validator underneath.
    let width = 720.0_f64;
    let margin = 20.0;
    let cell_w = (width - 2.0 * margin) / f64::from(k);
    let strip_y = 46.0;
    let cell_h = 26.0;
    let row_h = 30.0;
    let rows_y = strip_y + cell_h + 26.0;
    let verdict_y = rows_y + f64::from(q) * row_h + 26.0;
    let height = verdict_y + 16.0;

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n\
         <text x=\"{margin}\" y=\"18\" font-size=\"13\">One audit trial: m={m} tokens, k={k} segments, \
         f={f} tampered, q={q} validators x r={r} checks</text>\n"
    );

    svg.push_str(&format!(
        "<text x=\"{margin}\" y=\"{}\" fill=\"#555\">claimed output</text>\n",
        strip_y - 6.0
    ));
    for i in 0..k {
        let x = margin + f64::from(i) * cell_w;
        let (fill, stroke) = if tampered.contains(&(i as usize)) {
            ("#f6c7c3", "#c5221f")
        } else {
            ("#e8eaed", "#9aa0a6")
        };
        let (s, e) = claim.segmentation().span(i as usize).expect("span");
        svg.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{strip_y}\" width=\"{:.2}\" height=\"{cell_h}\" \
             fill=\"{fill}\" stroke=\"{stroke}\"><title>segment {i}: tokens {s}..{e}{}</title></rect>\n",
            x,
            cell_w - 1.0,
            if tampered.contains(&(i as usize)) {
                " (tampered)"
            } else {
                ""
            }
        ));
        if k <= 32 {
            svg.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"#555\">{i}</text>\n",
                x + cell_w / 2.0,
                strip_y + cell_h / 2.0 + 4.0
            ));
        }
    }

    let mut outcome_iter = trial.per_validator_outcomes.iter();
    for v in 0..q {
        let y = rows_y + f64::from(v) * row_h;
        let assignment = simnet::draw_assignment(k, r, v, seed, 0).map_err(|e| e.to_string())?;
        let caught = trial.detecting_validators.contains(&v);
        svg.push_str(&format!(
            "<text x=\"{margin}\" y=\"{:.2}\" fill=\"{}\">v{v}{}</text>\n",
            y + 16.0,
            if caught { "#c5221f" } else { "#555" },
            if caught { " !" } else { "" }
        ));
        for &segment in &assignment.chosen_segments {
            let outcome = outcome_iter.next().expect("one outcome per chosen segment");
            let x = margin + segment as f64 * cell_w;
            let mismatch = !outcome.is_match();
            let stroke = if mismatch { "#c5221f" } else { "#188038" };
            svg.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"20\" fill=\"none\" \
                 stroke=\"{stroke}\" stroke-width=\"2\"><title>v{v} checked segment {segment}: {}\
                 (prefill {}, decode {})</title></rect>\n",
                x,
                y,
                cell_w - 1.0,
                if mismatch { "mismatch " } else { "match " },
                outcome.cost.prefill_tokens,
                outcome.cost.decode_tokens,
            ));
            if mismatch {
                svg.push_str(&format!(
                    "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"#c5221f\" \
                     font-weight=\"bold\">x</text>\n",
                    x + cell_w / 2.0,
                    y + 15.0
                ));
            }
        }
    }

    let verdict = if trial.detected {
        let catchers: Vec<String> = trial
            .detecting_validators
            .iter()
            .map(|v| format!("v{v}"))
            .collect();
        format!(
            "DETECTED: mismatch broadcast by {}; claim rejected. \
             Replay cost: {} prefill + {} decode tokens.",
            catchers.join(", "),
            trial.total_cost.prefill_tokens,
            trial.total_cost.decode_tokens
        )
    } else if f == 0 {
        format!(
            "No tampering planted; all checks match. Replay cost: {} prefill + {} decode tokens.",
            trial.total_cost.prefill_tokens, trial.total_cost.decode_tokens
        )
    } else {
        format!(
            "NOT DETECTED: every validator sampled clean segments \
             (exact risk of this: {:.4}). Replay cost: {} prefill + {} decode tokens.",
            detmath::p_single_fail(k, f, r)
                .map_err(|e| e.to_string())?
                .powi(q as i32),
            trial.total_cost.prefill_tokens,
            trial.total_cost.decode_tokens
        )
    };
    svg.push_str(&format!(
        "<text x=\"{margin}\" y=\"{verdict_y}\" fill=\"{}\">{}</text>\n",
        if trial.detected { "#c5221f" } else { "#333" },
        verdict
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn plan_validators(k: u32, f: u32, r: u32, target: f64) -> Result<String, String> {
    let q = detmath::min_validators(k, f, r, target).map_err(|e| e.to_string())?;
    let achieved = detmath::p_detect(k, f, r, q).map_err(|e| e.to_string())?;
    Ok(format!(
        "{{\"q\":{q},\"target\":{target},\"achieved\":{achieved}}}"
    ))
}

#[wasm_bindgen]
pub fn detection_curves_svg(
    k: u32,
    f: u32,
    r_spec: &str,
    q_max: u32,
    trials: u64,
    seed: u64,
) -> Result<String, JsValue> {
    detection_curves(k, f, r_spec, q_max, trials, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn audit_trial_svg(
    seed: u64,
    m: usize,
    k: u32,
    f: u32,
    r: u32,
    q: u32,
) -> Result<String, JsValue> {
    audit_trial(seed, m, k, f, r, q).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn plan_validators_json(k: u32, f: u32, r: u32, target: f64) -> Result<String, JsValue> {
    plan_validators(k, f, r, target).map_err(|e| JsValue::from_str(&e))
}
