//! `replicate`: generate a sequence, audit spans of the honest claim and a
//! tampered copy, and show the verdicts side by side.

use serde::Serialize;
use spotcheck::detgen::DriftSpec;
use spotcheck::rng::{derive_seed, SplitMix64};
use spotcheck::seqlab::{
    apply_tamper, sample_tamper_indices, ClaimedOutput, ReplacementSource, TamperPlan,
};
use spotcheck::verify::{self, VerificationOutcome};

use crate::config::ResolvedModel;
use crate::record::RunRecord;
use crate::CliError;

use super::{default_prompt, write_record, CommandCtx};

const SPAN_STREAM_TAG: u64 = 0x5350_414e; // "SPAN"
const TAMPER_STREAM_TAG: u64 = 0x5441_4d50; // "TAMP"

/// Claims ship in their own records; the tampered one carries the
/// simulator-only ground-truth section and must round-trip through the
/// public schema.
fn write_claim(ctx: &CommandCtx, name: &str, claim: &ClaimedOutput) -> Result<(), CliError> {
    let mut json = serde_json::to_string_pretty(claim).expect("claim serializes");
    json.push('\n');
    serde_json::from_str::<ClaimedOutput>(&json)
        .map_err(|e| CliError::usage(format!("internal: claim failed validation: {e}")))?;
    super::write_output(&ctx.out_dir, name, &json)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateConfig {
    pub model: ResolvedModel,
    pub alt_model: ResolvedModel,
    pub m: usize,
    pub k: usize,
    pub spans: usize,
    pub tamper_segments: usize,
    pub drift_flip_probability: Option<f64>,
    pub drift_seed: u64,
}

#[derive(Debug, Serialize)]
struct SpanCheck {
    claim: &'static str,
    span: (usize, usize),
    #[serde(flatten)]
    outcome: VerificationOutcome,
}

#[derive(Debug, Serialize)]
struct ReplicateResults {
    tampered_indices: Vec<usize>,
    drift_mode: bool,
    unexpected_mismatches: usize,
    checks: Vec<SpanCheck>,
}

pub fn run(ctx: &CommandCtx, cfg: &ReplicateConfig) -> Result<(), CliError> {
    let model = cfg.model.build()?;
    let alt = cfg.alt_model.build()?;
    super::alt_for(&model, &alt)?;
    if cfg.k == 0 || cfg.k > cfg.m {
        return Err(CliError::usage(format!(
            "need 1 <= k <= m, got k={}, m={}",
            cfg.k, cfg.m
        )));
    }
    if cfg.tamper_segments > cfg.k {
        return Err(CliError::usage(format!(
            "tamper_segments {} exceeds k={}",
            cfg.tamper_segments, cfg.k
        )));
    }

    let prompt = default_prompt(model.vocab_size());
    let honest = ClaimedOutput::honest(&model, prompt, cfg.m, cfg.k)
        .map_err(|e| CliError::usage(format!("cannot build claim: {e}")))?;
    write_claim(ctx, "honest_claim.json", &honest)?;

    // Deterministic random audit spans.
    let mut spans = Vec::with_capacity(cfg.spans);
    for i in 0..cfg.spans {
        let mut rng = SplitMix64::new(derive_seed(&[ctx.master_seed, i as u64, SPAN_STREAM_TAG]));
        let start = rng.next_below(cfg.m as u64) as usize;
        let len = 1 + rng.next_below((cfg.m - start) as u64) as usize;
        spans.push((start, start + len));
    }

    let mut checks = Vec::new();
    let mut unexpected = 0usize;

    for &span in &spans {
        let outcome = verify::verify_span(&model, &honest, span)
            .map_err(|e| CliError::usage(e.to_string()))?;
        if !outcome.is_match() {
            unexpected += 1;
        }
        checks.push(SpanCheck {
            claim: "honest",
            span,
            outcome,
        });
    }

    let mut tampered_indices = Vec::new();
    if cfg.tamper_segments >= 1 {
        let indices = sample_tamper_indices(
            cfg.k,
            cfg.tamper_segments,
            derive_seed(&[ctx.master_seed, TAMPER_STREAM_TAG]),
        )
        .map_err(|e| CliError::usage(e.to_string()))?;
        tampered_indices = indices.iter().copied().collect();
        let plan = if cfg.tamper_segments == cfg.k {
            TamperPlan::full_replacement(cfg.k, ReplacementSource::AltModel(alt.clone()))
        } else {
            TamperPlan::segment_injection(indices.clone(), ReplacementSource::AltModel(alt.clone()))
        }
        .map_err(|e| CliError::usage(e.to_string()))?;
        let tampered = apply_tamper(&honest, &plan).map_err(|e| CliError::usage(e.to_string()))?;
        write_claim(ctx, "tampered_claim.json", &tampered)?;

        for &span in &spans {
            let outcome = verify::verify_span(&model, &tampered, span)
                .map_err(|e| CliError::usage(e.to_string()))?;
            checks.push(SpanCheck {
                claim: "tampered",
                span,
                outcome,
            });
        }
        // Always audit the planted segments themselves: these must flag.
        for &index in &indices {
            let span = tampered.segmentation().span(index).expect("validated");
            let outcome = verify::verify_segment(&model, &tampered, index)
                .map_err(|e| CliError::usage(e.to_string()))?;
            if outcome.is_match() {
                unexpected += 1;
            }
            checks.push(SpanCheck {
                claim: "tampered-segment",
                span,
                outcome,
            });
        }
    }

    let drift_mode = cfg.drift_flip_probability.is_some();
    if let Some(flip) = cfg.drift_flip_probability {
        let drift =
            DriftSpec::new(flip, cfg.drift_seed).map_err(|e| CliError::usage(e.to_string()))?;
        for &span in &spans {
            let outcome = verify::verify_with_drift(&model, &drift, &honest, span)
                .map_err(|e| CliError::usage(e.to_string()))?;
            checks.push(SpanCheck {
                claim: "honest+drift",
                span,
                outcome,
            });
        }
    }

    println!(
        "replicate: m={} k={} spans={} seed={}",
        cfg.m, cfg.k, cfg.spans, ctx.master_seed
    );
    if !tampered_indices.is_empty() {
        println!("tampered segments: {tampered_indices:?}");
    }
    println!(
        "{:<18} {:>14} {:<9} {:>14} {:>8} {:>7}",
        "claim", "span", "verdict", "first_mismatch", "prefill", "decode"
    );
    for check in &checks {
        println!(
            "{:<18} [{:>5},{:>6}) {:<9} {:>14} {:>8} {:>7}",
            check.claim,
            check.span.0,
            check.span.1,
            if check.outcome.is_match() {
                "match"
            } else {
                "MISMATCH"
            },
            check
                .outcome
                .first_mismatch
                .map(|i| i.to_string())
                .unwrap_or_else(|| "-".into()),
            check.outcome.cost.prefill_tokens,
            check.outcome.cost.decode_tokens,
        );
    }

    let results = ReplicateResults {
        tampered_indices,
        drift_mode,
        unexpected_mismatches: unexpected,
        checks,
    };
    let record = RunRecord::new(
        "replicate",
        ctx.master_seed,
        serde_json::to_value(cfg).expect("config serializes"),
        serde_json::to_value(&results).expect("results serialize"),
    );
    let path = write_record(&ctx.out_dir, "replicate_record.json", &record)?;
    println!("record: {}", path.display());

    if unexpected > 0 {
        return Err(CliError::statistical(format!(
            "{unexpected} unexpected verification outcome(s); replicability is broken"
        )));
    }
    Ok(())
}
