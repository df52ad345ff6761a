//! Multi-agent Monte Carlo simulation of the audit protocol.
//!
//! Each trial plants `f` tampered segments at fresh uniform positions,
//! then lets `q` independent validators each sample `r` distinct segments
//! and check them. A validator that hits a mismatch broadcasts the finding
//! and the claim is marked rejected; the trial counts as detected when any
//! validator hits.
//!
//! Two execution modes share every random decision. `Full` runs the real
//! replay verifier on each chosen segment and accounts real prefill/decode
//! cost. `Oracle` decides detection by set intersection with the
//! ground-truth tampered indices, which is provably the same verdict and
//! lets 10,000-trial sweeps finish in milliseconds.
//!
//! Randomness is counter-based: the stream for (trial, validator) is
//! derived as `derive_seed(master_seed, trial_id, validator_id)` and the
//! per-trial tamper placement as `derive_seed(master_seed, trial_id,
//! u64::MAX)` (validator ids are 32-bit, so the tag cannot collide).
//! Results are therefore independent of execution order: trials may run
//! concurrently and aggregation is count-based.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detgen::{ModelConfig, TokenSequence};
use crate::detmath::{self, AuditParams, ParamError};
use crate::rng::{self, derive_seed};
use crate::seqlab::{
    apply_tamper, sample_tamper_indices, ClaimedOutput, ReplacementSource, TamperError, TamperPlan,
};
use crate::verify::{self, CostLedger, VerificationOutcome, VerifyError};

const TAMPER_STREAM_TAG: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("claim has k={claim_k} segments but params expect k={params_k}")]
    SegmentCountMismatch { claim_k: usize, params_k: u32 },
    #[error("claim has f={claim_f} tampered segments but params expect f={params_f}")]
    TamperCountMismatch { claim_f: usize, params_f: u32 },
    #[error("template k={template_k} does not match params k={params_k}")]
    TemplateMismatch { template_k: usize, params_k: u32 },
    #[error("an experiment needs at least one trial")]
    ZeroTrials,
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Tamper(#[from] TamperError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

/// How a trial decides detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Membership intersection with ground-truth tampered indices.
    Oracle,
    /// Real replay verification of every chosen segment.
    Full,
}

/// One validator's sampled workload for one trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidatorAssignment {
    pub validator_id: u32,
    pub chosen_segments: BTreeSet<usize>,
    pub rng_seed: u64,
}

/// Everything one trial produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial_id: u64,
    pub detected: bool,
    pub detecting_validators: BTreeSet<u32>,
    /// Real verification outcomes, validator-major; empty in oracle mode.
    pub per_validator_outcomes: Vec<VerificationOutcome>,
    pub total_cost: CostLedger,
    /// Consensus outcome after the mismatch broadcast.
    pub rejected: bool,
}

/// Recipe for the honest claim an experiment repeatedly tampers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimTemplate {
    pub config: ModelConfig,
    pub prompt: TokenSequence,
    pub m: usize,
    pub k: usize,
    /// Where replacement tokens come from when f >= 1.
    pub tamper_source: ReplacementSource,
}

/// Aggregated experiment result: empirical detection rate against the
/// closed-form prediction, with every seed needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub params: AuditParams,
    pub mode: SimMode,
    pub trials: u64,
    pub detected_trials: u64,
    pub empirical_detect: f64,
    pub exact_detect: f64,
    pub abs_error: f64,
    /// `3 * sqrt(p (1-p) / trials)` with `p` the exact probability.
    pub three_sigma: f64,
    pub master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial_outcomes: Option<Vec<TrialOutcome>>,
}

impl SimulationReport {
    /// Whether the empirical rate sits within the 3-sigma band.
    pub fn within_three_sigma(&self) -> bool {
        self.abs_error <= self.three_sigma
    }
}

/// Uniform choice of `r` distinct segments for one validator in one trial,
/// via partial Fisher-Yates on a counter-derived stream. Independent
/// across validators and trials, reproducible across platforms.
pub fn draw_assignment(
    k: u32,
    r: u32,
    validator_id: u32,
    master_seed: u64,
    trial_id: u64,
) -> Result<ValidatorAssignment, SimError> {
    if k == 0 || r == 0 || r > k {
        return Err(ParamError::InvalidChecks { r, k }.into());
    }
    let rng_seed = derive_seed(&[master_seed, trial_id, u64::from(validator_id)]);
    let chosen = rng::sample_subset(k as usize, r as usize, rng_seed);
    Ok(ValidatorAssignment {
        validator_id,
        chosen_segments: chosen.into_iter().collect(),
        rng_seed,
    })
}

/// The tamper placement for a trial: a fresh uniform `f`-subset of the
/// `k` segments, on its own tagged stream.
pub fn trial_tamper_indices(
    k: u32,
    f: u32,
    master_seed: u64,
    trial_id: u64,
) -> Result<BTreeSet<usize>, SimError> {
    Ok(sample_tamper_indices(
        k as usize,
        f as usize,
        derive_seed(&[master_seed, trial_id, TAMPER_STREAM_TAG]),
    )?)
}

/// Runs one trial against an already-constructed claim.
pub fn run_trial(
    claim: &ClaimedOutput,
    params: &AuditParams,
    master_seed: u64,
    trial_id: u64,
    mode: SimMode,
) -> Result<TrialOutcome, SimError> {
    params.validate()?;
    let claim_k = claim.segmentation().k();
    if claim_k != params.k as usize {
        return Err(SimError::SegmentCountMismatch {
            claim_k,
            params_k: params.k,
        });
    }
    let tampered = claim.tampered_indices();
    if tampered.len() != params.f as usize {
        return Err(SimError::TamperCountMismatch {
            claim_f: tampered.len(),
            params_f: params.f,
        });
    }

    let mut detecting = BTreeSet::new();
    let mut outcomes = Vec::new();
    let mut total_cost = CostLedger::ZERO;
    for validator_id in 0..params.q {
        let assignment = draw_assignment(params.k, params.r, validator_id, master_seed, trial_id)?;
        match mode {
            SimMode::Oracle => {
                if assignment
                    .chosen_segments
                    .iter()
                    .any(|s| tampered.contains(s))
                {
                    detecting.insert(validator_id);
                }
            }
            SimMode::Full => {
                let mut hit = false;
                for &segment in &assignment.chosen_segments {
                    let outcome = verify::verify_segment(claim.claimed_config(), claim, segment)?;
                    total_cost.accumulate(outcome.cost);
                    hit |= !outcome.is_match();
                    outcomes.push(outcome);
                }
                if hit {
                    detecting.insert(validator_id);
                }
            }
        }
    }

    let detected = !detecting.is_empty();
    Ok(TrialOutcome {
        trial_id,
        detected,
        detecting_validators: detecting,
        per_validator_outcomes: outcomes,
        total_cost,
        rejected: detected,
    })
}

/// Runs `trials` independent trials with fresh tamper placement each, and
/// aggregates the empirical detection rate against the exact prediction.
/// A pure function of `(template, params, trials, master_seed, mode)`.
pub fn run_experiment(
    template: &ClaimTemplate,
    params: &AuditParams,
    trials: u64,
    master_seed: u64,
    mode: SimMode,
    record_trials: bool,
) -> Result<SimulationReport, SimError> {
    params.validate()?;
    if trials == 0 {
        return Err(SimError::ZeroTrials);
    }
    if template.k != params.k as usize {
        return Err(SimError::TemplateMismatch {
            template_k: template.k,
            params_k: params.k,
        });
    }

    let honest = ClaimedOutput::honest(
        &template.config,
        template.prompt.clone(),
        template.m,
        template.k,
    )?;

    let mut detected_trials = 0u64;
    let mut recorded = record_trials.then(Vec::new);
    for trial_id in 0..trials {
        let outcome = match (mode, params.f) {
            // Oracle mode never needs claim tokens: intersect the trial's
            // tamper placement with each validator's picks directly.
            (SimMode::Oracle, _) => {
                let tampered = if params.f == 0 {
                    BTreeSet::new()
                } else {
                    trial_tamper_indices(params.k, params.f, master_seed, trial_id)?
                };
                let mut detecting = BTreeSet::new();
                for validator_id in 0..params.q {
                    let assignment =
                        draw_assignment(params.k, params.r, validator_id, master_seed, trial_id)?;
                    if assignment
                        .chosen_segments
                        .iter()
                        .any(|s| tampered.contains(s))
                    {
                        detecting.insert(validator_id);
                    }
                }
                let detected = !detecting.is_empty();
                TrialOutcome {
                    trial_id,
                    detected,
                    detecting_validators: detecting,
                    per_validator_outcomes: Vec::new(),
                    total_cost: CostLedger::ZERO,
                    rejected: detected,
                }
            }
            (SimMode::Full, 0) => run_trial(&honest, params, master_seed, trial_id, mode)?,
            (SimMode::Full, f) => {
                let indices = trial_tamper_indices(params.k, f, master_seed, trial_id)?;
                let plan = if f as usize == template.k {
                    TamperPlan::full_replacement(template.k, template.tamper_source.clone())?
                } else {
                    TamperPlan::segment_injection(indices, template.tamper_source.clone())?
                };
                let tampered_claim = apply_tamper(&honest, &plan)?;
                run_trial(&tampered_claim, params, master_seed, trial_id, mode)?
            }
        };
        if outcome.detected {
            detected_trials += 1;
        }
        if let Some(rec) = recorded.as_mut() {
            rec.push(outcome);
        }
    }

    let exact_detect = detmath::p_detect(params.k, params.f, params.r, params.q)?;
    let empirical_detect = detected_trials as f64 / trials as f64;
    let three_sigma = 3.0 * (exact_detect * (1.0 - exact_detect) / trials as f64).sqrt();
    Ok(SimulationReport {
        params: *params,
        mode,
        trials,
        detected_trials,
        empirical_detect,
        exact_detect,
        abs_error: (empirical_detect - exact_detect).abs(),
        three_sigma,
        master_seed,
        trial_outcomes: recorded,
    })
}
