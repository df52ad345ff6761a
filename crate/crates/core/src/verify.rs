//! Targeted validation by deterministic replay.
//!
//! A validator re-derives any token range of a claim from its preceding
//! context (prompt plus the claimed tokens before the range) on an
//! identical model instance, and compares against the claimed tokens.
//! Supplied context counts as prefill, regenerated tokens as decode; the
//! comparison stops at the first mismatch, which preserves the verdict
//! while shaving decode cost.
//!
//! Verifying the whole output as one span costs `decode_tokens = m`, the
//! same as honest generation; the asymmetry only appears when spans are
//! small, which is why the audit protocol samples segments instead.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detgen::{ChainState, DriftSpec, GenError, ModelConfig};
use crate::seqlab::ClaimedOutput;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("span {start}..{end} is not a valid range of a {m}-token claim")]
    InvalidSpan { start: usize, end: usize, m: usize },
    #[error("segment index {index} out of range for k={k}")]
    SegmentOutOfRange { index: usize, k: usize },
    #[error(transparent)]
    Gen(#[from] GenError),
}

/// Token counts behind a verification: context supplied vs regenerated.
/// Generation is the expensive phase, so the two are priced separately.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub prefill_tokens: u64,
    pub decode_tokens: u64,
}

impl CostLedger {
    pub const ZERO: CostLedger = CostLedger {
        prefill_tokens: 0,
        decode_tokens: 0,
    };

    pub fn accumulate(&mut self, other: CostLedger) {
        self.prefill_tokens += other.prefill_tokens;
        self.decode_tokens += other.decode_tokens;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Match,
    Mismatch,
}

/// The result of replaying one span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub verdict: Verdict,
    /// Absolute token index of the first divergence, present iff the
    /// verdict is a mismatch; always inside `checked_span`.
    pub first_mismatch: Option<usize>,
    pub checked_span: (usize, usize),
    pub cost: CostLedger,
}

impl VerificationOutcome {
    pub fn is_match(&self) -> bool {
        self.verdict == Verdict::Match
    }
}

fn replay(
    config: &ModelConfig,
    drift: Option<&DriftSpec>,
    claim: &ClaimedOutput,
    span: (usize, usize),
) -> Result<VerificationOutcome, VerifyError> {
    let (start, end) = span;
    let m = claim.tokens().len();
    if start >= end || end > m {
        return Err(VerifyError::InvalidSpan { start, end, m });
    }

    let mut state = ChainState::over(config, claim.prompt());
    for &t in &claim.tokens()[..start] {
        state.absorb(t);
    }

    let mut decode_tokens = 0u64;
    let mut first_mismatch = None;
    for i in start..end {
        let regenerated = match drift {
            Some(d) => state.drifted_token(config, d),
            None => state.token(config),
        };
        decode_tokens += 1;
        if regenerated != claim.tokens()[i] {
            first_mismatch = Some(i);
            break;
        }
        state.absorb(regenerated);
    }

    Ok(VerificationOutcome {
        verdict: if first_mismatch.is_some() {
            Verdict::Mismatch
        } else {
            Verdict::Match
        },
        first_mismatch,
        checked_span: span,
        cost: CostLedger {
            prefill_tokens: (claim.prompt().len() + start) as u64,
            decode_tokens,
        },
    })
}

/// Regenerates `span` (half-open token range) from the claimed context and
/// compares it against the claimed tokens.
pub fn verify_span(
    config: &ModelConfig,
    claim: &ClaimedOutput,
    span: (usize, usize),
) -> Result<VerificationOutcome, VerifyError> {
    replay(config, None, claim, span)
}

/// [`verify_span`] over one segment of the claim's segmentation.
pub fn verify_segment(
    config: &ModelConfig,
    claim: &ClaimedOutput,
    seg_index: usize,
) -> Result<VerificationOutcome, VerifyError> {
    let span = claim
        .segmentation()
        .span(seg_index)
        .ok_or(VerifyError::SegmentOutOfRange {
            index: seg_index,
            k: claim.segmentation().k(),
        })?;
    replay(config, None, claim, span)
}

/// Single-token check at position `j`; `decode_tokens` is exactly 1.
pub fn verify_token(
    config: &ModelConfig,
    claim: &ClaimedOutput,
    j: usize,
) -> Result<VerificationOutcome, VerifyError> {
    replay(config, None, claim, (j, j + 1))
}

/// [`verify_span`] on a validator whose regeneration drifts: a simulated
/// heterogeneous-hardware stack that diverges per token with the drift
/// spec's flip probability.
pub fn verify_with_drift(
    config: &ModelConfig,
    drift: &DriftSpec,
    claim: &ClaimedOutput,
    span: (usize, usize),
) -> Result<VerificationOutcome, VerifyError> {
    replay(config, Some(drift), claim, span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detgen::{self, SequenceRole, TokenSequence};
    use crate::seqlab::{self, ClaimedOutput, ReplacementSource, TamperPlan};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn cfg(seed: u64) -> ModelConfig {
        ModelConfig::new("ref", seed, 9973, 4096).unwrap()
    }

    fn honest_claim(seed: u64, n: usize, m: usize, k: usize) -> ClaimedOutput {
        let config = cfg(seed);
        let ids: Vec<u32> = (0..n as u32).map(|i| (i * 7 + 1) % 9973).collect();
        let prompt = TokenSequence::from_ids(SequenceRole::Prompt, &ids);
        ClaimedOutput::honest(&config, prompt, m, k).unwrap()
    }

    fn tampered_claim(seed: u64, m: usize, k: usize, indices: &[usize]) -> ClaimedOutput {
        let honest = honest_claim(seed, 16, m, k);
        let alt = ModelConfig::new("cheap", seed ^ 0x5a5a, 9973, 4096).unwrap();
        let plan = TamperPlan::segment_injection(
            indices.iter().copied().collect::<BTreeSet<_>>(),
            ReplacementSource::AltModel(alt),
        )
        .unwrap();
        seqlab::apply_tamper(&honest, &plan).unwrap()
    }

    #[test]
    fn honest_claim_matches_on_any_span() {
        let claim = honest_claim(42, 8, 120, 12);
        let config = claim.claimed_config().clone();
        for span in [(0, 120), (0, 1), (119, 120), (37, 81)] {
            let out = verify_span(&config, &claim, span).unwrap();
            assert!(out.is_match(), "span {span:?}");
            assert_eq!(out.first_mismatch, None);
            assert_eq!(out.cost.decode_tokens, (span.1 - span.0) as u64);
            assert_eq!(out.cost.prefill_tokens, (8 + span.0) as u64);
        }
    }

    #[test]
    fn suffix_span_cost_structure() {
        // Last 50 tokens of a 792-token claim: prefill n+742, decode 50.
        let claim = honest_claim(42, 16, 792, 20);
        let config = claim.claimed_config().clone();
        let out = verify_span(&config, &claim, (742, 792)).unwrap();
        assert!(out.is_match());
        assert_eq!(out.cost.prefill_tokens, 16 + 742);
        assert_eq!(out.cost.decode_tokens, 50);
    }

    #[test]
    fn full_span_costs_the_whole_generation() {
        let claim = honest_claim(3, 4, 60, 6);
        let config = claim.claimed_config().clone();
        let out = verify_span(&config, &claim, (0, 60)).unwrap();
        assert_eq!(out.cost.decode_tokens, 60);
        assert_eq!(out.cost.prefill_tokens, 4);
    }

    #[test]
    fn tampered_segment_mismatches_at_first_divergence() {
        let claim = tampered_claim(42, 792, 20, &[3]);
        let config = claim.claimed_config().clone();
        let span = claim.segmentation().span(3).unwrap();

        // Independent diff oracle: compare claimed tokens against the
        // model's continuation of the claimed prefix, token-wise.
        let mut ctx = claim.prompt().tokens().to_vec();
        ctx.extend_from_slice(&claim.tokens()[..span.0]);
        let reference = detgen::continue_from(&config, &ctx, span.1 - span.0).unwrap();
        let expected_first = (span.0..span.1)
            .find(|&i| claim.tokens()[i] != reference[i - span.0])
            .expect("tampered segment must diverge");

        let out = verify_span(&config, &claim, span).unwrap();
        assert_eq!(out.verdict, Verdict::Mismatch);
        assert_eq!(out.first_mismatch, Some(expected_first));
        assert_eq!(
            out.cost.decode_tokens,
            (expected_first - span.0 + 1) as u64,
            "early exit must stop at the first divergence"
        );
    }

    #[test]
    fn untampered_segments_match_before_and_after_tampering() {
        let claim = tampered_claim(7, 200, 20, &[5, 9]);
        let config = claim.claimed_config().clone();
        for i in 0..20 {
            let out = verify_segment(&config, &claim, i).unwrap();
            if i == 5 || i == 9 {
                assert_eq!(out.verdict, Verdict::Mismatch, "segment {i}");
            } else {
                assert_eq!(out.verdict, Verdict::Match, "segment {i}");
            }
        }
    }

    #[test]
    fn single_token_flip_is_caught_at_its_position() {
        let honest = honest_claim(11, 5, 40, 4);
        let config = honest.claimed_config().clone();
        let j = 17;
        let mut ids = honest.tokens().ids();
        ids[j] = (ids[j] + 1) % 9973;
        let claim = ClaimedOutput::new(
            honest.prompt().clone(),
            config.clone(),
            TokenSequence::from_ids(SequenceRole::Output, &ids),
            honest.segmentation().clone(),
        )
        .unwrap();

        let out = verify_token(&config, &claim, j).unwrap();
        assert_eq!(out.verdict, Verdict::Mismatch);
        assert_eq!(out.first_mismatch, Some(j));
        assert_eq!(out.cost.decode_tokens, 1);

        // Positions before j still verify: their context is untouched.
        assert!(verify_token(&config, &claim, j - 1).unwrap().is_match());
    }

    #[test]
    fn verify_token_at_origin_uses_only_the_prompt() {
        let claim = honest_claim(2, 6, 30, 3);
        let config = claim.claimed_config().clone();
        let out = verify_token(&config, &claim, 0).unwrap();
        assert!(out.is_match());
        assert_eq!(out.cost.prefill_tokens, 6);
        assert_eq!(out.cost.decode_tokens, 1);
    }

    #[test]
    fn invalid_spans_are_rejected() {
        let claim = honest_claim(2, 4, 30, 3);
        let config = claim.claimed_config().clone();
        assert!(matches!(
            verify_span(&config, &claim, (10, 10)),
            Err(VerifyError::InvalidSpan { .. })
        ));
        assert!(matches!(
            verify_span(&config, &claim, (20, 31)),
            Err(VerifyError::InvalidSpan { .. })
        ));
        assert!(matches!(
            verify_segment(&config, &claim, 3),
            Err(VerifyError::SegmentOutOfRange { index: 3, k: 3 })
        ));
    }

    #[test]
    fn wrong_validator_config_flags_honest_claims() {
        // Interchangeability: verification only succeeds when all config
        // fields agree.
        let claim = honest_claim(5, 4, 40, 4);
        let other = cfg(6);
        let out = verify_span(&other, &claim, (0, 40)).unwrap();
        assert_eq!(out.verdict, Verdict::Mismatch);
    }

    #[test]
    fn zero_drift_behaves_like_plain_verification() {
        let claim = honest_claim(8, 4, 60, 6);
        let config = claim.claimed_config().clone();
        let drift = DriftSpec::new(0.0, 1234).unwrap();
        for span in [(0, 60), (10, 25), (59, 60)] {
            assert_eq!(
                verify_with_drift(&config, &drift, &claim, span).unwrap(),
                verify_span(&config, &claim, span).unwrap()
            );
        }
    }

    #[test]
    fn certain_drift_mismatches_at_span_start() {
        let claim = honest_claim(8, 4, 60, 6);
        let config = claim.claimed_config().clone();
        let drift = DriftSpec::new(1.0, 1234).unwrap();
        let out = verify_with_drift(&config, &drift, &claim, (20, 40)).unwrap();
        assert_eq!(out.verdict, Verdict::Mismatch);
        assert_eq!(out.first_mismatch, Some(20));
        assert_eq!(out.cost.decode_tokens, 1);
    }

    #[test]
    fn drift_false_mismatch_rate_tracks_closed_form() {
        // 200 honest 50-token spans under 2% drift: the false-mismatch
        // rate should sit within 3 sigma of 1 - 0.98^50. The acceptance
        // suite runs the full 1,000-span version.
        let flip = 0.02;
        let trials = 200u32;
        let mut mismatches = 0u32;
        for t in 0..trials {
            let claim = honest_claim(1000 + u64::from(t), 8, 60, 6);
            let config = claim.claimed_config().clone();
            let drift = DriftSpec::new(flip, 7777 + u64::from(t)).unwrap();
            let out = verify_with_drift(&config, &drift, &claim, (5, 55)).unwrap();
            if !out.is_match() {
                mismatches += 1;
            }
        }
        let p = 1.0 - (1.0 - flip).powi(50);
        let three_sigma = 3.0 * (p * (1.0 - p) / f64::from(trials)).sqrt();
        let rate = f64::from(mismatches) / f64::from(trials);
        assert!(
            (rate - p).abs() <= three_sigma,
            "rate {rate:.4} vs expected {p:.4} (3s={three_sigma:.4})"
        );
    }

    #[test]
    fn outcome_serializes_with_stable_fields() {
        let claim = honest_claim(2, 4, 30, 3);
        let config = claim.claimed_config().clone();
        let out = verify_span(&config, &claim, (0, 10)).unwrap();
        let json = serde_json::to_string(&out).unwrap();
        assert!(json.contains("\"verdict\":\"match\""));
        assert!(json.contains("\"prefill_tokens\":4"));
        let back: VerificationOutcome = serde_json::from_str(&json).unwrap();
        assert_eq!(back, out);
    }

    proptest! {
        #[test]
        fn soundness_on_honest_claims(
            seed in any::<u64>(),
            n in 0usize..12,
            m in 2usize..96,
            span_a in 0usize..96,
            span_b in 0usize..96,
        ) {
            let claim = honest_claim(seed, n, m, 1 + m / 7);
            let config = claim.claimed_config().clone();
            let (mut s, mut e) = (span_a % m, span_b % m);
            if s > e { std::mem::swap(&mut s, &mut e); }
            let out = verify_span(&config, &claim, (s, e + 1)).unwrap();
            prop_assert!(out.is_match());
            prop_assert_eq!(out.cost.prefill_tokens, (n + s) as u64);
            prop_assert_eq!(out.cost.decode_tokens, (e + 1 - s) as u64);
        }

        #[test]
        fn mismatch_flag_and_span_agree(
            seed in any::<u64>(),
            m in 20usize..80,
        ) {
            let k = 5;
            let claim = tampered_claim(seed, m, k, &[2]);
            let config = claim.claimed_config().clone();
            for i in 0..k {
                let out = verify_segment(&config, &claim, i).unwrap();
                let (s, e) = claim.segmentation().span(i).unwrap();
                match out.verdict {
                    Verdict::Mismatch => {
                        let fm = out.first_mismatch.unwrap();
                        prop_assert!(fm >= s && fm < e);
                        prop_assert_eq!(i, 2);
                    }
                    Verdict::Match => {
                        prop_assert!(out.first_mismatch.is_none());
                        prop_assert!(i != 2);
                    }
                }
            }
        }
    }
}
