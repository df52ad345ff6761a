//! Segmentation and adversarial tampering.
//!
//! An output of `m` tokens is partitioned into `k` contiguous, near-equal
//! segments. An adversary replaces the tokens of `f` chosen segments:
//! either wholesale (cost evasion: the whole output came from a cheaper
//! model) or surgically (content injection: a small fraction of segments
//! carry planted tokens).
//!
//! Tampering is length-preserving and *consistent*: segments after the
//! first tampered one carry the claimed model's own continuation of the
//! tainted context, exactly what a rational adversary would emit, since
//! leaving stale tokens there would make every downstream segment fail
//! verification and only raise the detection probability. The forced
//! difference rule guarantees each tampered segment diverges from what the
//! claimed model would have produced at that point, so `f` is exactly the
//! number of detectably-bad segments.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detgen::{self, ChainState, GenError, ModelConfig, Token, TokenSequence};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SegmentError {
    #[error("segment count must be at least 1")]
    ZeroSegments,
    #[error("cannot split {m} tokens into {k} non-empty segments")]
    MoreSegmentsThanTokens { m: usize, k: usize },
    #[error("spans do not form a valid near-equal partition")]
    InvalidSpans,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TamperError {
    #[error("claim already carries ground-truth tamper metadata")]
    AlreadyTampered,
    #[error("tamper count must satisfy 1 <= f <= k, got f={f}, k={k}")]
    InvalidTamperCount { f: usize, k: usize },
    #[error("tampered segment index {index} out of range for k={k}")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("full replacement must cover all {k} segments")]
    IncompleteFullReplacement { k: usize },
    #[error("payload of {payload_len} tokens is shorter than a {span_len}-token target span")]
    PayloadTooShort { payload_len: usize, span_len: usize },
    #[error("replacement source vocab {source_vocab} differs from claim vocab {claim_vocab}")]
    VocabMismatch { source_vocab: u32, claim_vocab: u32 },
    #[error("claim is inconsistent: {0}")]
    InvalidClaim(String),
    #[error(transparent)]
    Gen(#[from] GenError),
}

/// Partition of an `m`-token output into `k` contiguous half-open spans
/// whose sizes differ by at most one token, larger spans first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSegmentation")]
pub struct Segmentation {
    total_len: usize,
    k: usize,
    spans: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct RawSegmentation {
    total_len: usize,
    k: usize,
    spans: Vec<(usize, usize)>,
}

impl TryFrom<RawSegmentation> for Segmentation {
    type Error = SegmentError;

    fn try_from(raw: RawSegmentation) -> Result<Self, SegmentError> {
        if raw.k == 0 {
            return Err(SegmentError::ZeroSegments);
        }
        if raw.k > raw.total_len {
            return Err(SegmentError::MoreSegmentsThanTokens {
                m: raw.total_len,
                k: raw.k,
            });
        }
        if raw.spans.len() != raw.k {
            return Err(SegmentError::InvalidSpans);
        }
        let mut cursor = 0usize;
        let mut min_len = usize::MAX;
        let mut max_len = 0usize;
        for &(s, e) in &raw.spans {
            if s != cursor || e <= s {
                return Err(SegmentError::InvalidSpans);
            }
            min_len = min_len.min(e - s);
            max_len = max_len.max(e - s);
            cursor = e;
        }
        if cursor != raw.total_len || max_len - min_len > 1 {
            return Err(SegmentError::InvalidSpans);
        }
        Ok(Segmentation {
            total_len: raw.total_len,
            k: raw.k,
            spans: raw.spans,
        })
    }
}

impl Segmentation {
    pub fn total_len(&self) -> usize {
        self.total_len
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    pub fn span(&self, index: usize) -> Option<(usize, usize)> {
        self.spans.get(index).copied()
    }

    /// The segment containing token position `pos`.
    pub fn segment_of(&self, pos: usize) -> Option<usize> {
        if pos >= self.total_len {
            return None;
        }
        Some(match self.spans.binary_search_by(|&(s, _)| s.cmp(&pos)) {
            Ok(i) => i,
            Err(i) => i - 1,
        })
    }
}

/// Splits `m` tokens into `k` near-equal spans: the first `m mod k` spans
/// get one extra token.
pub fn segment(m: usize, k: usize) -> Result<Segmentation, SegmentError> {
    if k == 0 {
        return Err(SegmentError::ZeroSegments);
    }
    if k > m {
        return Err(SegmentError::MoreSegmentsThanTokens { m, k });
    }
    let base = m / k;
    let extra = m % k;
    let mut spans = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = if i < extra { base + 1 } else { base };
        spans.push((start, start + len));
        start += len;
    }
    Ok(Segmentation {
        total_len: m,
        k,
        spans,
    })
}

/// What the adversary is trying to achieve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TamperStrategy {
    /// Cost evasion: every segment is replaced.
    FullReplacement,
    /// Content injection: a small subset of segments is replaced.
    SegmentInjection,
}

/// Where replacement tokens come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplacementSource {
    /// A cheaper or different model continues from the claimed context.
    AltModel(ModelConfig),
    /// A fixed planted payload; each tampered span takes its prefix.
    FixedPayload(TokenSequence),
}

/// The adversary's plan: which segments are replaced and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TamperPlan {
    strategy: TamperStrategy,
    tampered_indices: BTreeSet<usize>,
    replacement_source: ReplacementSource,
}

impl TamperPlan {
    /// Replace all `k` segments (cost evasion).
    pub fn full_replacement(k: usize, source: ReplacementSource) -> Result<Self, TamperError> {
        if k == 0 {
            return Err(TamperError::InvalidTamperCount { f: 0, k });
        }
        Ok(Self {
            strategy: TamperStrategy::FullReplacement,
            tampered_indices: (0..k).collect(),
            replacement_source: source,
        })
    }

    /// Replace the given segment subset (content injection).
    pub fn segment_injection(
        indices: BTreeSet<usize>,
        source: ReplacementSource,
    ) -> Result<Self, TamperError> {
        if indices.is_empty() {
            return Err(TamperError::InvalidTamperCount { f: 0, k: 0 });
        }
        Ok(Self {
            strategy: TamperStrategy::SegmentInjection,
            tampered_indices: indices,
            replacement_source: source,
        })
    }

    pub fn strategy(&self) -> TamperStrategy {
        self.strategy
    }

    pub fn tampered_indices(&self) -> &BTreeSet<usize> {
        &self.tampered_indices
    }

    /// The number of tampered segments, the `f` in the detection math.
    pub fn f(&self) -> usize {
        self.tampered_indices.len()
    }

    pub fn replacement_source(&self) -> &ReplacementSource {
        &self.replacement_source
    }

    fn validate_for(&self, claim: &ClaimedOutput) -> Result<(), TamperError> {
        let k = claim.segmentation.k();
        if let Some(&max) = self.tampered_indices.iter().next_back() {
            if max >= k {
                return Err(TamperError::IndexOutOfRange { index: max, k });
            }
        } else {
            return Err(TamperError::InvalidTamperCount { f: 0, k });
        }
        if self.strategy == TamperStrategy::FullReplacement && self.tampered_indices.len() != k {
            return Err(TamperError::IncompleteFullReplacement { k });
        }
        let claim_vocab = claim.claimed_config.vocab_size();
        match &self.replacement_source {
            ReplacementSource::AltModel(alt) => {
                if alt.vocab_size() != claim_vocab {
                    return Err(TamperError::VocabMismatch {
                        source_vocab: alt.vocab_size(),
                        claim_vocab,
                    });
                }
            }
            ReplacementSource::FixedPayload(payload) => {
                payload.validate_for(&claim.claimed_config)?;
                let longest = self
                    .tampered_indices
                    .iter()
                    .filter_map(|&i| claim.segmentation.span(i))
                    .map(|(s, e)| e - s)
                    .max()
                    .unwrap_or(0);
                if payload.len() < longest {
                    return Err(TamperError::PayloadTooShort {
                        payload_len: payload.len(),
                        span_len: longest,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Simulator-side metadata, invisible to validators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorOnly {
    pub ground_truth_tamper: TamperPlan,
}

/// The `(prompt, output)` pair a validator audits, with the segmentation
/// the audit protocol agreed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClaimedOutput")]
pub struct ClaimedOutput {
    prompt: TokenSequence,
    claimed_config: ModelConfig,
    tokens: TokenSequence,
    segmentation: Segmentation,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulator_only: Option<SimulatorOnly>,
}

#[derive(Deserialize)]
struct RawClaimedOutput {
    prompt: TokenSequence,
    claimed_config: ModelConfig,
    tokens: TokenSequence,
    segmentation: Segmentation,
    #[serde(default)]
    simulator_only: Option<SimulatorOnly>,
}

impl TryFrom<RawClaimedOutput> for ClaimedOutput {
    type Error = TamperError;

    fn try_from(raw: RawClaimedOutput) -> Result<Self, TamperError> {
        let claim =
            ClaimedOutput::new(raw.prompt, raw.claimed_config, raw.tokens, raw.segmentation)?;
        Ok(ClaimedOutput {
            simulator_only: raw.simulator_only,
            ..claim
        })
    }
}

impl ClaimedOutput {
    /// Builds a claim, rejecting any record whose token count disagrees
    /// with its segmentation or whose tokens violate the vocabulary bound.
    pub fn new(
        prompt: TokenSequence,
        claimed_config: ModelConfig,
        tokens: TokenSequence,
        segmentation: Segmentation,
    ) -> Result<Self, TamperError> {
        if segmentation.total_len() != tokens.len() {
            return Err(TamperError::InvalidClaim(format!(
                "segmentation covers {} tokens but the claim has {}",
                segmentation.total_len(),
                tokens.len()
            )));
        }
        prompt.validate_for(&claimed_config)?;
        tokens.validate_for(&claimed_config)?;
        Ok(Self {
            prompt,
            claimed_config,
            tokens,
            segmentation,
            simulator_only: None,
        })
    }

    /// Generates an honest claim: `m` tokens from the reference model,
    /// segmented into `k` spans.
    pub fn honest(
        config: &ModelConfig,
        prompt: TokenSequence,
        m: usize,
        k: usize,
    ) -> Result<Self, TamperError> {
        let tokens = detgen::generate(config, &prompt, m)?;
        let segmentation = segment(m, k).map_err(|e| TamperError::InvalidClaim(e.to_string()))?;
        Self::new(prompt, config.clone(), tokens, segmentation)
    }

    pub fn prompt(&self) -> &TokenSequence {
        &self.prompt
    }

    pub fn claimed_config(&self) -> &ModelConfig {
        &self.claimed_config
    }

    pub fn tokens(&self) -> &TokenSequence {
        &self.tokens
    }

    pub fn segmentation(&self) -> &Segmentation {
        &self.segmentation
    }

    pub fn ground_truth_tamper(&self) -> Option<&TamperPlan> {
        self.simulator_only.as_ref().map(|s| &s.ground_truth_tamper)
    }

    /// Ground-truth tampered segment indices; empty for honest claims.
    pub fn tampered_indices(&self) -> BTreeSet<usize> {
        self.ground_truth_tamper()
            .map(|p| p.tampered_indices().clone())
            .unwrap_or_default()
    }
}

/// Uniform random choice of `f` tampered segments out of `k`,
/// deterministic in `rng_seed`.
pub fn sample_tamper_indices(
    k: usize,
    f: usize,
    rng_seed: u64,
) -> Result<BTreeSet<usize>, TamperError> {
    if f == 0 || f > k {
        return Err(TamperError::InvalidTamperCount { f, k });
    }
    Ok(rng::sample_subset(k, f, rng_seed).into_iter().collect())
}

/// Applies a tamper plan to an honest claim.
///
/// Segments are rewritten left to right. A tampered segment takes its
/// replacement tokens, forced to differ from the claimed model's reference
/// continuation at that point (offset by one if they coincide). An
/// untampered segment after the first tampered index takes the reference
/// continuation of the tainted context, which keeps it consistent under
/// replay; before the first tampered index nothing changes, so there the
/// claim still equals the honest output verbatim.
pub fn apply_tamper(
    honest: &ClaimedOutput,
    plan: &TamperPlan,
) -> Result<ClaimedOutput, TamperError> {
    if honest.simulator_only.is_some() {
        return Err(TamperError::AlreadyTampered);
    }
    plan.validate_for(honest)?;

    let config = &honest.claimed_config;
    let vocab = config.vocab_size();
    let first_tampered = *plan.tampered_indices.iter().next().expect("non-empty");

    // Claimed context so far: prompt plus every span already settled.
    let mut claimed: Vec<Token> = honest.prompt.tokens().to_vec();
    let (first_start, _) = honest.segmentation.span(first_tampered).expect("validated");
    claimed.extend_from_slice(&honest.tokens[..first_start]);
    let mut state = ChainState::over(config, &claimed);

    let mut new_tokens: Vec<Token> = honest.tokens[..first_start].to_vec();
    for index in first_tampered..honest.segmentation.k() {
        let (s, e) = honest.segmentation.span(index).expect("in range");
        let len = e - s;

        // Reference continuation: what the claimed model would emit here.
        let mut probe = state;
        let mut reference = Vec::with_capacity(len);
        for _ in 0..len {
            let t = probe.token(config);
            reference.push(t);
            probe.absorb(t);
        }

        let chosen = if plan.tampered_indices.contains(&index) {
            let mut replacement = match &plan.replacement_source {
                ReplacementSource::AltModel(alt) => {
                    detgen::continue_from(alt, &claimed, len)?.tokens().to_vec()
                }
                ReplacementSource::FixedPayload(payload) => payload[..len].to_vec(),
            };
            if replacement == reference {
                replacement[0] = Token((replacement[0].0 + 1) % vocab);
            }
            replacement
        } else {
            reference
        };

        for &t in &chosen {
            state.absorb(t);
        }
        claimed.extend_from_slice(&chosen);
        new_tokens.extend_from_slice(&chosen);
    }

    Ok(ClaimedOutput {
        prompt: honest.prompt.clone(),
        claimed_config: honest.claimed_config.clone(),
        tokens: TokenSequence::output(new_tokens),
        segmentation: honest.segmentation.clone(),
        simulator_only: Some(SimulatorOnly {
            ground_truth_tamper: plan.clone(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detgen::SequenceRole;
    use proptest::prelude::*;

    fn cfg(seed: u64) -> ModelConfig {
        ModelConfig::new("ref", seed, 9973, 4096).unwrap()
    }

    fn honest_claim(seed: u64, m: usize, k: usize) -> ClaimedOutput {
        let config = cfg(seed);
        let prompt = TokenSequence::from_ids(SequenceRole::Prompt, &[1, 2, 3]);
        ClaimedOutput::honest(&config, prompt, m, k).unwrap()
    }

    /// Reference continuation of a span given the claim's own prefix: the
    /// quantity a replay verifier reconstructs.
    fn reference_span(claim: &ClaimedOutput, index: usize) -> Vec<Token> {
        let (s, e) = claim.segmentation().span(index).unwrap();
        let mut ctx = claim.prompt().tokens().to_vec();
        ctx.extend_from_slice(&claim.tokens()[..s]);
        detgen::continue_from(claim.claimed_config(), &ctx, e - s)
            .unwrap()
            .tokens()
            .to_vec()
    }

    #[test]
    fn segment_792_by_20_matches_near_equal_rule() {
        let seg = segment(792, 20).unwrap();
        let lens: Vec<usize> = seg.spans().iter().map(|&(s, e)| e - s).collect();
        assert_eq!(lens[..12], vec![40; 12][..]);
        assert_eq!(lens[12..], vec![39; 8][..]);
        assert_eq!(lens.iter().sum::<usize>(), 792);
        assert_eq!(seg.span(0), Some((0, 40)));
        assert_eq!(seg.span(19), Some((753, 792)));
    }

    #[test]
    fn segment_unit_and_single_cases() {
        let seg = segment(5, 5).unwrap();
        assert!(seg.spans().iter().all(|&(s, e)| e - s == 1));
        let seg = segment(10, 1).unwrap();
        assert_eq!(seg.spans(), &[(0, 10)]);
    }

    #[test]
    fn segment_rejects_bad_counts() {
        assert_eq!(segment(10, 0), Err(SegmentError::ZeroSegments));
        assert_eq!(
            segment(3, 4),
            Err(SegmentError::MoreSegmentsThanTokens { m: 3, k: 4 })
        );
    }

    #[test]
    fn segment_of_maps_positions_to_spans() {
        let seg = segment(11, 3).unwrap(); // spans (0,4) (4,8) (8,11)
        assert_eq!(seg.segment_of(0), Some(0));
        assert_eq!(seg.segment_of(3), Some(0));
        assert_eq!(seg.segment_of(4), Some(1));
        assert_eq!(seg.segment_of(10), Some(2));
        assert_eq!(seg.segment_of(11), None);
    }

    #[test]
    fn sample_indices_full_and_deterministic() {
        let all = sample_tamper_indices(6, 6, 9).unwrap();
        assert_eq!(all, (0..6).collect());
        assert_eq!(
            sample_tamper_indices(20, 3, 77).unwrap(),
            sample_tamper_indices(20, 3, 77).unwrap()
        );
        assert!(matches!(
            sample_tamper_indices(4, 5, 0),
            Err(TamperError::InvalidTamperCount { f: 5, k: 4 })
        ));
        assert!(sample_tamper_indices(4, 0, 0).is_err());
    }

    #[test]
    fn sample_indices_uniform_frequency() {
        // f=1 of k=20 over 20,000 draws: each index within 3 sigma of 1/20.
        let n = 20_000u64;
        let mut counts = [0u64; 20];
        for i in 0..n {
            let set = sample_tamper_indices(20, 1, rng::derive_seed(&[5, i])).unwrap();
            counts[*set.iter().next().unwrap()] += 1;
        }
        let expect = n as f64 / 20.0;
        let three_sigma = 3.0 * (n as f64 * (1.0 / 20.0) * (19.0 / 20.0)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            let dev = (c as f64 - expect).abs();
            assert!(dev <= three_sigma, "index {i}: count {c} deviates {dev:.1}");
        }
    }

    #[test]
    fn full_replacement_differs_in_every_segment() {
        let honest = honest_claim(42, 100, 10);
        let alt = ModelConfig::new("cheap", 7, 9973, 4096).unwrap();
        let plan = TamperPlan::full_replacement(10, ReplacementSource::AltModel(alt)).unwrap();
        let tampered = apply_tamper(&honest, &plan).unwrap();
        for i in 0..10 {
            let (s, e) = honest.segmentation().span(i).unwrap();
            assert_ne!(
                &tampered.tokens()[s..e],
                &honest.tokens()[s..e],
                "segment {i} unchanged"
            );
            assert_ne!(tampered.tokens()[s..e], reference_span(&tampered, i)[..]);
        }
        assert_eq!(tampered.ground_truth_tamper().unwrap().f(), 10);
    }

    #[test]
    fn injection_diverges_in_exactly_f_segments_under_replay() {
        let honest = honest_claim(42, 200, 20);
        let alt = ModelConfig::new("cheap", 7, 9973, 4096).unwrap();
        let indices: BTreeSet<usize> = [4, 11].into_iter().collect();
        let plan = TamperPlan::segment_injection(indices.clone(), ReplacementSource::AltModel(alt))
            .unwrap();
        let tampered = apply_tamper(&honest, &plan).unwrap();

        assert_eq!(tampered.tokens().len(), honest.tokens().len());
        for i in 0..20 {
            let (s, e) = tampered.segmentation().span(i).unwrap();
            let claimed = &tampered.tokens()[s..e];
            let reference = reference_span(&tampered, i);
            if indices.contains(&i) {
                assert_ne!(
                    claimed,
                    &reference[..],
                    "tampered segment {i} not divergent"
                );
            } else {
                assert_eq!(claimed, &reference[..], "clean segment {i} diverged");
            }
        }
        // Before the first tampered index the claim is the honest output
        // verbatim.
        let (cut, _) = honest.segmentation().span(4).unwrap();
        assert_eq!(&tampered.tokens()[..cut], &honest.tokens()[..cut]);
    }

    #[test]
    fn injection_into_trailing_segments_diffs_only_there() {
        // With the tampered segments last, the consistency rewrite touches
        // nothing else, so the diff against the honest output is confined
        // to exactly the planned spans.
        let honest = honest_claim(9, 200, 20);
        let alt = ModelConfig::new("cheap", 3, 9973, 4096).unwrap();
        let indices: BTreeSet<usize> = [18, 19].into_iter().collect();
        let plan = TamperPlan::segment_injection(indices.clone(), ReplacementSource::AltModel(alt))
            .unwrap();
        let tampered = apply_tamper(&honest, &plan).unwrap();
        let mut diff_segments = BTreeSet::new();
        for (i, &(s, e)) in honest.segmentation().spans().iter().enumerate() {
            if tampered.tokens()[s..e] != honest.tokens()[s..e] {
                diff_segments.insert(i);
            }
        }
        assert_eq!(diff_segments, indices);
    }

    #[test]
    fn payload_injection_lands_inside_the_final_span() {
        let honest = honest_claim(4, 40, 4);
        let payload = TokenSequence::from_ids(SequenceRole::Context, &[500; 10]);
        let plan = TamperPlan::segment_injection(
            [3].into_iter().collect(),
            ReplacementSource::FixedPayload(payload),
        )
        .unwrap();
        let tampered = apply_tamper(&honest, &plan).unwrap();
        let diff_positions: Vec<usize> = (0..40)
            .filter(|&i| tampered.tokens()[i] != honest.tokens()[i])
            .collect();
        assert!(!diff_positions.is_empty());
        let (s, e) = honest.segmentation().span(3).unwrap();
        assert!(diff_positions.iter().all(|&p| p >= s && p < e));
    }

    #[test]
    fn payload_too_short_is_rejected() {
        let honest = honest_claim(4, 40, 4);
        let payload = TokenSequence::from_ids(SequenceRole::Context, &[1, 2, 3]);
        let plan = TamperPlan::segment_injection(
            [0].into_iter().collect(),
            ReplacementSource::FixedPayload(payload),
        )
        .unwrap();
        assert_eq!(
            apply_tamper(&honest, &plan).unwrap_err(),
            TamperError::PayloadTooShort {
                payload_len: 3,
                span_len: 10
            }
        );
    }

    #[test]
    fn forced_difference_bumps_identical_payload() {
        // Plant the honest tokens themselves: the forced-difference rule
        // must still make the segment diverge.
        let honest = honest_claim(8, 30, 3);
        let (s, e) = honest.segmentation().span(0).unwrap();
        let payload = TokenSequence::new(SequenceRole::Context, honest.tokens()[s..e].to_vec());
        let plan = TamperPlan::segment_injection(
            [0].into_iter().collect(),
            ReplacementSource::FixedPayload(payload),
        )
        .unwrap();
        let tampered = apply_tamper(&honest, &plan).unwrap();
        assert_ne!(&tampered.tokens()[s..e], &honest.tokens()[s..e]);
        assert_eq!(tampered.tokens()[s].0, (honest.tokens()[s].0 + 1) % 9973);
    }

    #[test]
    fn single_token_segments_still_tamper_cleanly() {
        // k = m: every span is one token; the forced-difference rule must
        // still hold span by span.
        let honest = honest_claim(5, 6, 6);
        let alt = ModelConfig::new("cheap", 31, 9973, 4096).unwrap();
        let plan = TamperPlan::segment_injection(
            [1, 4].into_iter().collect(),
            ReplacementSource::AltModel(alt),
        )
        .unwrap();
        let tampered = apply_tamper(&honest, &plan).unwrap();
        assert_eq!(tampered.tokens().len(), 6);
        for i in 0..6 {
            let claimed = &tampered.tokens()[i..=i];
            let reference = reference_span(&tampered, i);
            if i == 1 || i == 4 {
                assert_ne!(claimed, &reference[..], "segment {i}");
            } else {
                assert_eq!(claimed, &reference[..], "segment {i}");
            }
        }
    }

    #[test]
    fn tampering_twice_is_rejected() {
        let honest = honest_claim(4, 40, 4);
        let alt = ModelConfig::new("cheap", 3, 9973, 4096).unwrap();
        let plan = TamperPlan::segment_injection(
            [1].into_iter().collect(),
            ReplacementSource::AltModel(alt),
        )
        .unwrap();
        let tampered = apply_tamper(&honest, &plan).unwrap();
        assert_eq!(
            apply_tamper(&tampered, &plan).unwrap_err(),
            TamperError::AlreadyTampered
        );
    }

    #[test]
    fn mismatched_vocab_is_rejected() {
        let honest = honest_claim(4, 40, 4);
        let alt = ModelConfig::new("cheap", 3, 256, 4096).unwrap();
        let plan = TamperPlan::segment_injection(
            [1].into_iter().collect(),
            ReplacementSource::AltModel(alt),
        )
        .unwrap();
        assert!(matches!(
            apply_tamper(&honest, &plan),
            Err(TamperError::VocabMismatch { .. })
        ));
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let honest = honest_claim(4, 40, 4);
        let alt = ModelConfig::new("cheap", 3, 9973, 4096).unwrap();
        let plan = TamperPlan::segment_injection(
            [4].into_iter().collect(),
            ReplacementSource::AltModel(alt),
        )
        .unwrap();
        assert_eq!(
            apply_tamper(&honest, &plan).unwrap_err(),
            TamperError::IndexOutOfRange { index: 4, k: 4 }
        );
    }

    #[test]
    fn claim_serde_round_trips_and_marks_simulator_section() {
        let honest = honest_claim(12, 60, 6);
        let alt = ModelConfig::new("cheap", 3, 9973, 4096).unwrap();
        let plan = TamperPlan::segment_injection(
            [2].into_iter().collect(),
            ReplacementSource::AltModel(alt),
        )
        .unwrap();
        let tampered = apply_tamper(&honest, &plan).unwrap();

        let honest_json = serde_json::to_string(&honest).unwrap();
        assert!(!honest_json.contains("simulator_only"));
        let tampered_json = serde_json::to_string(&tampered).unwrap();
        assert!(tampered_json.contains("simulator_only"));

        let back: ClaimedOutput = serde_json::from_str(&tampered_json).unwrap();
        assert_eq!(back, tampered);
    }

    #[test]
    fn short_claim_is_rejected_at_deserialization() {
        let honest = honest_claim(12, 60, 6);
        let mut value = serde_json::to_value(&honest).unwrap();
        let tokens = value["tokens"]["tokens"].as_array_mut().unwrap();
        tokens.pop();
        let err = serde_json::from_value::<ClaimedOutput>(value).unwrap_err();
        assert!(err.to_string().contains("segmentation covers"));
    }

    proptest! {
        #[test]
        fn segmentation_is_a_partition(m in 1usize..400, k_frac in 0.0f64..1.0) {
            let k = 1 + ((m - 1) as f64 * k_frac) as usize;
            let seg = segment(m, k).unwrap();
            prop_assert_eq!(seg.spans().len(), k);
            let mut cursor = 0;
            let mut min_len = usize::MAX;
            let mut max_len = 0;
            for &(s, e) in seg.spans() {
                prop_assert_eq!(s, cursor);
                prop_assert!(e > s);
                min_len = min_len.min(e - s);
                max_len = max_len.max(e - s);
                cursor = e;
            }
            prop_assert_eq!(cursor, m);
            prop_assert!(max_len - min_len <= 1);
        }

        #[test]
        fn tampering_preserves_length(
            seed in any::<u64>(),
            m in 20usize..120,
            k in 2usize..10,
            f in 1usize..5,
        ) {
            let k = k.min(m);
            let f = f.min(k);
            let honest = honest_claim(seed, m, k);
            let indices = sample_tamper_indices(k, f, seed ^ 0xabcd).unwrap();
            let alt = ModelConfig::new("cheap", seed ^ 1, 9973, 4096).unwrap();
            let plan = TamperPlan::segment_injection(indices, ReplacementSource::AltModel(alt)).unwrap();
            let tampered = apply_tamper(&honest, &plan).unwrap();
            prop_assert_eq!(tampered.tokens().len(), honest.tokens().len());
        }
    }
}
