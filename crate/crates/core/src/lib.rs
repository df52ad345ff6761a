//! Deterministic replay verification for autoregressive token sequences.
//!
//! One agent generates a token sequence with a pinned model configuration;
//! other agents audit it by regenerating chosen spans from the claimed
//! context on an identical deterministic generator and comparing tokens.
//! Because regenerating a span is far cheaper than producing the whole
//! sequence, verification effort is asymmetric, and distributing random
//! segment checks across independent validators drives the detection
//! probability for tampered output toward one.
//!
//! Module map:
//!
//! - [`detgen`]: the deterministic reference generator (a seeded hash
//!   chain standing in for a real model) plus a drift variant that
//!   simulates cross-hardware divergence.
//! - [`seqlab`]: segmentation of outputs into near-equal spans and
//!   adversarial tampering of selected segments.
//! - [`verify`]: targeted validation: regenerate any token range from its
//!   preceding context and compare, with prefill/decode cost accounting.
//! - [`detmath`]: exact detection-probability combinatorics and parameter
//!   solvers, with a big-rational oracle mode.
//! - [`simnet`]: multi-agent Monte Carlo simulation of independent
//!   validators sampling segments without replacement.
//! - [`cost`]: linear cost-model fitting and asymmetric-effort ratios.
//! - [`rng`]: pinned, platform-stable pseudo-randomness for every
//!   sampling decision.
//! - [`plot`]: a minimal SVG line-chart writer for sweep outputs.
//!
//! Everything here is a pure function of its arguments: values are
//! immutable after construction and safe to share across threads, and all
//! randomness flows from explicit seeds, so any result can be reproduced
//! bit-for-bit from its inputs.
//!
//! ```
//! use spotcheck::detgen::{ModelConfig, SequenceRole, TokenSequence};
//! use spotcheck::seqlab::{self, ClaimedOutput, ReplacementSource, TamperPlan};
//! use spotcheck::{detmath, verify};
//!
//! // A generator pins its model; validators hold identical copies.
//! let model = ModelConfig::new("ref", 42, 9973, 512)?;
//! let prompt = TokenSequence::from_ids(SequenceRole::Prompt, &[3, 1, 4]);
//! let claim = ClaimedOutput::honest(&model, prompt, 200, 20)?;
//!
//! // Honest spans replay exactly; tampered segments do not.
//! assert!(verify::verify_span(&model, &claim, (150, 200))?.is_match());
//! let cheap = ModelConfig::new("cheap", 7, 9973, 512)?;
//! let plan = TamperPlan::segment_injection(
//!     [4].into_iter().collect(),
//!     ReplacementSource::AltModel(cheap),
//! )?;
//! let tampered = seqlab::apply_tamper(&claim, &plan)?;
//! assert!(!verify::verify_segment(&model, &tampered, 4)?.is_match());
//!
//! // Ten validators sampling two of twenty segments each catch an
//! // f=2 tamper with probability 1 - (C(18,2)/C(20,2))^10 > 88%.
//! assert!(detmath::p_detect(20, 2, 2, 10)? > 0.88);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod cost;
pub mod detgen;
pub mod detmath;
pub mod plot;
pub mod rng;
pub mod seqlab;
pub mod simnet;
pub mod verify;

pub use cost::{CostFit, CostModel, MeasurementRow};
pub use detgen::{DriftSpec, ModelConfig, SequenceRole, Token, TokenSequence};
pub use detmath::AuditParams;
pub use seqlab::{ClaimedOutput, ReplacementSource, Segmentation, TamperPlan, TamperStrategy};
pub use simnet::{ClaimTemplate, SimMode, SimulationReport, TrialOutcome, ValidatorAssignment};
pub use verify::{CostLedger, Verdict, VerificationOutcome};
