//! Data pipeline for factuality-aware alignment.
//!
//! The crate builds trainer-ready SFT datasets and DPO preference pairs from
//! seed instructions, a passage corpus, and one or more chat-completion
//! backends. It does not perform gradient updates; training settings are
//! recorded in an emitted manifest for external trainers.
//!
//! Pipeline stages, in dependency order:
//!
//! 1. [`classify`] — route instructions into fact-based / non-fact-based.
//! 2. [`retrieval`] — BM25 passage search, re-ranking, support retrieval.
//! 3. [`elicit`] — few-shot knowledge elicitation and SFT dataset assembly.
//! 4. [`rewards`] — instruction-following judge scores and factuality rewards.
//! 5. [`pairs`] — preference-pair construction under routing and filter rules.
//! 6. [`eval`] — factuality metrics, rank-correlation validation, reports.
//!
//! All stages speak JSONL ([`dataset`]) and reach models through a single
//! [`gateway`] that supports HTTP backends, deterministic mock scripts, and a
//! persistent response cache, so a warmed run is a pure function of its
//! inputs.

pub mod classify;
pub mod dataset;
pub mod digest;
pub mod elicit;
pub mod eval;
pub mod gateway;
pub mod pairs;
pub mod retrieval;
pub mod rewards;
pub mod templates;
pub mod types;

pub use types::{
    FactReward, Instruction, InstructionKind, InstructionSource, JudgeScore, Passage,
    PreferencePair, Response, ResponseOrigin, SamplingParams, TrainingManifest,
};
