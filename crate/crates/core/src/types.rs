//! Domain types shared by every pipeline stage.
//!
//! All types are immutable values after construction and safe to share
//! read-only across concurrent workers. Serialization is serde/JSON with
//! declaration-order fields, so two serializations of equal values are
//! byte-identical.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// Mean of judge samples must match the stored mean to within this.
pub const JUDGE_MEAN_EPS: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum InvariantError {
    #[error("instruction {id}: text is empty after trimming")]
    EmptyInstructionText { id: String },
    #[error("response {id}: origin=human must not carry sampling parameters")]
    HumanWithSampling { id: String },
    #[error("sampling: {0}")]
    Sampling(String),
    #[error("judge score: {0}")]
    Judge(String),
    #[error("fact reward: {0}")]
    Fact(String),
    #[error("preference pair {instruction_id}: {reason}")]
    Pair { instruction_id: String, reason: String },
    #[error("passage {doc_id}: {reason}")]
    Passage { doc_id: String, reason: String },
    #[error("training manifest: {0}")]
    Manifest(String),
}

// ---------------------------------------------------------------------------
// Instructions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstructionSource {
    SeedIft,
    SeedEft,
    Augmented,
    BioEntity,
    External,
}

impl InstructionSource {
    pub fn as_str(self) -> &'static str {
        match self {
            InstructionSource::SeedIft => "seed_ift",
            InstructionSource::SeedEft => "seed_eft",
            InstructionSource::Augmented => "augmented",
            InstructionSource::BioEntity => "bio_entity",
            InstructionSource::External => "external",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InstructionKind {
    FactBased,
    NonFactBased,
    #[default]
    Unclassified,
}

/// A prompt with identity, text, provenance, and classification state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub id: String,
    pub text: String,
    pub source: InstructionSource,
    #[serde(default)]
    pub kind: InstructionKind,
}

impl Instruction {
    /// Build an instruction with a content-hash id; starts unclassified.
    pub fn new(text: impl Into<String>, source: InstructionSource) -> Self {
        let text = text.into();
        let id = crate::digest::instruction_id(&text, source.as_str());
        Instruction { id, text, source, kind: InstructionKind::Unclassified }
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        if self.text.trim().is_empty() {
            return Err(InvariantError::EmptyInstructionText { id: self.id.clone() });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Responses
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseOrigin {
    Human,
    PtFewshot,
    PtRag,
    SftModel,
    External,
}

impl ResponseOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            ResponseOrigin::Human => "human",
            ResponseOrigin::PtFewshot => "pt_fewshot",
            ResponseOrigin::PtRag => "pt_rag",
            ResponseOrigin::SftModel => "sft_model",
            ResponseOrigin::External => "external",
        }
    }
}

/// Generation settings for sampled responses.
///
/// The elicitation and pair-generation default is temperature 0.7, top-p 0.9.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub n_samples: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams { temperature: 0.7, top_p: 0.9, n_samples: 1, seed: None, max_tokens: 512 }
    }
}

impl SamplingParams {
    /// Greedy settings for calls that must be reproducible (classifiers).
    pub fn greedy() -> Self {
        SamplingParams { temperature: 0.0, top_p: 1.0, n_samples: 1, seed: None, max_tokens: 64 }
    }

    pub fn with_n(mut self, n: u32) -> Self {
        self.n_samples = n;
        self
    }

    pub fn with_max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        let err = |m: String| Err(InvariantError::Sampling(m));
        if !(0.0..=2.0).contains(&self.temperature) || !self.temperature.is_finite() {
            return err(format!("temperature {} outside [0,2]", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return err(format!("top_p {} outside (0,1]", self.top_p));
        }
        if self.n_samples == 0 {
            return err("n_samples must be positive".into());
        }
        if self.max_tokens == 0 {
            return err("max_tokens must be positive".into());
        }
        Ok(())
    }
}

/// A sampled or human completion with origin and attached rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: String,
    pub instruction_id: String,
    pub text: String,
    pub origin: ResponseOrigin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<ResponseRewards>,
}

/// Reward channels attached to a response once scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRewards {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub if_score: Option<JudgeScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fact: Option<FactReward>,
}

impl Response {
    /// Build a sampled response with a content-hash id.
    pub fn sampled(
        instruction_id: &str,
        text: impl Into<String>,
        origin: ResponseOrigin,
        sample_index: u32,
        sampling: SamplingParams,
    ) -> Self {
        let text = text.into();
        let id = crate::digest::response_id(instruction_id, origin.as_str(), sample_index, &text);
        Response {
            id,
            instruction_id: instruction_id.to_string(),
            text,
            origin,
            sampling: Some(sampling),
            rewards: None,
        }
    }

    /// Build a human-written response (no sampling parameters).
    pub fn human(instruction_id: &str, text: impl Into<String>) -> Self {
        let text = text.into();
        let id = crate::digest::response_id(instruction_id, "human", 0, &text);
        Response {
            id,
            instruction_id: instruction_id.to_string(),
            text,
            origin: ResponseOrigin::Human,
            sampling: None,
            rewards: None,
        }
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        if self.origin == ResponseOrigin::Human && self.sampling.is_some() {
            return Err(InvariantError::HumanWithSampling { id: self.id.clone() });
        }
        if let Some(s) = &self.sampling {
            s.validate()?;
        }
        if let Some(r) = &self.rewards {
            if let Some(j) = &r.if_score {
                j.validate()?;
            }
            if let Some(f) = &r.fact {
                f.validate()?;
            }
        }
        Ok(())
    }
}

/// Check that every response references an instruction present in `instructions`.
pub fn check_references(
    responses: &[Response],
    instructions: &[Instruction],
) -> Result<(), String> {
    let ids: std::collections::HashSet<&str> =
        instructions.iter().map(|i| i.id.as_str()).collect();
    for r in responses {
        if !ids.contains(r.instruction_id.as_str()) {
            return Err(format!(
                "response {} references unknown instruction {}",
                r.id, r.instruction_id
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Rewards
// ---------------------------------------------------------------------------

/// Instruction-following judge score: 1–5 scale, mean of up to 3 samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeScore {
    pub samples: Vec<f64>,
    pub mean: f64,
}

impl JudgeScore {
    /// Build from parsed samples. Returns `None` when no sample parsed;
    /// zero parses is a judge failure, not a score.
    pub fn from_samples(samples: Vec<f64>) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        Some(JudgeScore { samples, mean })
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        let err = |m: String| Err(InvariantError::Judge(m));
        if self.samples.is_empty() || self.samples.len() > 3 {
            return err(format!("sample count {} outside 1..=3", self.samples.len()));
        }
        for s in &self.samples {
            if !(1.0..=5.0).contains(s) {
                return err(format!("sample {s} outside [1,5]"));
            }
        }
        let mean = self.samples.iter().sum::<f64>() / self.samples.len() as f64;
        if (mean - self.mean).abs() > JUDGE_MEAN_EPS {
            return err(format!("mean {} does not match samples (expected {mean})", self.mean));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactVerdict {
    Supported,
    NotSupported,
    ParseError,
}

impl fmt::Display for FactVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactVerdict::Supported => write!(f, "supported"),
            FactVerdict::NotSupported => write!(f, "not_supported"),
            FactVerdict::ParseError => write!(f, "parse_error"),
        }
    }
}

/// One verified atomic fact (or sentence, in sentence-unit mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerFact {
    pub fact_text: String,
    pub sentence_index: usize,
    pub verdict: FactVerdict,
}

/// Factuality reward: proportion of verified facts that are supported.
///
/// `value` is absent (not 0) when `n_facts` is 0; such responses are
/// unscoreable and excluded from factuality pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactReward {
    pub n_facts: u32,
    pub n_correct: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub per_fact: Vec<PerFact>,
}

impl FactReward {
    /// Aggregate a verdict ledger into a reward. Order-independent.
    pub fn from_verdicts(per_fact: Vec<PerFact>) -> Self {
        let n_facts = per_fact.len() as u32;
        let n_correct =
            per_fact.iter().filter(|p| p.verdict == FactVerdict::Supported).count() as u32;
        let value = if n_facts > 0 { Some(n_correct as f64 / n_facts as f64) } else { None };
        FactReward { n_facts, n_correct, value, per_fact }
    }

    /// True when the response produced no checkable facts.
    pub fn is_unscoreable(&self) -> bool {
        self.n_facts == 0
    }

    /// Error facts: not supported plus parse failures.
    pub fn n_error(&self) -> u32 {
        self.n_facts - self.n_correct
    }

    pub fn validate(&self) -> Result<(), InvariantError> {
        let err = |m: String| Err(InvariantError::Fact(m));
        if self.n_correct > self.n_facts {
            return err(format!("n_correct {} > n_facts {}", self.n_correct, self.n_facts));
        }
        if self.per_fact.len() as u32 != self.n_facts {
            return err(format!(
                "per_fact length {} != n_facts {}",
                self.per_fact.len(),
                self.n_facts
            ));
        }
        let supported =
            self.per_fact.iter().filter(|p| p.verdict == FactVerdict::Supported).count() as u32;
        if supported != self.n_correct {
            return err(format!("n_correct {} != supported count {supported}", self.n_correct));
        }
        match (self.n_facts, self.value) {
            (0, Some(_)) => err("value must be absent when n_facts = 0".into()),
            (0, None) => Ok(()),
            (_, None) => err("value must be present when n_facts > 0".into()),
            (n, Some(v)) => {
                let expect = self.n_correct as f64 / n as f64;
                if v != expect {
                    return err(format!("value {v} != n_correct/n_facts {expect}"));
                }
                Ok(())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Preference pairs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    IfPair,
    FactPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSelection {
    MaxMin,
    Enumeration,
    Composite,
    FactscoreBio,
}

/// A (instruction, positive, negative) triple with reward provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub instruction_id: String,
    pub positive_id: String,
    pub negative_id: String,
    pub kind: PairKind,
    pub pos_reward: f64,
    pub neg_reward: f64,
    pub selection: PairSelection,
}

impl PreferencePair {
    pub fn validate(&self) -> Result<(), InvariantError> {
        let fail = |reason: String| {
            Err(InvariantError::Pair { instruction_id: self.instruction_id.clone(), reason })
        };
        if self.positive_id == self.negative_id {
            return fail("positive_id equals negative_id".into());
        }
        if !(self.pos_reward > self.neg_reward) {
            return fail(format!(
                "pos_reward {} not strictly greater than neg_reward {}",
                self.pos_reward, self.neg_reward
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Passages
// ---------------------------------------------------------------------------

/// A retrievable corpus unit with retrieval and re-rank scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub doc_id: String,
    pub title: String,
    pub text: String,
    #[serde(default)]
    pub retrieval_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rerank_score: Option<f64>,
}

impl Passage {
    pub fn validate(&self) -> Result<(), InvariantError> {
        let fail = |reason: String| {
            Err(InvariantError::Passage { doc_id: self.doc_id.clone(), reason })
        };
        if self.text.is_empty() {
            return fail("text is empty".into());
        }
        if !self.retrieval_score.is_finite() {
            return fail(format!("retrieval_score {} not finite", self.retrieval_score));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Training manifest
// ---------------------------------------------------------------------------

/// Training settings recorded for external trainers; no training happens here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedHyperparams {
    pub beta: f64,
    pub lr_init: f64,
    pub lr_final: f64,
    pub steps: u32,
    pub sft_batch: u32,
    pub dpo_batch: u32,
    pub max_seq: u32,
}

impl Default for RecordedHyperparams {
    fn default() -> Self {
        RecordedHyperparams {
            beta: 0.1,
            lr_init: 1e-6,
            lr_final: 1e-7,
            steps: 500,
            sft_batch: 32,
            dpo_batch: 64,
            max_seq: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpoFileEntry {
    pub path: PathBuf,
    pub kind: PairKind,
}

/// Points an external trainer at the emitted dataset files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub sft_files: Vec<PathBuf>,
    pub dpo_files: Vec<DpoFileEntry>,
    pub mixing_policy: String,
    pub recorded_hyperparams: RecordedHyperparams,
}

impl TrainingManifest {
    pub const MIXING_UNIFORM_OVER_KINDS: &'static str = "uniform over pair kinds";

    /// Verify that every listed file exists and parses under its schema.
    ///
    /// Relative paths resolve against `base`.
    pub fn verify(&self, base: &Path) -> Result<(), InvariantError> {
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        for p in &self.sft_files {
            let path = resolve(p);
            crate::dataset::load_dataset::<crate::elicit::SftRecord>(&path)
                .map_err(|e| InvariantError::Manifest(format!("sft file {path:?}: {e}")))?;
        }
        for entry in &self.dpo_files {
            let path = resolve(&entry.path);
            crate::dataset::load_dataset::<crate::pairs::DpoRecord>(&path)
                .map_err(|e| InvariantError::Manifest(format!("dpo file {path:?}: {e}")))?;
        }
        Ok(())
    }
}

/// Map from instruction id to its record, for join-style lookups.
pub fn index_by_id<'a, T, F: Fn(&T) -> &'a str>(items: &'a [T], id: F) -> BTreeMap<&'a str, &'a T> {
    items.iter().map(|x| (id(x), x)).collect()
}
