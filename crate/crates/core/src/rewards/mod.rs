//! The two reward channels.
//!
//! `RM_IF` ([`Scorer::if_judge`]) scores instruction following on a 1–5 scale
//! as the mean of three chain-of-thought judge samples. `RM_fact`
//! ([`Scorer::fact_reward`]) splits a response into sentences, decomposes
//! each into atomic facts, verifies every fact against retrieved support
//! passages, and returns the proportion of supported facts.
//!
//! Unverifiable output never earns reward: verification parse failures count
//! in the denominator as not supported, and a response with zero facts is
//! unscoreable rather than 0-valued.

mod sentences;

pub use sentences::{reconstruct, split_sentences, Sentence};

use crate::classify::{Classifier, ClassifierLabel};
use crate::gateway::{parse_scalar_score, Gateway, GatewayError, Message, ScorePatterns};
use crate::retrieval::{top_supports, LexicalIndex, Reranker};
use crate::templates::TemplateSet;
use crate::types::{FactReward, FactVerdict, JudgeScore, Passage, PerFact, SamplingParams};
use serde::{Deserialize, Serialize};

/// Judge samples averaged per response.
pub const DEFAULT_JUDGE_SAMPLES: u32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RewardError {
    #[error("gateway: {0}")]
    Gateway(#[from] GatewayError),
    #[error("retrieval: {0}")]
    Retrieval(#[from] crate::retrieval::RetrievalError),
}

/// The unit verified against supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactUnit {
    /// Decompose sentences into atomic facts and verify each (the default).
    Atomic,
    /// Verify whole sentences without decomposition (comparison runs only).
    Sentence,
}

#[derive(Debug, Clone)]
pub struct RewardOptions {
    pub fact_unit: FactUnit,
    /// Skip sentences the claim classifier marks non-fact-based.
    pub sentence_filter: bool,
    pub judge_samples: u32,
}

impl Default for RewardOptions {
    fn default() -> Self {
        RewardOptions {
            fact_unit: FactUnit::Atomic,
            sentence_filter: false,
            judge_samples: DEFAULT_JUDGE_SAMPLES,
        }
    }
}

/// Which backend answers which kind of call.
#[derive(Debug, Clone)]
pub struct ScorerBackends {
    pub judge: String,
    pub decompose: String,
    pub verify: String,
    pub sentence_classifier: String,
}

impl ScorerBackends {
    /// Every role on one backend.
    pub fn single(backend_id: &str) -> Self {
        ScorerBackends {
            judge: backend_id.to_string(),
            decompose: backend_id.to_string(),
            verify: backend_id.to_string(),
            sentence_classifier: backend_id.to_string(),
        }
    }
}

/// One verified claim with its evidence trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub fact_text: String,
    /// Doc ids in the order presented in the verification prompt.
    pub supports_used: Vec<String>,
    pub verdict: FactVerdict,
    pub raw_reply: String,
}

/// Per-sentence audit trail of a factuality scoring run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceAudit {
    pub index: usize,
    pub text: String,
    /// Set when sentence filtering ran.
    pub fact_based: Option<bool>,
    /// False when fact decomposition failed to parse for this sentence.
    pub decompose_ok: bool,
    pub n_facts: usize,
}

/// Full output of a factuality scoring run.
#[derive(Debug, Clone)]
pub struct FactOutcome {
    pub reward: FactReward,
    pub records: Vec<VerificationRecord>,
    pub sentences: Vec<SentenceAudit>,
}

/// Parse a dash-prefixed fact list. `(facts, parse_ok)`: an explicit "None"
/// line is an empty list with `parse_ok`, anything else unparseable fails.
pub fn parse_fact_list(reply: &str) -> (Vec<String>, bool) {
    let mut facts = Vec::new();
    let mut saw_none = false;
    for line in reply.lines() {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('-') {
            let fact = rest.trim();
            if !fact.is_empty() {
                facts.push(fact.to_string());
            }
        } else if trimmed.eq_ignore_ascii_case("none") || trimmed.eq_ignore_ascii_case("none.") {
            saw_none = true;
        }
    }
    if !facts.is_empty() {
        (facts, true)
    } else {
        (Vec::new(), saw_none)
    }
}

/// Parse a leading True/False token, case-insensitive; anything else is a
/// parse error, never a supported verdict.
pub fn parse_verdict(reply: &str) -> FactVerdict {
    let lower = reply.trim_start().to_lowercase();
    let word_boundary = |prefix: &str| {
        lower.strip_prefix(prefix).is_some_and(|rest| !rest.starts_with(char::is_alphanumeric))
            || lower == prefix
    };
    if word_boundary("true") {
        FactVerdict::Supported
    } else if word_boundary("false") {
        FactVerdict::NotSupported
    } else {
        FactVerdict::ParseError
    }
}

fn render_supports(supports: &[Passage]) -> String {
    let mut out = String::new();
    for (i, passage) in supports.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("Passage {}: {}\n{}\n", i + 1, passage.title, passage.text));
    }
    out
}

pub struct Scorer<'a> {
    pub gateway: &'a Gateway,
    pub templates: &'a TemplateSet,
    pub backends: ScorerBackends,
    pub options: RewardOptions,
}

impl Scorer<'_> {
    fn classifier(&self) -> Classifier<'_> {
        Classifier {
            gateway: self.gateway,
            backend_id: self.backends.sentence_classifier.clone(),
            templates: self.templates,
        }
    }

    /// Decompose one sentence into atomic facts via a few-shot prompt.
    ///
    /// `(facts, parse_ok)`; a parse failure yields zero facts and never
    /// fabricates content. Backend failures degrade the same way.
    pub fn decompose_facts(&self, sentence: &str) -> (Vec<String>, bool) {
        let prompt = self
            .templates
            .render("decompose", &[("sentence", sentence)])
            .expect("bundled template");
        let request = match self.gateway.request(
            &self.backends.decompose,
            vec![Message::user(prompt)],
            SamplingParams::greedy().with_max_tokens(512),
        ) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("decompose request failed: {e}");
                return (Vec::new(), false);
            }
        };
        match self.gateway.cached_complete(&request) {
            Ok(completions) => parse_fact_list(&completions[0].text),
            Err(e) => {
                log::warn!("decompose call failed: {e}");
                (Vec::new(), false)
            }
        }
    }

    /// Verify one claim against support passages presented in rank order.
    pub fn verify_claim(&self, fact: &str, supports: &[Passage]) -> VerificationRecord {
        let supports_used: Vec<String> = supports.iter().map(|p| p.doc_id.clone()).collect();
        let prompt = self
            .templates
            .render("fact_check", &[("supports", &render_supports(supports)), ("claim", fact)])
            .expect("bundled template");
        let request = match self.gateway.request(
            &self.backends.verify,
            vec![Message::user(prompt)],
            SamplingParams::greedy(),
        ) {
            Ok(r) => r,
            Err(e) => {
                return VerificationRecord {
                    fact_text: fact.to_string(),
                    supports_used,
                    verdict: FactVerdict::ParseError,
                    raw_reply: format!("backend error: {e}"),
                }
            }
        };
        match self.gateway.cached_complete(&request) {
            Ok(completions) => VerificationRecord {
                fact_text: fact.to_string(),
                supports_used,
                verdict: parse_verdict(&completions[0].text),
                raw_reply: completions[0].text.clone(),
            },
            Err(e) => VerificationRecord {
                fact_text: fact.to_string(),
                supports_used,
                verdict: FactVerdict::ParseError,
                raw_reply: format!("backend error: {e}"),
            },
        }
    }

    /// Score a response's factuality against precomputed supports.
    ///
    /// Supports are retrieved per instruction and reused across all of that
    /// instruction's responses; see [`Scorer::fact_reward`] for the variant
    /// that retrieves them.
    pub fn fact_reward_with_supports(
        &self,
        response_text: &str,
        instruction_text: &str,
        supports: &[Passage],
    ) -> Result<FactOutcome, RewardError> {
        let mut per_fact = Vec::new();
        let mut records = Vec::new();
        let mut audits = Vec::new();
        for sentence in split_sentences(response_text) {
            let trimmed = sentence.text.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut audit = SentenceAudit {
                index: sentence.index,
                text: trimmed.to_string(),
                fact_based: None,
                decompose_ok: true,
                n_facts: 0,
            };
            if self.options.sentence_filter {
                let verdict = self.classifier().classify_sentence(trimmed, instruction_text)?;
                let fact_based = verdict.label == ClassifierLabel::FactBased;
                audit.fact_based = Some(fact_based);
                if !fact_based {
                    audits.push(audit);
                    continue;
                }
            }
            let facts: Vec<String> = match self.options.fact_unit {
                FactUnit::Atomic => {
                    let (facts, parse_ok) = self.decompose_facts(trimmed);
                    audit.decompose_ok = parse_ok;
                    facts
                }
                FactUnit::Sentence => vec![trimmed.to_string()],
            };
            audit.n_facts = facts.len();
            for fact in facts {
                let record = self.verify_claim(&fact, supports);
                per_fact.push(PerFact {
                    fact_text: record.fact_text.clone(),
                    sentence_index: sentence.index,
                    verdict: record.verdict,
                });
                records.push(record);
            }
            audits.push(audit);
        }
        Ok(FactOutcome {
            reward: FactReward::from_verdicts(per_fact),
            records,
            sentences: audits,
        })
    }

    /// Retrieve supports (instruction as query) and score a response.
    pub fn fact_reward(
        &self,
        response_text: &str,
        instruction_text: &str,
        index: &LexicalIndex,
        reranker: &dyn Reranker,
        m_supports: usize,
        k_retrieve: usize,
    ) -> Result<FactOutcome, RewardError> {
        let supports = top_supports(index, instruction_text, m_supports, k_retrieve, reranker);
        self.fact_reward_with_supports(response_text, instruction_text, &supports)
    }

    /// Sentence-unit factuality reward (no decomposition); for reward-model
    /// comparison runs only.
    pub fn sentence_level_reward(
        &self,
        response_text: &str,
        instruction_text: &str,
        supports: &[Passage],
    ) -> Result<FactOutcome, RewardError> {
        let scorer = Scorer {
            gateway: self.gateway,
            templates: self.templates,
            backends: self.backends.clone(),
            options: RewardOptions { fact_unit: FactUnit::Sentence, ..self.options.clone() },
        };
        scorer.fact_reward_with_supports(response_text, instruction_text, supports)
    }

    /// Instruction-following judge: `judge_samples` chain-of-thought samples
    /// at generation temperature, averaged over the ones that parse.
    ///
    /// `Ok(None)` is a judge failure (every sample unparseable); such
    /// responses are excluded from IF pairing.
    pub fn if_judge(
        &self,
        instruction_text: &str,
        response_text: &str,
    ) -> Result<Option<JudgeScore>, RewardError> {
        let prompt = self
            .templates
            .render(
                "judge",
                &[("instruction", instruction_text), ("response", response_text)],
            )
            .expect("bundled template");
        // Sampling diversity is what makes averaging meaningful, so the judge
        // runs at generation temperature rather than greedy.
        let sampling = SamplingParams {
            n_samples: self.options.judge_samples,
            max_tokens: 1024,
            ..SamplingParams::default()
        };
        let request =
            self.gateway.request(&self.backends.judge, vec![Message::user(prompt)], sampling)?;
        let outcomes = self.gateway.cached_complete_each(&request);
        let mut samples = Vec::new();
        let mut transport_failures = 0usize;
        let total = outcomes.len();
        for outcome in outcomes {
            match outcome {
                Ok(completion) => {
                    match parse_scalar_score(&completion.text, ScorePatterns::standard()) {
                        Some(score) => samples.push(score),
                        None => log::debug!("judge sample did not parse: {:?}", completion.text),
                    }
                }
                Err(e) => {
                    transport_failures += 1;
                    log::warn!("judge sample failed: {e}");
                }
            }
        }
        if samples.is_empty() && transport_failures == total {
            // Nothing came back at all; surface the backend problem.
            return Err(RewardError::Gateway(GatewayError::Transport {
                backend: self.backends.judge.clone(),
                message: "every judge sample failed".into(),
            }));
        }
        Ok(JudgeScore::from_samples(samples))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{prompt_digest, MockBackend, MockFallback, MockScript};
    use std::sync::Arc;

    const COMMODORE: &str = "The Commodore 64 is a 8-bit home computer that was released by \
                             Commodore International in August 1982.";

    fn passage(i: usize) -> Passage {
        Passage {
            doc_id: format!("d{i}"),
            title: format!("Support {i}"),
            text: format!("support text {i}"),
            retrieval_score: 10.0 - i as f64,
            rerank_score: None,
        }
    }

    struct Fixture {
        gateway: Gateway,
        templates: TemplateSet,
    }

    impl Fixture {
        fn scorer(&self) -> Scorer<'_> {
            Scorer {
                gateway: &self.gateway,
                templates: &self.templates,
                backends: ScorerBackends::single("mock"),
                options: RewardOptions::default(),
            }
        }
    }

    /// Build a fixture whose mock scripts decomposition and verification.
    fn fixture(entries: Vec<(String, u32, String)>) -> Fixture {
        let mut script = MockScript::new(MockFallback::Error);
        for (digest, index, text) in entries {
            script.insert(digest, index, text);
        }
        let mut gateway = Gateway::new();
        gateway.register("mock", Arc::new(MockBackend::new(script)), "mock-model", 4);
        Fixture { gateway, templates: TemplateSet::bundled() }
    }

    fn decompose_digest(templates: &TemplateSet, sentence: &str) -> String {
        let prompt = templates.render("decompose", &[("sentence", sentence)]).unwrap();
        prompt_digest(&[Message::user(prompt)])
    }

    fn verify_digest(templates: &TemplateSet, fact: &str, supports: &[Passage]) -> String {
        let prompt = templates
            .render("fact_check", &[("supports", &render_supports(supports)), ("claim", fact)])
            .unwrap();
        prompt_digest(&[Message::user(prompt)])
    }

    fn judge_digest(templates: &TemplateSet, instruction: &str, response: &str) -> String {
        let prompt = templates
            .render("judge", &[("instruction", instruction), ("response", response)])
            .unwrap();
        prompt_digest(&[Message::user(prompt)])
    }

    #[test]
    fn fact_list_parsing() {
        let reply = "- The Commodore 64 is a home computer\n- The Commodore 64 is 8-bit\n\
                     - The Commodore 64 was released by Commodore International\n\
                     - The Commodore 64 was released in August 1982";
        let (facts, ok) = parse_fact_list(reply);
        assert!(ok);
        assert_eq!(facts.len(), 4);
        assert_eq!(facts[0], "The Commodore 64 is a home computer");

        let (none_facts, none_ok) = parse_fact_list("None");
        assert!(none_ok);
        assert!(none_facts.is_empty());

        let (bad_facts, bad_ok) = parse_fact_list("I cannot decompose this.");
        assert!(!bad_ok);
        assert!(bad_facts.is_empty());
    }

    #[test]
    fn verdict_parsing() {
        assert_eq!(parse_verdict("True"), FactVerdict::Supported);
        assert_eq!(parse_verdict("  true, the passages confirm it"), FactVerdict::Supported);
        assert_eq!(parse_verdict("false, because the date is wrong"), FactVerdict::NotSupported);
        assert_eq!(parse_verdict("FALSE"), FactVerdict::NotSupported);
        assert_eq!(parse_verdict("Unsure"), FactVerdict::ParseError);
        assert_eq!(parse_verdict("truthful"), FactVerdict::ParseError);
        assert_eq!(parse_verdict(""), FactVerdict::ParseError);
    }

    #[test]
    fn decompose_returns_scripted_facts() {
        let templates = TemplateSet::bundled();
        let fx = fixture(vec![(
            decompose_digest(&templates, COMMODORE),
            0,
            "- The Commodore 64 is a home computer\n- The Commodore 64 is 8-bit".into(),
        )]);
        let (facts, ok) = fx.scorer().decompose_facts(COMMODORE);
        assert!(ok);
        assert_eq!(facts.len(), 2);
    }

    #[test]
    fn decompose_none_reply_is_empty_but_ok() {
        let templates = TemplateSet::bundled();
        let fx = fixture(vec![(decompose_digest(&templates, "Of course."), 0, "None".into())]);
        let (facts, ok) = fx.scorer().decompose_facts("Of course.");
        assert!(ok);
        assert!(facts.is_empty());
    }

    #[test]
    fn verify_claim_records_supports_in_order() {
        let templates = TemplateSet::bundled();
        let supports: Vec<Passage> = (0..3).map(passage).collect();
        let fx = fixture(vec![(verify_digest(&templates, "a fact", &supports), 0, "True".into())]);
        let record = fx.scorer().verify_claim("a fact", &supports);
        assert_eq!(record.verdict, FactVerdict::Supported);
        assert_eq!(record.supports_used, vec!["d0", "d1", "d2"]);
    }

    /// End-to-end scripted fixture: 2 sentences -> 5 facts -> 3 supported.
    #[test]
    fn fact_reward_end_to_end_recount() {
        let templates = TemplateSet::bundled();
        let supports: Vec<Passage> = (0..2).map(passage).collect();
        let s1 = "Alpha was founded in 1901.";
        let s2 = "It employs 10 people and is based in Oslo and makes widgets.";
        let response = format!("{s1} {s2}");
        let facts1 = ["Alpha was founded in 1901"];
        let facts2 = ["Alpha employs 10 people", "Alpha is based in Oslo", "Alpha makes widgets", "Alpha exists"];
        let verdicts = [
            ("Alpha was founded in 1901", "True"),
            ("Alpha employs 10 people", "False, likely wrong"),
            ("Alpha is based in Oslo", "True"),
            ("Alpha makes widgets", "true"),
            ("Alpha exists", "Unsure"),
        ];
        let mut entries = vec![
            (
                decompose_digest(&templates, s1),
                0,
                facts1.iter().map(|f| format!("- {f}")).collect::<Vec<_>>().join("\n"),
            ),
            (
                decompose_digest(&templates, s2),
                0,
                facts2.iter().map(|f| format!("- {f}")).collect::<Vec<_>>().join("\n"),
            ),
        ];
        for (fact, reply) in verdicts {
            entries.push((verify_digest(&templates, fact, &supports), 0, reply.into()));
        }
        let fx = fixture(entries);
        let outcome =
            fx.scorer().fact_reward_with_supports(&response, "tell me about Alpha", &supports).unwrap();
        // Brute-force recount of the script's verdict table.
        assert_eq!(outcome.reward.n_facts, 5);
        assert_eq!(outcome.reward.n_correct, 3);
        assert_eq!(outcome.reward.value, Some(0.6));
        assert_eq!(outcome.reward.per_fact.len(), 5);
        assert_eq!(
            outcome.reward.per_fact.iter().filter(|p| p.verdict == FactVerdict::ParseError).count(),
            1
        );
        // Ledger matches the script.
        assert_eq!(outcome.records[0].raw_reply, "True");
        assert_eq!(outcome.sentences.len(), 2);
        assert_eq!(outcome.sentences[1].n_facts, 4);
    }

    #[test]
    fn zero_facts_is_unscoreable_not_zero() {
        let templates = TemplateSet::bundled();
        let fx = fixture(vec![(decompose_digest(&templates, "Of course."), 0, "None".into())]);
        let outcome = fx.scorer().fact_reward_with_supports("Of course.", "q", &[]).unwrap();
        assert!(outcome.reward.is_unscoreable());
        assert_eq!(outcome.reward.value, None);
    }

    #[test]
    fn proportion_arithmetic() {
        let per_fact: Vec<PerFact> = [
            FactVerdict::Supported,
            FactVerdict::Supported,
            FactVerdict::Supported,
            FactVerdict::NotSupported,
        ]
        .iter()
        .enumerate()
        .map(|(i, v)| PerFact { fact_text: format!("f{i}"), sentence_index: 0, verdict: *v })
        .collect();
        let reward = FactReward::from_verdicts(per_fact);
        assert_eq!(reward.value, Some(0.75));
    }

    #[test]
    fn sentence_level_three_sentences() {
        let templates = TemplateSet::bundled();
        let supports: Vec<Passage> = (0..1).map(passage).collect();
        let text = "Alpha is real. Beta is fake. Gamma is real.";
        let entries = vec![
            (verify_digest(&templates, "Alpha is real.", &supports), 0, "True".to_string()),
            (verify_digest(&templates, "Beta is fake.", &supports), 0, "False".to_string()),
            (verify_digest(&templates, "Gamma is real.", &supports), 0, "True".to_string()),
        ];
        let fx = fixture(entries);
        let outcome = fx.scorer().sentence_level_reward(text, "q", &supports).unwrap();
        assert_eq!(outcome.reward.n_facts, 3);
        assert_eq!(outcome.reward.value, Some(2.0 / 3.0));
    }

    #[test]
    fn atomic_and_sentence_units_diverge_on_mixed_sentences() {
        // One sentence holding one true and one false fact: atomic scores
        // 0.5; the strict sentence-unit verifier scores 0.0.
        let templates = TemplateSet::bundled();
        let supports: Vec<Passage> = (0..1).map(passage).collect();
        let text = "Alpha was founded in 1901 in Oslo.";
        let entries = vec![
            (
                decompose_digest(&templates, text),
                0,
                "- Alpha was founded in 1901\n- Alpha was founded in Oslo".to_string(),
            ),
            (
                verify_digest(&templates, "Alpha was founded in 1901", &supports),
                0,
                "True".to_string(),
            ),
            (
                verify_digest(&templates, "Alpha was founded in Oslo", &supports),
                0,
                "False".to_string(),
            ),
            (verify_digest(&templates, text, &supports), 0, "False, partly wrong".to_string()),
        ];
        let fx = fixture(entries);
        let atomic = fx.scorer().fact_reward_with_supports(text, "q", &supports).unwrap();
        let sentence = fx.scorer().sentence_level_reward(text, "q", &supports).unwrap();
        assert_eq!(atomic.reward.value, Some(0.5));
        assert_eq!(sentence.reward.value, Some(0.0));
    }

    #[test]
    fn judge_means_three_samples() {
        let templates = TemplateSet::bundled();
        let digest = judge_digest(&templates, "q", "r");
        let fx = fixture(vec![
            (digest.clone(), 0, "Solid answer. Score: 4".into()),
            (digest.clone(), 1, "Excellent. Score: 5".into()),
            (digest, 2, "Adequate. Score: 3".into()),
        ]);
        let score = fx.scorer().if_judge("q", "r").unwrap().unwrap();
        assert_eq!(score.mean, 4.0);
        assert_eq!(score.samples, vec![4.0, 5.0, 3.0]);
    }

    #[test]
    fn judge_averages_over_parsed_subset() {
        let templates = TemplateSet::bundled();
        let digest = judge_digest(&templates, "q", "r");
        let fx = fixture(vec![
            (digest.clone(), 0, "Score: 5".into()),
            (digest.clone(), 1, "no score given".into()),
            (digest, 2, "Score: 5".into()),
        ]);
        let score = fx.scorer().if_judge("q", "r").unwrap().unwrap();
        assert_eq!(score.samples.len(), 2);
        assert_eq!(score.mean, 5.0);
    }

    #[test]
    fn judge_failure_when_nothing_parses() {
        let templates = TemplateSet::bundled();
        let digest = judge_digest(&templates, "q", "r");
        let fx = fixture(vec![
            (digest.clone(), 0, "gibberish".into()),
            (digest.clone(), 1, "more gibberish".into()),
            (digest, 2, "still nothing".into()),
        ]);
        assert!(fx.scorer().if_judge("q", "r").unwrap().is_none());
    }

    #[test]
    fn sentence_filter_skips_non_fact_sentences() {
        let templates = TemplateSet::bundled();
        let supports: Vec<Passage> = (0..1).map(passage).collect();
        let text = "Of course. Alpha was founded in 1901.";
        let claim_digest = |sentence: &str| {
            let prompt = templates
                .render("claim_classifier", &[("instruction", "q"), ("sentence", sentence)])
                .unwrap();
            prompt_digest(&[Message::user(prompt)])
        };
        let entries = vec![
            (claim_digest("Of course."), 0, "not fact-based".to_string()),
            (claim_digest("Alpha was founded in 1901."), 0, "fact-based".to_string()),
            (
                decompose_digest(&templates, "Alpha was founded in 1901."),
                0,
                "- Alpha was founded in 1901".to_string(),
            ),
            (
                verify_digest(&templates, "Alpha was founded in 1901", &supports),
                0,
                "True".to_string(),
            ),
        ];
        let fx = fixture(entries);
        let mut scorer = fx.scorer();
        scorer.options.sentence_filter = true;
        let outcome = scorer.fact_reward_with_supports(text, "q", &supports).unwrap();
        assert_eq!(outcome.reward.n_facts, 1);
        assert_eq!(outcome.sentences[0].fact_based, Some(false));
        assert_eq!(outcome.sentences[1].fact_based, Some(true));
    }
}
