//! LLM-prompted binary classifiers for pipeline routing.
//!
//! Instruction classification decides whether a prompt demands a factually
//! accurate response and routes it to self-generated supervision and
//! factuality pairing; sentence classification is the ablation that limits
//! the factuality reward to checkable sentences.
//!
//! Parse failures default to fact-based on both classifiers: mis-routing a
//! creative prompt into the factual path costs some pair yield, while the
//! reverse would train on unchecked content.

use crate::gateway::{Gateway, GatewayError, Message};
use crate::templates::TemplateSet;
use crate::types::{Instruction, InstructionKind, SamplingParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierLabel {
    FactBased,
    NonFactBased,
}

/// Outcome of one classifier call, with the raw reply retained for audit.
#[derive(Debug, Clone)]
pub struct ClassifierVerdict {
    pub label: ClassifierLabel,
    pub raw_text: String,
    pub parse_ok: bool,
}

/// Find the first literal `fact-based` / `not fact-based` token, case-insensitive.
///
/// A `fact-based` occurrence that is part of a `not fact-based` occurrence
/// belongs to the negative label.
fn parse_label(reply: &str) -> Option<ClassifierLabel> {
    let lower = reply.to_lowercase();
    let idx = lower.find("fact-based")?;
    if lower[..idx].ends_with("not ") || lower[..idx].ends_with("not-") {
        Some(ClassifierLabel::NonFactBased)
    } else {
        Some(ClassifierLabel::FactBased)
    }
}

fn verdict_from_reply(reply: String) -> ClassifierVerdict {
    match parse_label(&reply) {
        Some(label) => ClassifierVerdict { label, raw_text: reply, parse_ok: true },
        // Routing policy: unparseable replies go to the factual path.
        None => {
            ClassifierVerdict { label: ClassifierLabel::FactBased, raw_text: reply, parse_ok: false }
        }
    }
}

/// Stateless classifier over a gateway backend; calls use greedy decoding so
/// routing is reproducible.
pub struct Classifier<'a> {
    pub gateway: &'a Gateway,
    pub backend_id: String,
    pub templates: &'a TemplateSet,
}

impl Classifier<'_> {
    fn ask(&self, prompt: String) -> Result<ClassifierVerdict, GatewayError> {
        let request =
            self.gateway.request(&self.backend_id, vec![Message::user(prompt)], SamplingParams::greedy())?;
        let completions = self.gateway.cached_complete(&request)?;
        Ok(verdict_from_reply(completions[0].text.clone()))
    }

    /// Decide whether an instruction demands a factual response.
    pub fn classify_instruction(
        &self,
        instruction: &Instruction,
    ) -> Result<ClassifierVerdict, GatewayError> {
        let prompt = self
            .templates
            .render("instruction_classifier", &[("instruction", &instruction.text)])
            .expect("bundled template");
        self.ask(prompt)
    }

    /// Decide whether a response sentence states checkable factual content.
    ///
    /// Blank sentences are non-fact-based without an LLM call; parse failures
    /// come back fact-based so checkable content is never silently dropped.
    pub fn classify_sentence(
        &self,
        sentence: &str,
        context_instruction: &str,
    ) -> Result<ClassifierVerdict, GatewayError> {
        if sentence.trim().is_empty() {
            return Ok(ClassifierVerdict {
                label: ClassifierLabel::NonFactBased,
                raw_text: String::new(),
                parse_ok: true,
            });
        }
        let prompt = self
            .templates
            .render(
                "claim_classifier",
                &[("instruction", context_instruction), ("sentence", sentence)],
            )
            .expect("bundled template");
        self.ask(prompt)
    }

    /// Classify a batch, setting `kind` on each instruction.
    ///
    /// Returns the relabeled instructions plus the (fact, non-fact) split
    /// counts for routing logs.
    pub fn classify_instructions(
        &self,
        instructions: &[Instruction],
    ) -> Result<(Vec<Instruction>, usize, usize), GatewayError> {
        let mut out = Vec::with_capacity(instructions.len());
        let mut n_fact = 0usize;
        let mut n_non_fact = 0usize;
        for instruction in instructions {
            let verdict = self.classify_instruction(instruction)?;
            let mut labeled = instruction.clone();
            labeled.kind = match verdict.label {
                ClassifierLabel::FactBased => InstructionKind::FactBased,
                ClassifierLabel::NonFactBased => InstructionKind::NonFactBased,
            };
            if !verdict.parse_ok {
                log::warn!(
                    "classifier reply for {} was unparseable; routed fact_based",
                    instruction.id
                );
            }
            match labeled.kind {
                InstructionKind::FactBased => n_fact += 1,
                InstructionKind::NonFactBased => n_non_fact += 1,
                InstructionKind::Unclassified => unreachable!("classification always labels"),
            }
            out.push(labeled);
        }
        log::info!("classified {} instructions: {n_fact} fact / {n_non_fact} non-fact", out.len());
        Ok((out, n_fact, n_non_fact))
    }
}
