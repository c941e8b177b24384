//! Knowledge elicitation from a base model.
//!
//! Few-shot prompts put the most similar demonstration adjacent to the
//! target instruction and render deterministically, so repeated runs hit the
//! response cache. Generated continuations are truncated at the first
//! demo-boundary marker to stop the base model from fabricating a next demo.
//!
//! SFT routing follows the factuality-aware recipe: non-fact-based
//! instructions keep their human response; fact-based instructions take the
//! base model's own sampled responses.

use crate::dataset::Record;
use crate::gateway::{Gateway, GatewayError};
use crate::retrieval::{similar_instructions, SeedInstruction};
use crate::types::{
    Instruction, InstructionKind, InvariantError, Passage, Response, ResponseOrigin,
    SamplingParams,
};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Sentinel line that opens every demonstration block; generation is cut at
/// its first occurrence in a continuation.
pub const DEMO_BOUNDARY_MARKER: &str = "### Instruction:";
const RESPONSE_MARKER: &str = "### Response:";
const PASSAGE_MARKER: &str = "### Passage:";

/// Samples drawn per fact-based instruction for the SFT dataset.
pub const DEFAULT_N_SFT_SAMPLES: u32 = 10;
/// Samples drawn per instruction for preference-pair candidates.
pub const DEFAULT_N_DPO_SAMPLES: u32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum ElicitError {
    #[error("retrieval: {0}")]
    Retrieval(#[from] crate::retrieval::RetrievalError),
    #[error("gateway: {0}")]
    Gateway(#[from] GatewayError),
    #[error("instruction {0} has no human response")]
    MissingHumanResponse(String),
}

/// One demonstration block: an instruction, its human response, and (in RAG
/// mode) the demo's own top-1 support passage.
#[derive(Debug, Clone, PartialEq)]
pub struct Demo {
    pub instruction: String,
    pub response: String,
    pub support: Option<Passage>,
}

/// A rendered-ready few-shot prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct FewShotPrompt {
    pub demos: Vec<Demo>,
    pub target_instruction: String,
    /// Support passages prepended to the target block (RAG mode only).
    pub rag_supports: Option<Vec<Passage>>,
}

/// A seed (instruction, human response) pair demos are drawn from.
#[derive(Debug, Clone)]
pub struct SeedPair {
    pub instruction_id: String,
    pub instruction_text: String,
    pub response_text: String,
}

/// Select top-k similar demos for `target`, most similar last.
///
/// The target itself is excluded by id; a seed with identical text but a
/// different id stays eligible and will rank nearest.
pub fn build_fewshot_prompt(
    target: &Instruction,
    seed_pairs: &[SeedPair],
    k: usize,
) -> Result<FewShotPrompt, ElicitError> {
    let seeds: Vec<SeedInstruction> = seed_pairs
        .iter()
        .filter(|p| p.instruction_id != target.id)
        .map(|p| SeedInstruction { id: p.instruction_id.clone(), text: p.instruction_text.clone() })
        .collect();
    let ranked = similar_instructions(&seeds, &target.id, &target.text, k)?;
    let by_id: HashMap<&str, &SeedPair> =
        seed_pairs.iter().map(|p| (p.instruction_id.as_str(), p)).collect();
    // similar_instructions returns most similar first; the nearest demo must
    // sit adjacent to the target, so reverse into most-similar-last.
    let demos: Vec<Demo> = ranked
        .iter()
        .rev()
        .map(|s| {
            let pair = by_id[s.id.as_str()];
            Demo {
                instruction: pair.instruction_text.clone(),
                response: pair.response_text.clone(),
                support: None,
            }
        })
        .collect();
    Ok(FewShotPrompt { demos, target_instruction: target.text.clone(), rag_supports: None })
}

/// Attach retrieval augmentation: the target block carries all `supports`
/// (normally the top-10), each demo its own precomputed top-1 passage.
///
/// Duplicate passages between demos and target are retained, not deduped.
pub fn build_rag_prompt(
    target: &Instruction,
    supports: Vec<Passage>,
    demo_pairs: Vec<Demo>,
) -> FewShotPrompt {
    if supports.is_empty() {
        log::warn!("no supports retrieved for {}; proceeding without passages", target.id);
    }
    FewShotPrompt {
        demos: demo_pairs,
        target_instruction: target.text.clone(),
        rag_supports: Some(supports),
    }
}

impl FewShotPrompt {
    /// Render as alternating instruction/response blocks ending with the
    /// target instruction and an open response slot. Deterministic.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for demo in &self.demos {
            if let Some(support) = &demo.support {
                out.push_str(PASSAGE_MARKER);
                out.push('\n');
                out.push_str(&support.title);
                out.push('\n');
                out.push_str(&support.text);
                out.push('\n');
            }
            out.push_str(DEMO_BOUNDARY_MARKER);
            out.push('\n');
            out.push_str(&demo.instruction);
            out.push('\n');
            out.push_str(RESPONSE_MARKER);
            out.push('\n');
            out.push_str(&demo.response);
            out.push_str("\n\n");
        }
        if let Some(supports) = &self.rag_supports {
            for support in supports {
                out.push_str(PASSAGE_MARKER);
                out.push('\n');
                out.push_str(&support.title);
                out.push('\n');
                out.push_str(&support.text);
                out.push('\n');
            }
        }
        out.push_str(DEMO_BOUNDARY_MARKER);
        out.push('\n');
        out.push_str(&self.target_instruction);
        out.push('\n');
        out.push_str(RESPONSE_MARKER);
        out.push('\n');
        out
    }

    fn origin(&self) -> ResponseOrigin {
        if self.rag_supports.is_some() {
            ResponseOrigin::PtRag
        } else {
            ResponseOrigin::PtFewshot
        }
    }
}

/// Cut a raw continuation at the first demo-boundary marker.
pub fn truncate_at_marker(text: &str) -> &str {
    match text.find(DEMO_BOUNDARY_MARKER) {
        Some(idx) => text[..idx].trim_end(),
        None => text.trim_end(),
    }
}

/// A sample index the backend failed on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleFailure {
    pub sample_index: u32,
    pub error: String,
}

#[derive(Debug)]
pub struct SampledResponses {
    pub responses: Vec<Response>,
    pub failures: Vec<SampleFailure>,
}

/// Draw `n` continuations of a few-shot prompt.
///
/// One prompt is rendered and reused for all samples (cache-friendly).
/// Backend failures on individual samples reduce the count and are recorded;
/// zero responses means the caller should flag the instruction as failed.
pub fn sample_responses(
    prompt: &FewShotPrompt,
    target_instruction_id: &str,
    n: u32,
    sampling: &SamplingParams,
    gateway: &Gateway,
    backend_id: &str,
) -> Result<SampledResponses, ElicitError> {
    let request = gateway.request(
        backend_id,
        vec![crate::gateway::Message::user(prompt.render())],
        sampling.clone().with_n(n),
    )?;
    let mut responses = Vec::new();
    let mut failures = Vec::new();
    for (index, outcome) in gateway.cached_complete_each(&request).into_iter().enumerate() {
        match outcome {
            Ok(completion) => {
                let text = truncate_at_marker(&completion.text).to_string();
                responses.push(Response::sampled(
                    target_instruction_id,
                    text,
                    prompt.origin(),
                    completion.sample_index,
                    sampling.clone().with_n(n),
                ));
            }
            Err(error) => {
                failures.push(SampleFailure { sample_index: index as u32, error: error.to_string() });
            }
        }
    }
    Ok(SampledResponses { responses, failures })
}

// ---------------------------------------------------------------------------
// SFT dataset assembly
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SftRoute {
    HumanResponse,
    PtResponse,
}

/// Routing policy for SFT assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SftPolicy {
    /// Human responses for non-fact-based instructions, sampled responses for
    /// fact-based ones.
    Classified,
    /// Ablation without the classifier: every instruction emits its human
    /// example plus all sampled examples; the trainer samples the two sources
    /// with equal probability per instruction (recorded in the manifest).
    NoClassifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftExample {
    pub instruction_id: String,
    pub response_id: String,
    pub route: SftRoute,
}

/// `sft_dataset.jsonl` row: the example joined with its text fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub instruction_id: String,
    pub instruction: String,
    pub response_id: String,
    pub response: String,
    pub route: SftRoute,
}

impl Record for SftRecord {
    fn record_id(&self) -> &str {
        &self.response_id
    }
    fn check(&self) -> Result<(), InvariantError> {
        Ok(())
    }
}

#[derive(Debug)]
pub struct SftBuild {
    pub examples: Vec<SftExample>,
    /// Fact-based instructions dropped for lack of any sampled response.
    pub excluded: Vec<String>,
}

/// Assemble SFT examples under the routing policy.
///
/// `human` maps instruction id to its human response; `pt` maps instruction
/// id to its sampled responses in sample order.
pub fn build_sft_dataset(
    instructions: &[Instruction],
    human: &HashMap<String, Response>,
    pt: &HashMap<String, Vec<Response>>,
    policy: SftPolicy,
) -> Result<SftBuild, ElicitError> {
    let mut examples = Vec::new();
    let mut excluded = Vec::new();
    for instruction in instructions {
        let human_response = human
            .get(&instruction.id)
            .ok_or_else(|| ElicitError::MissingHumanResponse(instruction.id.clone()))?;
        let samples = pt.get(&instruction.id).map(|v| v.as_slice()).unwrap_or(&[]);
        let route_pt = |examples: &mut Vec<SftExample>| {
            for sample in samples {
                examples.push(SftExample {
                    instruction_id: instruction.id.clone(),
                    response_id: sample.id.clone(),
                    route: SftRoute::PtResponse,
                });
            }
        };
        match policy {
            SftPolicy::Classified => match instruction.kind {
                InstructionKind::NonFactBased => {
                    examples.push(SftExample {
                        instruction_id: instruction.id.clone(),
                        response_id: human_response.id.clone(),
                        route: SftRoute::HumanResponse,
                    });
                }
                // Unclassified routes like fact-based, matching the
                // conservative parse-failure policy.
                InstructionKind::FactBased | InstructionKind::Unclassified => {
                    if samples.is_empty() {
                        log::warn!(
                            "fact-based instruction {} has no sampled responses; excluded",
                            instruction.id
                        );
                        excluded.push(instruction.id.clone());
                    } else {
                        route_pt(&mut examples);
                    }
                }
            },
            SftPolicy::NoClassifier => {
                examples.push(SftExample {
                    instruction_id: instruction.id.clone(),
                    response_id: human_response.id.clone(),
                    route: SftRoute::HumanResponse,
                });
                route_pt(&mut examples);
            }
        }
    }
    Ok(SftBuild { examples, excluded })
}

/// Join SFT examples with their text fields for the output file.
pub fn join_sft_records(
    build: &SftBuild,
    instructions: &[Instruction],
    responses_by_id: &HashMap<String, &Response>,
) -> Vec<SftRecord> {
    let instruction_by_id: HashMap<&str, &Instruction> =
        instructions.iter().map(|i| (i.id.as_str(), i)).collect();
    build
        .examples
        .iter()
        .filter_map(|example| {
            let instruction = instruction_by_id.get(example.instruction_id.as_str())?;
            let response = responses_by_id.get(&example.response_id)?;
            Some(SftRecord {
                instruction_id: example.instruction_id.clone(),
                instruction: instruction.text.clone(),
                response_id: example.response_id.clone(),
                response: response.text.clone(),
                route: example.route,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{prompt_digest, Message, MockBackend, MockFallback, MockScript};
    use crate::types::InstructionSource;
    use std::sync::Arc;

    fn seed(texts: &[&str]) -> (Vec<Instruction>, Vec<SeedPair>) {
        let instructions: Vec<Instruction> =
            texts.iter().map(|t| Instruction::new(*t, InstructionSource::SeedIft)).collect();
        let pairs = instructions
            .iter()
            .map(|i| SeedPair {
                instruction_id: i.id.clone(),
                instruction_text: i.text.clone(),
                response_text: format!("human answer to: {}", i.text),
            })
            .collect();
        (instructions, pairs)
    }

    #[test]
    fn zero_demos_renders_bare_target() {
        let (instructions, pairs) = seed(&["explain tides", "write a poem"]);
        let prompt = build_fewshot_prompt(&instructions[0], &pairs, 0).unwrap();
        assert!(prompt.demos.is_empty());
        let rendered = prompt.render();
        assert_eq!(
            rendered,
            format!("{DEMO_BOUNDARY_MARKER}\nexplain tides\n{RESPONSE_MARKER}\n")
        );
    }

    #[test]
    fn six_seeds_give_five_similarity_ordered_demos() {
        let texts = [
            "tell me a bio of marie curie",
            "tell me a bio of albert einstein",
            "tell me about the history of coffee",
            "write a limerick about cats",
            "explain how tides work",
            "tell me a bio of isaac newton",
        ];
        let (instructions, pairs) = seed(&texts);
        let target = &instructions[0];
        let prompt = build_fewshot_prompt(target, &pairs, 5).unwrap();
        assert_eq!(prompt.demos.len(), 5);
        // Brute-force similarity oracle over the 5 non-target seeds: the
        // other "tell me a bio of" seeds must outrank the unrelated ones,
        // and the nearest demo must be last.
        let last = &prompt.demos[4].instruction;
        assert!(last.starts_with("tell me a bio of"), "nearest demo last, got {last}");
        for demo in &prompt.demos {
            assert_ne!(demo.instruction, target.text, "target must not demo itself");
        }
    }

    #[test]
    fn identical_text_different_id_is_nearest_demo() {
        let (mut instructions, mut pairs) = seed(&["explain how tides work", "write a poem"]);
        // A second seed with the same text but a different id (different source).
        let twin = Instruction::new("explain how tides work", InstructionSource::External);
        pairs.push(SeedPair {
            instruction_id: twin.id.clone(),
            instruction_text: twin.text.clone(),
            response_text: "the twin answer".into(),
        });
        instructions.push(twin);
        let prompt = build_fewshot_prompt(&instructions[0], &pairs, 2).unwrap();
        assert_eq!(prompt.demos.last().unwrap().response, "the twin answer");
    }

    #[test]
    fn rag_prompt_prepends_supports_and_demo_passages() {
        let (instructions, _) = seed(&["tell me a bio of marie curie"]);
        let support = |i: usize| Passage {
            doc_id: format!("d{i}"),
            title: format!("T{i}"),
            text: format!("passage {i}"),
            retrieval_score: 1.0,
            rerank_score: None,
        };
        let demos = vec![Demo {
            instruction: "demo q".into(),
            response: "demo a".into(),
            support: Some(support(99)),
        }];
        let supports: Vec<Passage> = (0..10).map(support).collect();
        let prompt = build_rag_prompt(&instructions[0], supports, demos);
        let rendered = prompt.render();
        assert_eq!(rendered.matches(PASSAGE_MARKER).count(), 11, "10 target + 1 demo");
        // Truncation: fewer supports means fewer passages, no padding.
        let prompt3 = build_rag_prompt(&instructions[0], (0..3).map(support).collect(), vec![]);
        assert_eq!(prompt3.render().matches(PASSAGE_MARKER).count(), 3);
    }

    #[test]
    fn duplicate_demo_and_target_passages_are_retained() {
        let (instructions, _) = seed(&["q"]);
        let p = Passage {
            doc_id: "d0".into(),
            title: "T".into(),
            text: "same passage".into(),
            retrieval_score: 1.0,
            rerank_score: None,
        };
        let demos = vec![Demo {
            instruction: "demo q".into(),
            response: "demo a".into(),
            support: Some(p.clone()),
        }];
        let prompt = build_rag_prompt(&instructions[0], vec![p], demos);
        assert_eq!(prompt.render().matches("same passage").count(), 2);
    }

    #[test]
    fn samples_come_back_in_index_order() {
        let (instructions, pairs) = seed(&["explain how tides work", "write a poem"]);
        let prompt = build_fewshot_prompt(&instructions[0], &pairs, 1).unwrap();
        let digest = prompt_digest(&[Message::user(prompt.render())]);
        let mut script = MockScript::new(MockFallback::Error);
        for i in 0..10 {
            script.insert(digest.clone(), i, format!("continuation {i}"));
        }
        let mut gw = Gateway::new();
        gw.register("pt", Arc::new(MockBackend::new(script)), "base", 4);
        let sampling = SamplingParams::default();
        let out =
            sample_responses(&prompt, &instructions[0].id, 10, &sampling, &gw, "pt").unwrap();
        assert_eq!(out.responses.len(), 10);
        assert!(out.failures.is_empty());
        for (i, r) in out.responses.iter().enumerate() {
            assert_eq!(r.text, format!("continuation {i}"));
            assert_eq!(r.origin, ResponseOrigin::PtFewshot);
            assert_eq!(r.sampling.as_ref().unwrap().temperature, 0.7);
        }
    }

    #[test]
    fn continuation_is_cut_at_demo_boundary() {
        let (instructions, pairs) = seed(&["explain how tides work", "write a poem"]);
        let prompt = build_fewshot_prompt(&instructions[0], &pairs, 1).unwrap();
        let digest = prompt_digest(&[Message::user(prompt.render())]);
        let mut script = MockScript::new(MockFallback::Error);
        script.insert(
            digest,
            0,
            format!("Tides are caused by the moon.\n\n{DEMO_BOUNDARY_MARKER}\nfabricated next demo"),
        );
        let mut gw = Gateway::new();
        gw.register("pt", Arc::new(MockBackend::new(script)), "base", 4);
        let out = sample_responses(
            &prompt,
            &instructions[0].id,
            1,
            &SamplingParams::default(),
            &gw,
            "pt",
        )
        .unwrap();
        assert_eq!(out.responses[0].text, "Tides are caused by the moon.");
    }

    #[test]
    fn one_scripted_failure_gives_three_of_four() {
        let (instructions, pairs) = seed(&["explain how tides work", "write a poem"]);
        let prompt = build_fewshot_prompt(&instructions[0], &pairs, 1).unwrap();
        let digest = prompt_digest(&[Message::user(prompt.render())]);
        let mut script = MockScript::new(MockFallback::Error);
        for i in [0u32, 1, 3] {
            script.insert(digest.clone(), i, format!("ok {i}"));
        }
        let mut gw = Gateway::new();
        // Client-side expansion so per-sample outcomes are independent.
        gw.register(
            "pt",
            Arc::new(MockBackend::new(script).without_multi_sample()),
            "base",
            4,
        );
        let out = sample_responses(
            &prompt,
            &instructions[0].id,
            4,
            &SamplingParams::default(),
            &gw,
            "pt",
        )
        .unwrap();
        assert_eq!(out.responses.len(), 3);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].sample_index, 2);
    }

    fn routing_fixture(
        n_fact: usize,
        n_non_fact: usize,
        n_pt: usize,
    ) -> (Vec<Instruction>, HashMap<String, Response>, HashMap<String, Vec<Response>>) {
        let mut instructions = Vec::new();
        let mut human = HashMap::new();
        let mut pt = HashMap::new();
        for i in 0..(n_fact + n_non_fact) {
            let mut instruction =
                Instruction::new(format!("instruction {i}"), InstructionSource::SeedIft);
            instruction.kind =
                if i < n_fact { InstructionKind::FactBased } else { InstructionKind::NonFactBased };
            human.insert(instruction.id.clone(), Response::human(&instruction.id, "human"));
            if instruction.kind == InstructionKind::FactBased {
                let samples: Vec<Response> = (0..n_pt)
                    .map(|s| {
                        Response::sampled(
                            &instruction.id,
                            format!("sample {s}"),
                            ResponseOrigin::PtFewshot,
                            s as u32,
                            SamplingParams::default(),
                        )
                    })
                    .collect();
                pt.insert(instruction.id.clone(), samples);
            }
            instructions.push(instruction);
        }
        (instructions, human, pt)
    }

    #[test]
    fn routing_splits_human_and_pt() {
        let (instructions, human, pt) = routing_fixture(1, 1, 10);
        let build = build_sft_dataset(&instructions, &human, &pt, SftPolicy::Classified).unwrap();
        assert_eq!(build.examples.len(), 11, "10 pt examples + 1 human example");
        let human_routed: Vec<_> =
            build.examples.iter().filter(|e| e.route == SftRoute::HumanResponse).collect();
        assert_eq!(human_routed.len(), 1);
        assert_eq!(human_routed[0].instruction_id, instructions[1].id);
    }

    #[test]
    fn all_non_fact_output_is_exactly_the_human_seed() {
        let (instructions, human, pt) = routing_fixture(0, 4, 0);
        let build = build_sft_dataset(&instructions, &human, &pt, SftPolicy::Classified).unwrap();
        assert_eq!(build.examples.len(), 4);
        assert!(build.examples.iter().all(|e| e.route == SftRoute::HumanResponse));
    }

    #[test]
    fn fact_instruction_without_samples_is_excluded() {
        let (instructions, human, mut pt) = routing_fixture(2, 0, 3);
        pt.remove(&instructions[0].id);
        let build = build_sft_dataset(&instructions, &human, &pt, SftPolicy::Classified).unwrap();
        assert_eq!(build.excluded, vec![instructions[0].id.clone()]);
        assert_eq!(build.examples.len(), 3);
    }

    #[test]
    fn no_classifier_policy_emits_both_sources() {
        let (instructions, human, pt) = routing_fixture(2, 0, 10);
        let build = build_sft_dataset(&instructions, &human, &pt, SftPolicy::NoClassifier).unwrap();
        // Per instruction: 1 human + 10 pt.
        assert_eq!(build.examples.len(), 22);
    }

    #[test]
    fn seed_scale_routing_arithmetic() {
        // A routing dry run at the published seed split: 1,013 fact-based and
        // 2,187 non-fact-based instructions with n_pt samples each yield
        // 1,013 * n_pt + 2,187 examples.
        let n_pt = 2;
        let (instructions, human, pt) = routing_fixture(1_013, 2_187, n_pt);
        let build = build_sft_dataset(&instructions, &human, &pt, SftPolicy::Classified).unwrap();
        assert_eq!(build.examples.len(), 1_013 * n_pt + 2_187);
        // Routing soundness: no fact-based instruction got a human response.
        let fact_ids: std::collections::HashSet<_> = instructions
            .iter()
            .filter(|i| i.kind == InstructionKind::FactBased)
            .map(|i| i.id.as_str())
            .collect();
        assert!(build
            .examples
            .iter()
            .filter(|e| e.route == SftRoute::HumanResponse)
            .all(|e| !fact_ids.contains(e.instruction_id.as_str())));
    }
}
