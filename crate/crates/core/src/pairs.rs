//! Preference-pair construction.
//!
//! Each builder consumes scored candidates for one instruction and either
//! emits pairs or one discard entry with a reason, so pair yield is fully
//! auditable: every candidate instruction lands on exactly one side.
//!
//! Rules at a glance (defaults from the alignment recipe):
//!
//! - IF pairs: argmax/argmin of the judge mean; exact ties discard.
//! - Factuality max-min: argmax/argmin of the fact value; exact ties discard;
//!   a judge-mean gap above 0.5 between the chosen two discards.
//! - Factuality enumeration: all candidate pairs with fact difference ≥ 0.2
//!   and judge gap ≤ 0.5.
//! - Composite: max-min over `if_mean + 5 * fact_value`, no gap filter.
//! - Biography: all pairs by FActScore, exact ties dropped.
//!
//! Tie-breaking is by lowest response index everywhere so outputs are
//! reproducible.

use crate::dataset::Record;
use crate::types::{
    InvariantError, PairKind, PairSelection, PreferencePair, RecordedHyperparams,
    TrainingManifest,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Discard threshold on |ΔRM_IF| between the chosen factuality pair.
pub const DEFAULT_IF_GAP: f64 = 0.5;
/// Enumeration band: fact differences below this count as equal.
pub const DEFAULT_ENUM_BAND: f64 = 0.2;
/// Composite reward weights for (judge mean, fact value).
pub const COMPOSITE_WEIGHTS: (f64, f64) = (1.0, 5.0);

/// Thresholds driving the factuality builders. Defaults are the published
/// recipe values; ablations override them through configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRules {
    pub if_gap: f64,
    pub enum_band: f64,
    pub composite_weights: (f64, f64),
}

impl Default for PairRules {
    fn default() -> Self {
        PairRules {
            if_gap: DEFAULT_IF_GAP,
            enum_band: DEFAULT_ENUM_BAND,
            composite_weights: COMPOSITE_WEIGHTS,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PairError {
    #[error("no pairs to assemble: both IF and factuality batches are empty")]
    NothingToAssemble,
    #[error("unknown {kind} id {id} while joining texts")]
    UnknownId { kind: &'static str, id: String },
    #[error("dataset: {0}")]
    Dataset(#[from] crate::dataset::DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    TiedReward,
    IfGapExceeded,
    BelowBand,
    Unscoreable,
    JudgeFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discard {
    pub instruction_id: String,
    pub reason: DiscardReason,
}

/// What one instruction contributed.
#[derive(Debug, Clone, PartialEq)]
pub enum PairOutcome {
    Pairs(Vec<PreferencePair>),
    Discarded(Discard),
}

/// Aggregated pairs plus discard accounting for a batch of instructions.
#[derive(Debug, Clone, Default)]
pub struct PairBatch {
    pub pairs: Vec<PreferencePair>,
    pub discarded: Vec<Discard>,
}

impl PairBatch {
    pub fn collect(outcomes: impl IntoIterator<Item = PairOutcome>) -> Self {
        let mut batch = PairBatch::default();
        for outcome in outcomes {
            batch.push(outcome);
        }
        batch
    }

    pub fn push(&mut self, outcome: PairOutcome) {
        match outcome {
            PairOutcome::Pairs(pairs) => self.pairs.extend(pairs),
            PairOutcome::Discarded(discard) => self.discarded.push(discard),
        }
    }

    /// Count of distinct instructions contributing at least one pair.
    pub fn contributing_instructions(&self) -> usize {
        let ids: std::collections::HashSet<&str> =
            self.pairs.iter().map(|p| p.instruction_id.as_str()).collect();
        ids.len()
    }

    /// Audit: contributing instructions + discards must equal candidates.
    pub fn audit_complete(&self, candidate_instructions: usize) -> bool {
        self.contributing_instructions() + self.discarded.len() == candidate_instructions
    }

    pub fn discard_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for d in &self.discarded {
            let key = serde_json::to_value(d.reason)
                .expect("reason serializes")
                .as_str()
                .expect("reason is a string")
                .to_string();
            *counts.entry(key).or_insert(0) += 1;
        }
        counts
    }
}

/// One scored response entering pair construction. `index` is its position
/// in the instruction's response list (the tie-break key). A missing
/// `if_mean` is a judge failure; a missing `fact_value` is unscoreable.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub response_id: String,
    pub index: usize,
    pub if_mean: Option<f64>,
    pub fact_value: Option<f64>,
}

fn argmax_min_by<F: Fn(&Candidate) -> f64>(
    candidates: &[&Candidate],
    value: F,
) -> (usize, usize) {
    let mut best = 0usize;
    let mut worst = 0usize;
    for (i, c) in candidates.iter().enumerate() {
        // Strict comparisons keep the lowest index among exact ties.
        if value(c) > value(candidates[best]) {
            best = i;
        }
        if value(c) < value(candidates[worst]) {
            worst = i;
        }
    }
    (best, worst)
}

fn discard(instruction_id: &str, reason: DiscardReason) -> PairOutcome {
    PairOutcome::Discarded(Discard { instruction_id: instruction_id.to_string(), reason })
}

/// IF pair: highest judge mean positive, lowest negative; equal means discard.
///
/// Responses without a judge score are not candidates; fewer than two
/// scoreable responses is a judge failure.
pub fn build_if_pairs(instruction_id: &str, candidates: &[Candidate]) -> PairOutcome {
    let scoreable: Vec<&Candidate> = candidates.iter().filter(|c| c.if_mean.is_some()).collect();
    if scoreable.len() < 2 {
        return discard(instruction_id, DiscardReason::JudgeFailure);
    }
    let (best, worst) = argmax_min_by(&scoreable, |c| c.if_mean.unwrap());
    let (pos, neg) = (scoreable[best], scoreable[worst]);
    if pos.if_mean == neg.if_mean {
        return discard(instruction_id, DiscardReason::TiedReward);
    }
    PairOutcome::Pairs(vec![PreferencePair {
        instruction_id: instruction_id.to_string(),
        positive_id: pos.response_id.clone(),
        negative_id: neg.response_id.clone(),
        kind: PairKind::IfPair,
        pos_reward: pos.if_mean.unwrap(),
        neg_reward: neg.if_mean.unwrap(),
        selection: PairSelection::MaxMin,
    }])
}

/// Responses scoreable on both channels, in original index order.
fn dual_scoreable(candidates: &[Candidate]) -> Vec<&Candidate> {
    candidates.iter().filter(|c| c.if_mean.is_some() && c.fact_value.is_some()).collect()
}

/// Factuality max-min pair with the IF-gap filter (default rules).
pub fn build_fact_pairs_maxmin(instruction_id: &str, candidates: &[Candidate]) -> PairOutcome {
    build_fact_pairs_maxmin_with(instruction_id, candidates, &PairRules::default())
}

pub fn build_fact_pairs_maxmin_with(
    instruction_id: &str,
    candidates: &[Candidate],
    rules: &PairRules,
) -> PairOutcome {
    let scoreable = dual_scoreable(candidates);
    if scoreable.len() < 2 {
        return discard(instruction_id, DiscardReason::Unscoreable);
    }
    let (best, worst) = argmax_min_by(&scoreable, |c| c.fact_value.unwrap());
    let (pos, neg) = (scoreable[best], scoreable[worst]);
    if pos.fact_value == neg.fact_value {
        return discard(instruction_id, DiscardReason::TiedReward);
    }
    // The boundary stays: a gap of exactly 0.5 keeps the pair.
    if (pos.if_mean.unwrap() - neg.if_mean.unwrap()).abs() > rules.if_gap {
        return discard(instruction_id, DiscardReason::IfGapExceeded);
    }
    PairOutcome::Pairs(vec![PreferencePair {
        instruction_id: instruction_id.to_string(),
        positive_id: pos.response_id.clone(),
        negative_id: neg.response_id.clone(),
        kind: PairKind::FactPair,
        pos_reward: pos.fact_value.unwrap(),
        neg_reward: neg.fact_value.unwrap(),
        selection: PairSelection::MaxMin,
    }])
}

/// Factuality pairs by enumeration: every unordered candidate pair with a
/// fact difference of at least the band and an IF gap within the filter.
///
/// When nothing qualifies the instruction discards as `below_band` if every
/// pair fell inside the band, otherwise `if_gap_exceeded`.
pub fn build_fact_pairs_enum(instruction_id: &str, candidates: &[Candidate]) -> PairOutcome {
    build_fact_pairs_enum_with(instruction_id, candidates, &PairRules::default())
}

pub fn build_fact_pairs_enum_with(
    instruction_id: &str,
    candidates: &[Candidate],
    rules: &PairRules,
) -> PairOutcome {
    let scoreable = dual_scoreable(candidates);
    if scoreable.len() < 2 {
        return discard(instruction_id, DiscardReason::Unscoreable);
    }
    let mut pairs = Vec::new();
    let mut any_outside_band = false;
    for i in 0..scoreable.len() {
        for j in (i + 1)..scoreable.len() {
            let (a, b) = (scoreable[i], scoreable[j]);
            let delta_fact = (a.fact_value.unwrap() - b.fact_value.unwrap()).abs();
            // A difference of exactly the band is NOT treated as equal.
            if delta_fact < rules.enum_band {
                continue;
            }
            any_outside_band = true;
            let delta_if = (a.if_mean.unwrap() - b.if_mean.unwrap()).abs();
            if delta_if > rules.if_gap {
                continue;
            }
            let (pos, neg) =
                if a.fact_value.unwrap() > b.fact_value.unwrap() { (a, b) } else { (b, a) };
            pairs.push(PreferencePair {
                instruction_id: instruction_id.to_string(),
                positive_id: pos.response_id.clone(),
                negative_id: neg.response_id.clone(),
                kind: PairKind::FactPair,
                pos_reward: pos.fact_value.unwrap(),
                neg_reward: neg.fact_value.unwrap(),
                selection: PairSelection::Enumeration,
            });
        }
    }
    if pairs.is_empty() {
        let reason =
            if any_outside_band { DiscardReason::IfGapExceeded } else { DiscardReason::BelowBand };
        return discard(instruction_id, reason);
    }
    PairOutcome::Pairs(pairs)
}

/// Linear blend of the two reward channels with weights 1 and 5.
pub fn composite_reward(if_mean: f64, fact_value: f64) -> f64 {
    COMPOSITE_WEIGHTS.0 * if_mean + COMPOSITE_WEIGHTS.1 * fact_value
}

/// Max-min pair over the composite reward; the blend already reflects both
/// channels, so no separate IF-gap filter applies.
pub fn build_composite_pairs(instruction_id: &str, candidates: &[Candidate]) -> PairOutcome {
    build_composite_pairs_with(instruction_id, candidates, &PairRules::default())
}

pub fn build_composite_pairs_with(
    instruction_id: &str,
    candidates: &[Candidate],
    rules: &PairRules,
) -> PairOutcome {
    let scoreable = dual_scoreable(candidates);
    if scoreable.len() < 2 {
        return discard(instruction_id, DiscardReason::Unscoreable);
    }
    let (w_if, w_fact) = rules.composite_weights;
    let composite =
        |c: &Candidate| w_if * c.if_mean.unwrap() + w_fact * c.fact_value.unwrap();
    let (best, worst) = argmax_min_by(&scoreable, composite);
    let (pos, neg) = (scoreable[best], scoreable[worst]);
    if composite(pos) == composite(neg) {
        return discard(instruction_id, DiscardReason::TiedReward);
    }
    PairOutcome::Pairs(vec![PreferencePair {
        instruction_id: instruction_id.to_string(),
        positive_id: pos.response_id.clone(),
        negative_id: neg.response_id.clone(),
        kind: PairKind::FactPair,
        pos_reward: composite(pos),
        neg_reward: composite(neg),
        selection: PairSelection::Composite,
    }])
}

/// Biography pairs: enumerate all generation pairs, positive strictly higher
/// FActScore, exact ties dropped. Ten generations with distinct scores give
/// all 45 pairs. `fact_value` carries the FActScore.
pub fn build_bio_fs_pairs(instruction_id: &str, candidates: &[Candidate]) -> PairOutcome {
    let scoreable: Vec<&Candidate> =
        candidates.iter().filter(|c| c.fact_value.is_some()).collect();
    if scoreable.len() < 2 {
        return discard(instruction_id, DiscardReason::Unscoreable);
    }
    let mut pairs = Vec::new();
    for i in 0..scoreable.len() {
        for j in (i + 1)..scoreable.len() {
            let (a, b) = (scoreable[i], scoreable[j]);
            if a.fact_value == b.fact_value {
                continue;
            }
            let (pos, neg) =
                if a.fact_value.unwrap() > b.fact_value.unwrap() { (a, b) } else { (b, a) };
            pairs.push(PreferencePair {
                instruction_id: instruction_id.to_string(),
                positive_id: pos.response_id.clone(),
                negative_id: neg.response_id.clone(),
                kind: PairKind::FactPair,
                pos_reward: pos.fact_value.unwrap(),
                neg_reward: neg.fact_value.unwrap(),
                selection: PairSelection::FactscoreBio,
            });
        }
    }
    if pairs.is_empty() {
        return discard(instruction_id, DiscardReason::TiedReward);
    }
    PairOutcome::Pairs(pairs)
}

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

/// `dpo_*.jsonl` row: a pair joined with its texts for external trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpoRecord {
    pub instruction: String,
    pub positive_text: String,
    pub negative_text: String,
    pub kind: PairKind,
    pub pos_reward: f64,
    pub neg_reward: f64,
    pub selection: PairSelection,
}

impl Record for DpoRecord {
    // Rows are not id-keyed; a positive text may repeat across pairs.
    const UNIQUE_IDS: bool = false;

    fn record_id(&self) -> &str {
        ""
    }
    fn check(&self) -> Result<(), InvariantError> {
        if !(self.pos_reward > self.neg_reward) {
            return Err(InvariantError::Pair {
                instruction_id: self.instruction.clone(),
                reason: format!(
                    "pos_reward {} not strictly greater than neg_reward {}",
                    self.pos_reward, self.neg_reward
                ),
            });
        }
        Ok(())
    }
}

/// Per-reason discard counts plus pair totals, for the summary report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairSummary {
    pub n_if_pairs: usize,
    pub n_fact_pairs: usize,
    pub if_discards: BTreeMap<String, usize>,
    pub fact_discards: BTreeMap<String, usize>,
}

pub struct AssembledDataset {
    pub files: Vec<(PathBuf, PairKind)>,
    pub manifest: TrainingManifest,
    pub summary: PairSummary,
}

/// Texts needed to join pairs into trainer rows.
pub struct TextLookup<'a> {
    pub instruction_text: &'a dyn Fn(&str) -> Option<String>,
    pub response_text: &'a dyn Fn(&str) -> Option<String>,
}

fn join_records(batch: &PairBatch, lookup: &TextLookup) -> Result<Vec<DpoRecord>, PairError> {
    batch
        .pairs
        .iter()
        .map(|pair| {
            let instruction = (lookup.instruction_text)(&pair.instruction_id)
                .ok_or(PairError::UnknownId { kind: "instruction", id: pair.instruction_id.clone() })?;
            let positive_text = (lookup.response_text)(&pair.positive_id)
                .ok_or(PairError::UnknownId { kind: "response", id: pair.positive_id.clone() })?;
            let negative_text = (lookup.response_text)(&pair.negative_id)
                .ok_or(PairError::UnknownId { kind: "response", id: pair.negative_id.clone() })?;
            Ok(DpoRecord {
                instruction,
                positive_text,
                negative_text,
                kind: pair.kind,
                pos_reward: pair.pos_reward,
                neg_reward: pair.neg_reward,
                selection: pair.selection,
            })
        })
        .collect()
}

/// Write `dpo_if.jsonl` / `dpo_fact.jsonl` (each only when non-empty) plus a
/// training manifest recording the uniform-over-kinds mixing policy; the
/// mixing itself happens in the external trainer.
pub fn assemble_dpo_dataset(
    if_batch: &PairBatch,
    fact_batch: &PairBatch,
    lookup: &TextLookup,
    sft_files: Vec<PathBuf>,
    out_dir: &Path,
) -> Result<AssembledDataset, PairError> {
    if if_batch.pairs.is_empty() && fact_batch.pairs.is_empty() {
        return Err(PairError::NothingToAssemble);
    }
    let mut files = Vec::new();
    let mut dpo_files = Vec::new();
    for (batch, kind, name) in [
        (if_batch, PairKind::IfPair, "dpo_if.jsonl"),
        (fact_batch, PairKind::FactPair, "dpo_fact.jsonl"),
    ] {
        if batch.pairs.is_empty() {
            continue;
        }
        let records = join_records(batch, lookup)?;
        let path = out_dir.join(name);
        crate::dataset::save_dataset(&records, &path)?;
        files.push((path.clone(), kind));
        dpo_files.push(crate::types::DpoFileEntry { path, kind });
    }
    let manifest = TrainingManifest {
        sft_files,
        dpo_files,
        mixing_policy: TrainingManifest::MIXING_UNIFORM_OVER_KINDS.to_string(),
        recorded_hyperparams: RecordedHyperparams::default(),
    };
    let summary = PairSummary {
        n_if_pairs: if_batch.pairs.len(),
        n_fact_pairs: fact_batch.pairs.len(),
        if_discards: if_batch.discard_counts(),
        fact_discards: fact_batch.discard_counts(),
    };
    log::info!(
        "assembled {} IF pairs / {} factuality pairs",
        summary.n_if_pairs,
        summary.n_fact_pairs
    );
    Ok(AssembledDataset { files, manifest, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn candidates(values: &[(Option<f64>, Option<f64>)]) -> Vec<Candidate> {
        values
            .iter()
            .enumerate()
            .map(|(index, (if_mean, fact_value))| Candidate {
                response_id: format!("r{index}"),
                index,
                if_mean: *if_mean,
                fact_value: *fact_value,
            })
            .collect()
    }

    fn if_only(means: &[f64]) -> Vec<Candidate> {
        candidates(&means.iter().map(|m| (Some(*m), None)).collect::<Vec<_>>())
    }

    fn dual(if_means: &[f64], facts: &[f64]) -> Vec<Candidate> {
        candidates(
            &if_means
                .iter()
                .zip(facts)
                .map(|(m, f)| (Some(*m), Some(*f)))
                .collect::<Vec<_>>(),
        )
    }

    fn expect_pairs(outcome: PairOutcome) -> Vec<PreferencePair> {
        match outcome {
            PairOutcome::Pairs(pairs) => pairs,
            PairOutcome::Discarded(d) => panic!("expected pairs, got discard {d:?}"),
        }
    }

    fn expect_discard(outcome: PairOutcome) -> Discard {
        match outcome {
            PairOutcome::Discarded(d) => d,
            PairOutcome::Pairs(p) => panic!("expected discard, got {p:?}"),
        }
    }

    #[test]
    fn if_pair_picks_argmax_argmin() {
        let pairs = expect_pairs(build_if_pairs("x", &if_only(&[4.0, 4.33, 3.67, 4.0])));
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].positive_id, "r1");
        assert_eq!(pairs[0].negative_id, "r2");
        assert_eq!(pairs[0].pos_reward, 4.33);
    }

    #[test]
    fn if_pair_discards_exact_tie() {
        let d = expect_discard(build_if_pairs("x", &if_only(&[4.0, 4.0, 4.0, 4.0])));
        assert_eq!(d.reason, DiscardReason::TiedReward);
    }

    #[test]
    fn if_pair_tie_breaks_to_lowest_index() {
        let pairs = expect_pairs(build_if_pairs("x", &if_only(&[5.0, 5.0, 1.0])));
        assert_eq!(pairs[0].positive_id, "r0");
        assert_eq!(pairs[0].negative_id, "r2");
    }

    #[test]
    fn if_pair_needs_two_scoreable() {
        let d = expect_discard(build_if_pairs(
            "x",
            &candidates(&[(Some(4.0), None), (None, None)]),
        ));
        assert_eq!(d.reason, DiscardReason::JudgeFailure);
    }

    #[test]
    fn maxmin_keeps_pair_within_gap() {
        let pairs = expect_pairs(build_fact_pairs_maxmin(
            "x",
            &dual(&[4.0, 4.2, 3.9, 4.1], &[0.9, 0.4, 0.7, 0.1]),
        ));
        assert_eq!(pairs[0].positive_id, "r0");
        assert_eq!(pairs[0].negative_id, "r3");
        assert_eq!(pairs[0].pos_reward, 0.9);
        assert_eq!(pairs[0].neg_reward, 0.1);
    }

    #[test]
    fn maxmin_discards_when_gap_exceeded() {
        let d = expect_discard(build_fact_pairs_maxmin("x", &dual(&[4.8, 4.2], &[0.9, 0.1])));
        assert_eq!(d.reason, DiscardReason::IfGapExceeded);
    }

    #[test]
    fn maxmin_gap_boundary_is_kept() {
        let pairs = expect_pairs(build_fact_pairs_maxmin("x", &dual(&[4.5, 4.0], &[0.9, 0.1])));
        assert_eq!(pairs.len(), 1, "a gap of exactly 0.5 keeps the pair");
        let d = expect_discard(build_fact_pairs_maxmin(
            "x",
            &dual(&[4.5 + 1e-9, 4.0], &[0.9, 0.1]),
        ));
        assert_eq!(d.reason, DiscardReason::IfGapExceeded);
    }

    #[test]
    fn maxmin_discards_all_tied_facts() {
        let d = expect_discard(build_fact_pairs_maxmin(
            "x",
            &dual(&[4.0, 4.1, 3.9, 4.0], &[0.5, 0.5, 0.5, 0.5]),
        ));
        assert_eq!(d.reason, DiscardReason::TiedReward);
    }

    #[test]
    fn maxmin_excludes_unscoreable_candidates() {
        // Unscoreable responses (no fact value or judge failure) never pair.
        let d = expect_discard(build_fact_pairs_maxmin(
            "x",
            &candidates(&[(Some(4.0), Some(0.9)), (Some(4.0), None), (None, Some(0.1))]),
        ));
        assert_eq!(d.reason, DiscardReason::Unscoreable);
    }

    #[test]
    fn enumeration_emits_qualifying_pairs() {
        let pairs = expect_pairs(build_fact_pairs_enum(
            "x",
            &dual(&[4.0, 4.1, 4.2], &[0.9, 0.6, 0.1]),
        ));
        // Deltas: (r0,r1)=0.3, (r0,r2)=0.8, (r1,r2)=0.5; all IF gaps <= 0.5.
        assert_eq!(pairs.len(), 3);
        assert!(pairs.iter().all(|p| p.pos_reward > p.neg_reward));
    }

    #[test]
    fn enumeration_band_discards_small_differences() {
        let d = expect_discard(build_fact_pairs_enum("x", &dual(&[4.0, 4.0], &[0.5, 0.4])));
        assert_eq!(d.reason, DiscardReason::BelowBand);
    }

    #[test]
    fn enumeration_band_boundary_is_kept() {
        // 0.4 - 0.2 is exactly 0.2 in f64.
        let pairs = expect_pairs(build_fact_pairs_enum("x", &dual(&[4.0, 4.0], &[0.4, 0.2])));
        assert_eq!(pairs.len(), 1, "a difference of exactly 0.2 is emitted");
        let d = expect_discard(build_fact_pairs_enum(
            "x",
            &dual(&[4.0, 4.0], &[0.4, 0.2 + 1e-9]),
        ));
        assert_eq!(d.reason, DiscardReason::BelowBand);
    }

    #[test]
    fn enumeration_excludes_gap_violations_per_pair() {
        // 4 responses, all fact deltas >= 0.2, one pair with IF gap 0.6.
        let pairs = expect_pairs(build_fact_pairs_enum(
            "x",
            &dual(&[4.0, 4.6, 4.2, 4.3], &[0.9, 0.6, 0.3, 0.0]),
        ));
        // All 6 pairs pass the band; (r0,r1) has IF gap 0.6 and drops.
        assert_eq!(pairs.len(), 5);
        assert!(!pairs
            .iter()
            .any(|p| p.positive_id == "r0" && p.negative_id == "r1"));
    }

    #[test]
    fn composite_weights_and_range() {
        assert_eq!(composite_reward(4.0, 0.6), 7.0);
        assert_eq!(composite_reward(1.0, 0.0), 1.0);
        assert_eq!(composite_reward(5.0, 1.0), 10.0);
    }

    #[test]
    fn composite_pairs_use_blended_reward() {
        let pairs = expect_pairs(build_composite_pairs("x", &dual(&[4.0, 3.0], &[0.2, 0.8])));
        // Composites: r0 = 5.0, r1 = 7.0.
        assert_eq!(pairs[0].positive_id, "r1");
        assert_eq!(pairs[0].negative_id, "r0");
        assert_eq!(pairs[0].pos_reward, 7.0);
        assert_eq!(pairs[0].neg_reward, 5.0);
    }

    #[test]
    fn composite_has_no_gap_filter() {
        // IF gap of 2.0 would fail the max-min filter; composite keeps it.
        let pairs = expect_pairs(build_composite_pairs("x", &dual(&[5.0, 3.0], &[0.9, 0.1])));
        assert_eq!(pairs.len(), 1);
    }

    #[test]
    fn composite_discards_equal_blends() {
        // 4.0 + 5*0.2 = 5.0 on both sides.
        let d = expect_discard(build_composite_pairs("x", &dual(&[4.0, 3.0], &[0.2, 0.4])));
        assert_eq!(d.reason, DiscardReason::TiedReward);
    }

    fn bio(fs: &[f64]) -> Vec<Candidate> {
        candidates(&fs.iter().map(|f| (None, Some(*f))).collect::<Vec<_>>())
    }

    #[test]
    fn bio_ten_distinct_generations_give_45_pairs() {
        let fs: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let pairs = expect_pairs(build_bio_fs_pairs("bio", &bio(&fs)));
        assert_eq!(pairs.len(), 45);
    }

    #[test]
    fn bio_all_tied_gives_zero_pairs() {
        let d = expect_discard(build_bio_fs_pairs("bio", &bio(&[0.5; 10])));
        assert_eq!(d.reason, DiscardReason::TiedReward);
    }

    #[test]
    fn bio_partial_ties_skip_only_tied_pairs() {
        let pairs = expect_pairs(build_bio_fs_pairs("bio", &bio(&[0.5, 0.5, 0.7])));
        assert_eq!(pairs.len(), 2);
        assert!(pairs.iter().all(|p| p.positive_id == "r2"));
    }

    #[test]
    fn batch_audit_accounts_for_every_instruction() {
        let outcomes = vec![
            build_if_pairs("a", &if_only(&[4.0, 3.0])),
            build_if_pairs("b", &if_only(&[4.0, 4.0])),
            build_if_pairs("c", &if_only(&[2.0])),
        ];
        let batch = PairBatch::collect(outcomes);
        assert_eq!(batch.pairs.len(), 1);
        assert_eq!(batch.discarded.len(), 2);
        assert!(batch.audit_complete(3));
        assert_eq!(batch.discard_counts()["tied_reward"], 1);
        assert_eq!(batch.discard_counts()["judge_failure"], 1);
    }

    #[test]
    fn assemble_writes_only_nonempty_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let fact_batch = PairBatch::collect(vec![build_fact_pairs_maxmin(
            "x",
            &dual(&[4.0, 4.1], &[0.9, 0.1]),
        )]);
        let if_batch = PairBatch::default();
        let instruction_text = |_: &str| Some("the instruction".to_string());
        let response_text = |id: &str| Some(format!("text of {id}"));
        let lookup =
            TextLookup { instruction_text: &instruction_text, response_text: &response_text };
        let out = assemble_dpo_dataset(&if_batch, &fact_batch, &lookup, vec![], dir.path()).unwrap();
        assert_eq!(out.files.len(), 1);
        assert!(dir.path().join("dpo_fact.jsonl").exists());
        assert!(!dir.path().join("dpo_if.jsonl").exists());
        assert_eq!(out.manifest.mixing_policy, "uniform over pair kinds");
        assert_eq!(out.manifest.recorded_hyperparams.beta, 0.1);
        assert_eq!(out.summary.n_fact_pairs, 1);
    }

    #[test]
    fn assemble_rejects_empty_everything() {
        let dir = tempfile::tempdir().unwrap();
        let instruction_text = |_: &str| None;
        let response_text = |_: &str| None;
        let lookup =
            TextLookup { instruction_text: &instruction_text, response_text: &response_text };
        assert!(matches!(
            assemble_dpo_dataset(
                &PairBatch::default(),
                &PairBatch::default(),
                &lookup,
                vec![],
                dir.path()
            ),
            Err(PairError::NothingToAssemble)
        ));
    }

    #[test]
    fn assemble_is_byte_deterministic() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let fact_batch = PairBatch::collect(vec![
            build_fact_pairs_enum("x", &dual(&[4.0, 4.1, 4.2], &[0.9, 0.6, 0.1])),
            build_fact_pairs_enum("y", &dual(&[4.0, 4.1], &[0.8, 0.2])),
        ]);
        let instruction_text = |id: &str| Some(format!("instruction {id}"));
        let response_text = |id: &str| Some(format!("text of {id}"));
        let lookup =
            TextLookup { instruction_text: &instruction_text, response_text: &response_text };
        assemble_dpo_dataset(&PairBatch::default(), &fact_batch, &lookup, vec![], dir_a.path())
            .unwrap();
        assemble_dpo_dataset(&PairBatch::default(), &fact_batch, &lookup, vec![], dir_b.path())
            .unwrap();
        let a = std::fs::read(dir_a.path().join("dpo_fact.jsonl")).unwrap();
        let b = std::fs::read(dir_b.path().join("dpo_fact.jsonl")).unwrap();
        assert_eq!(a, b);
    }
}
