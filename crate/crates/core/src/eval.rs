//! Factuality metrics, reward-model validation, and report rendering.
//!
//! FActScore-style scoring reuses the factuality reward arithmetic (no length
//! penalty); reward models are validated by tie-corrected Kendall rank
//! correlation between model-detected and human-annotated error counts.

use crate::dataset::Record;
use crate::retrieval::{LexicalIndex, Reranker};
use crate::rewards::Scorer;
use crate::types::InvariantError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("rank lists have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("rank correlation needs at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("rank list contains a non-finite value")]
    NonFinite,
    #[error("all values tied in {0}; correlation undefined")]
    AllTied(&'static str),
    #[error("annotation ids do not match scored ids: {0}")]
    IdMismatch(String),
    #[error("reports compare different datasets: {0} vs {1}")]
    DatasetMismatch(String, String),
    #[error("reward: {0}")]
    Reward(#[from] crate::rewards::RewardError),
}

// ---------------------------------------------------------------------------
// FActScore
// ---------------------------------------------------------------------------

/// Per-response factuality score. `fs` is absent for unscoreable responses
/// (zero facts), which are excluded from FS aggregation and counted apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fs: Option<f64>,
    pub n_correct: u32,
    pub n_error: u32,
}

/// Score one response: proportion of supported facts, with correct/error
/// counts. No length penalty is applied.
pub fn factscore(
    scorer: &Scorer<'_>,
    response_text: &str,
    instruction_text: &str,
    index: &LexicalIndex,
    reranker: &dyn Reranker,
    m_supports: usize,
    k_retrieve: usize,
) -> Result<FsResult, EvalError> {
    let outcome = scorer.fact_reward(
        response_text,
        instruction_text,
        index,
        reranker,
        m_supports,
        k_retrieve,
    )?;
    Ok(FsResult {
        fs: outcome.reward.value,
        n_correct: outcome.reward.n_correct,
        n_error: outcome.reward.n_error(),
    })
}

// ---------------------------------------------------------------------------
// Kendall rank correlation (tau-b)
// ---------------------------------------------------------------------------

fn tie_term(sorted: &mut Vec<f64>) -> i64 {
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));
    let mut total = 0i64;
    let mut run = 1i64;
    for i in 1..sorted.len() {
        if sorted[i] == sorted[i - 1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Count strict inversions by merge sort; equal elements do not count.
fn count_inversions(values: &mut [f64]) -> i64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = values.split_at_mut(mid);
    let mut inversions = count_inversions(left) + count_inversions(right);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0usize, 0usize);
    while i < left.len() && j < right.len() {
        if right[j] < left[i] {
            // Every remaining left element is inverted with right[j].
            inversions += (left.len() - i) as i64;
            merged.push(right[j]);
            j += 1;
        } else {
            merged.push(left[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&left[i..]);
    merged.extend_from_slice(&right[j..]);
    values.copy_from_slice(&merged);
    inversions
}

/// Tie-adjusted Kendall rank correlation:
/// `tau_b = (C - D) / sqrt((C + D + T_a) (C + D + T_b))`
/// with concordant/discordant pair counts C/D and T_a/T_b pairs tied only in
/// the first/second list. Exact integer pair counting throughout.
pub fn kendall_tau(rank_a: &[f64], rank_b: &[f64]) -> Result<f64, EvalError> {
    if rank_a.len() != rank_b.len() {
        return Err(EvalError::LengthMismatch(rank_a.len(), rank_b.len()));
    }
    let n = rank_a.len();
    if n < 2 {
        return Err(EvalError::TooFewItems(n));
    }
    if rank_a.iter().chain(rank_b).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }

    let mut paired: Vec<(f64, f64)> = rank_a.iter().copied().zip(rank_b.iter().copied()).collect();
    paired.sort_by(|x, y| {
        x.0.partial_cmp(&y.0).unwrap().then_with(|| x.1.partial_cmp(&y.1).unwrap())
    });

    let n0 = (n as i64) * (n as i64 - 1) / 2;
    let mut a_sorted: Vec<f64> = paired.iter().map(|p| p.0).collect();
    let n1 = tie_term(&mut a_sorted);
    let mut b_sorted: Vec<f64> = paired.iter().map(|p| p.1).collect();
    let n2 = tie_term(&mut b_sorted);
    if n0 == n1 {
        return Err(EvalError::AllTied("rank_a"));
    }
    if n0 == n2 {
        return Err(EvalError::AllTied("rank_b"));
    }
    // Joint ties: runs of equal (a, b) pairs in the sorted order.
    let mut n3 = 0i64;
    let mut run = 1i64;
    for i in 1..n {
        if paired[i] == paired[i - 1] {
            run += 1;
        } else {
            n3 += run * (run - 1) / 2;
            run = 1;
        }
    }
    n3 += run * (run - 1) / 2;

    // After sorting by (a, b), strict inversions in b are exactly the
    // discordant pairs.
    let mut b_sequence: Vec<f64> = paired.iter().map(|p| p.1).collect();
    let discordant = count_inversions(&mut b_sequence);

    let numerator = n0 - n1 - n2 + n3 - 2 * discordant;
    let denominator = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    Ok(numerator as f64 / denominator)
}

// ---------------------------------------------------------------------------
// Reward-model validation
// ---------------------------------------------------------------------------

/// One human annotation row: `{response_id, human_error_count}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedResponse {
    pub response_id: String,
    pub human_error_count: u32,
}

impl Record for AnnotatedResponse {
    fn record_id(&self) -> &str {
        &self.response_id
    }
    fn check(&self) -> Result<(), InvariantError> {
        Ok(())
    }
}

/// Reward-model configuration echoed in validation reports so runs with
/// different fact units or support counts can be tabulated side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModelConfig {
    pub fact_unit: crate::rewards::FactUnit,
    pub m_supports: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModelValidation {
    pub tau: f64,
    pub n_responses: usize,
    pub config: RewardModelConfig,
}

/// Kendall tau between human error counts and model-detected error counts,
/// joined on response id.
pub fn validate_reward_model(
    annotations: &[AnnotatedResponse],
    rm_error_counts: &BTreeMap<String, u32>,
    config: RewardModelConfig,
) -> Result<RewardModelValidation, EvalError> {
    let mut human = Vec::with_capacity(annotations.len());
    let mut model = Vec::with_capacity(annotations.len());
    for annotation in annotations {
        let rm = rm_error_counts
            .get(&annotation.response_id)
            .ok_or_else(|| EvalError::IdMismatch(annotation.response_id.clone()))?;
        human.push(annotation.human_error_count as f64);
        model.push(*rm as f64);
    }
    Ok(RewardModelValidation {
        tau: kendall_tau(&human, &model)?,
        n_responses: annotations.len(),
        config,
    })
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// One scored response entering report aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub response_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fs: Option<f64>,
    pub n_correct: u32,
    pub n_error: u32,
    pub length_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_name: String,
    pub n_instructions: usize,
    /// Mean FS over scoreable responses only, in [0,1].
    pub mean_fs: f64,
    pub mean_correct: f64,
    pub mean_error: f64,
    pub mean_length_chars: f64,
    pub unscoreable_count: usize,
    pub n_responses: usize,
}

/// Aggregate scored responses into a report. FS averages only scoreable
/// responses; count and length means cover every response.
pub fn build_report(dataset_name: &str, n_instructions: usize, items: &[ScoredItem]) -> EvalReport {
    let n = items.len();
    let scoreable: Vec<f64> = items.iter().filter_map(|i| i.fs).collect();
    let mean = |sum: f64, count: usize| if count > 0 { sum / count as f64 } else { 0.0 };
    EvalReport {
        dataset_name: dataset_name.to_string(),
        n_instructions,
        mean_fs: mean(scoreable.iter().sum(), scoreable.len()),
        mean_correct: mean(items.iter().map(|i| i.n_correct as f64).sum(), n),
        mean_error: mean(items.iter().map(|i| i.n_error as f64).sum(), n),
        mean_length_chars: mean(items.iter().map(|i| i.length_chars as f64).sum(), n),
        unscoreable_count: items.iter().filter(|i| i.fs.is_none()).count(),
        n_responses: n,
    }
}

impl EvalReport {
    /// Aligned plain-text rendering; FS is shown x100 to match the usual
    /// table convention.
    pub fn render(&self) -> String {
        format!(
            "dataset: {}\n\
             instructions:      {:>8}\n\
             responses:         {:>8}\n\
             mean FS (x100):    {:>8.1}\n\
             mean correct:      {:>8.2}\n\
             mean error:        {:>8.2}\n\
             mean length chars: {:>8.1}\n\
             unscoreable:       {:>8}\n",
            self.dataset_name,
            self.n_instructions,
            self.n_responses,
            self.mean_fs * 100.0,
            self.mean_correct,
            self.mean_error,
            self.mean_length_chars,
            self.unscoreable_count
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub dataset_name: String,
    pub d_mean_fs: f64,
    pub d_mean_correct: f64,
    pub d_mean_error: f64,
    pub d_mean_length_chars: f64,
    pub d_unscoreable: i64,
}

/// Per-metric differences `a - b`; the reports must describe one dataset.
pub fn compare_runs(a: &EvalReport, b: &EvalReport) -> Result<DeltaReport, EvalError> {
    if a.dataset_name != b.dataset_name {
        return Err(EvalError::DatasetMismatch(a.dataset_name.clone(), b.dataset_name.clone()));
    }
    Ok(DeltaReport {
        dataset_name: a.dataset_name.clone(),
        d_mean_fs: a.mean_fs - b.mean_fs,
        d_mean_correct: a.mean_correct - b.mean_correct,
        d_mean_error: a.mean_error - b.mean_error,
        d_mean_length_chars: a.mean_length_chars - b.mean_length_chars,
        d_unscoreable: a.unscoreable_count as i64 - b.unscoreable_count as i64,
    })
}

impl DeltaReport {
    pub fn render(&self) -> String {
        format!(
            "dataset: {}\n\
             delta mean FS (x100):    {:+.1}\n\
             delta mean correct:      {:+.2}\n\
             delta mean error:        {:+.2}\n\
             delta mean length chars: {:+.1}\n\
             delta unscoreable:       {:+}\n",
            self.dataset_name,
            self.d_mean_fs * 100.0,
            self.d_mean_correct,
            self.d_mean_error,
            self.d_mean_length_chars,
            self.d_unscoreable
        )
    }
}

// ---------------------------------------------------------------------------
// Length statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStat {
    pub mean_chars: f64,
    pub count: usize,
}

/// Mean Unicode scalar count per response per group. Groups without
/// responses are simply absent (reported with count 0 by the renderer when
/// the caller declares them).
pub fn length_stats<'a>(
    responses: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> BTreeMap<String, LengthStat> {
    let mut sums: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (group, text) in responses {
        let entry = sums.entry(group.to_string()).or_insert((0, 0));
        entry.0 += text.chars().count();
        entry.1 += 1;
    }
    sums.into_iter()
        .map(|(group, (chars, count))| {
            (group, LengthStat { mean_chars: chars as f64 / count as f64, count })
        })
        .collect()
}

/// Render a rows-by-columns grid of mean lengths; groups are keyed
/// `"{row}/{column}"`. Missing cells render as `-` with count 0.
pub fn render_length_grid(
    rows: &[&str],
    columns: &[&str],
    stats: &BTreeMap<String, LengthStat>,
) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<16}", ""));
    for column in columns {
        out.push_str(&format!("{column:>12}"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("{row:<16}"));
        for column in columns {
            match stats.get(&format!("{row}/{column}")) {
                Some(stat) => out.push_str(&format!("{:>12.1}", stat.mean_chars)),
                None => out.push_str(&format!("{:>12}", "-")),
            }
        }
        out.push('\n');
    }
    out
}
