//! Scalar score extraction from chain-of-thought judge output.

use regex::Regex;
use std::sync::OnceLock;

/// Patterns tried in order; the first pattern with any match wins and its
/// *last* occurrence is taken, since judges often revise their score at the
/// end of the reasoning.
pub struct ScorePatterns {
    patterns: Vec<Regex>,
}

impl ScorePatterns {
    pub fn new(patterns: Vec<Regex>) -> Self {
        ScorePatterns { patterns }
    }

    pub fn standard() -> &'static ScorePatterns {
        static STANDARD: OnceLock<ScorePatterns> = OnceLock::new();
        STANDARD.get_or_init(|| {
            ScorePatterns::new(vec![Regex::new(
                r"(?i)\bscore\s*:\s*([0-9]+(?:\.[0-9]+)?)",
            )
            .expect("valid score pattern")])
        })
    }
}

/// Extract the final `Score: <number>` occurrence, clamped to [1,5].
///
/// Failure is a distinct outcome (`None`), never a default score.
pub fn parse_scalar_score(text: &str, patterns: &ScorePatterns) -> Option<f64> {
    for pattern in &patterns.patterns {
        let last = pattern.captures_iter(text).last();
        if let Some(caps) = last {
            let raw: f64 = caps.get(1)?.as_str().parse().ok()?;
            return Some(raw.clamp(1.0, 5.0));
        }
    }
    None
}
