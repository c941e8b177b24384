//! Rule-based sentence segmentation.
//!
//! Boundaries fall after `.`, `!`, `?` runs followed by whitespace and an
//! uppercase letter or digit, and after newlines that end a list item. A
//! fixed abbreviation list plus single uppercase initials suppress period
//! boundaries. Sentences are contiguous slices of the input (each owns its
//! trailing whitespace), so concatenating them reconstructs the text exactly.

use serde::{Deserialize, Serialize};

/// One segmented sentence. `text` is the exact input slice including
/// trailing whitespace; trim for display or prompting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    /// Set only when sentence filtering is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fact_based: Option<bool>,
}

/// Tokens that end with a period without ending a sentence.
const ABBREVIATIONS: &[&str] = &[
    "Dr.", "Mr.", "Mrs.", "Ms.", "Prof.", "St.", "Jr.", "Sr.", "Rev.", "Gen.", "Capt.", "Sgt.",
    "vs.", "etc.", "e.g.", "i.e.", "cf.", "al.", "approx.", "dept.", "est.", "fig.", "Fig.",
    "No.", "no.", "Vol.", "vol.", "p.", "pp.", "U.S.", "U.K.", "U.N.", "D.C.", "a.m.", "p.m.",
    "Inc.", "Ltd.", "Co.", "Corp.", "Jan.", "Feb.", "Mar.", "Apr.", "Jun.", "Jul.", "Aug.",
    "Sep.", "Sept.", "Oct.", "Nov.", "Dec.", "Mt.", "Ft.",
];

fn word_ending_at(text: &str, period_end: usize) -> &str {
    let head = &text[..period_end];
    match head.rfind(char::is_whitespace) {
        Some(ws) => &head[ws + char::len_utf8(head[ws..].chars().next().unwrap())..],
        None => head,
    }
}

fn suppresses_boundary(word: &str) -> bool {
    if ABBREVIATIONS.contains(&word) {
        return true;
    }
    // Single uppercase initials: "J." in "J. Smith".
    let mut chars = word.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_uppercase())
}

fn is_list_item(line: &str) -> bool {
    let trimmed = line.trim_start();
    if trimmed.starts_with("- ") || trimmed.starts_with("* ") || trimmed.starts_with("\u{2022}") {
        return true;
    }
    // Numbered items: "1. " / "12) ".
    let digits: String = trimmed.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() || digits.len() > 3 {
        return false;
    }
    let rest = &trimmed[digits.len()..];
    rest.starts_with(". ") || rest.starts_with(") ")
}

/// Split text into sentences. Empty text gives an empty list; otherwise the
/// concatenation of the returned texts equals the input.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    if text.is_empty() {
        return Vec::new();
    }
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut cuts: Vec<usize> = Vec::new();
    let mut line_start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (byte_idx, c) = chars[i];
        if c == '\n' {
            if is_list_item(&text[line_start..byte_idx]) {
                let mut j = i + 1;
                while j < chars.len() && chars[j].1.is_whitespace() {
                    j += 1;
                }
                if j < chars.len() {
                    cuts.push(chars[j].0);
                }
            }
            line_start = byte_idx + 1;
            i += 1;
            continue;
        }
        if matches!(c, '.' | '!' | '?') {
            let run_start = i;
            let mut run_end = i;
            while run_end + 1 < chars.len() && matches!(chars[run_end + 1].1, '.' | '!' | '?') {
                run_end += 1;
            }
            let suppressed = run_start == run_end
                && c == '.'
                && suppresses_boundary(word_ending_at(text, byte_idx + 1));
            if !suppressed {
                let mut j = run_end + 1;
                let mut saw_whitespace = false;
                while j < chars.len() && chars[j].1.is_whitespace() {
                    saw_whitespace = true;
                    j += 1;
                }
                if saw_whitespace && j < chars.len() {
                    let next = chars[j].1;
                    if next.is_uppercase() || next.is_ascii_digit() {
                        cuts.push(chars[j].0);
                    }
                }
            }
            i = run_end + 1;
            continue;
        }
        i += 1;
    }
    cuts.dedup();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    for cut in cuts {
        if cut > start {
            sentences.push(&text[start..cut]);
            start = cut;
        }
    }
    if start < text.len() {
        sentences.push(&text[start..]);
    }
    sentences
        .into_iter()
        .enumerate()
        .map(|(index, slice)| Sentence { index, text: slice.to_string(), fact_based: None })
        .collect()
}

/// Join sentence texts back into the original string.
pub fn reconstruct(sentences: &[Sentence]) -> String {
    sentences.iter().map(|s| s.text.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(input: &str) -> Vec<String> {
        split_sentences(input).into_iter().map(|s| s.text.trim().to_string()).collect()
    }

    #[test]
    fn commodore_reply_is_two_sentences() {
        let input = "Of course. The Commodore 64 is a 8-bit home computer that was released by \
                     Commodore International in August 1982.";
        let got = texts(input);
        assert_eq!(got.len(), 2);
        assert_eq!(got[0], "Of course.");
        assert!(got[1].starts_with("The Commodore 64"));
    }

    #[test]
    fn no_boundary_means_one_sentence() {
        assert_eq!(texts("Hello"), vec!["Hello"]);
    }

    #[test]
    fn abbreviations_do_not_split() {
        let got = texts("Dr. Smith works at St. Mary's. He retired.");
        assert_eq!(got, vec!["Dr. Smith works at St. Mary's.", "He retired."]);
    }

    #[test]
    fn initials_do_not_split() {
        let got = texts("J. R. R. Tolkien wrote it. It sold well.");
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn numbers_after_period_do_split() {
        let got = texts("It was released in 1982. 35 years later it was retro.");
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn decimals_do_not_split() {
        assert_eq!(texts("The score was 3.5 points.").len(), 1);
    }

    #[test]
    fn list_items_split_on_newline() {
        // Only newlines that END a list item are boundaries, so the header
        // line stays attached to the first item.
        let input = "Here are facts:\n- first item\n- second item ends\nAnd a closing line.";
        let got = texts(input);
        assert_eq!(
            got,
            vec!["Here are facts:\n- first item", "- second item ends", "And a closing line."]
        );
    }

    #[test]
    fn numbered_list_items_split() {
        let got = texts("1. alpha beta\n2. gamma delta\ntail");
        assert_eq!(got, vec!["1. alpha beta", "2. gamma delta", "tail"]);
    }

    #[test]
    fn exclamation_and_question_split() {
        let got = texts("Really?! Yes. What about 2nd place? It went well!");
        assert_eq!(got.len(), 4);
    }

    #[test]
    fn empty_text_is_empty_list() {
        assert!(split_sentences("").is_empty());
    }

    #[test]
    fn reconstruction_is_exact() {
        let inputs = [
            "Of course. The C64 came out in 1982.",
            "Dr. Smith works.  Two  spaces stay.\n\nNew paragraph here.",
            "- a\n- b\nTail text. Second.",
            "   leading spaces. Kept.",
            "no terminal punctuation at all",
            "Unicode: München ist schön. Ängste auch? Ja!",
        ];
        for input in inputs {
            let sentences = split_sentences(input);
            assert_eq!(reconstruct(&sentences), input, "reconstruction failed for {input:?}");
        }
    }
}
