//! Extracting a verdict from free-text model output, plus the factual
//! knowledge classification used by the leakage filter.
//!
//! The anchor grammar is an operationalization validated against every
//! model-output cell printed in the source tables; there is no semantic
//! extraction. Matching tolerates bold/emphasis markers around the option
//! letter, and when a response restates options before concluding, the
//! last anchor wins.

use crate::model::Verdict;
use regex::Regex;
use std::sync::OnceLock;

/// Outcome of probing whether the model already knows the underlying fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnowledgeClass {
    /// Confident factual answer: the sample is a leakage risk.
    KnowsFact,
    /// Explicit refusal with no verdict: safe to keep.
    NoKnowledge,
    /// Neither a verdict nor a recognized refusal.
    Ambiguous,
}

/// Case-insensitive refusal phrases. Extendable via
/// [`parse_verdict_with_refusals`]; these defaults cover the refusal
/// language observed in practice.
pub const DEFAULT_REFUSAL_PHRASES: &[&str] = &[
    "i cannot verify",
    "i can not verify",
    "do not have the capability to access",
    "my training only includes",
];

fn anchor_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)answer\s+(?:is|would\s+be)\s*:?\s*([AB])\b").unwrap()
    })
}

fn option_token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"([AB])\.\s*(?i:Fake|Real)\b").unwrap())
}

fn letter_to_verdict(letter: &str) -> Verdict {
    match letter {
        "A" | "a" => Verdict::Fake,
        _ => Verdict::Real,
    }
}

/// Strips emphasis markup so `**A. Fake**` matches like `A. Fake`.
fn strip_emphasis(text: &str) -> String {
    text.replace(['*', '_'], "")
}

/// Splits into sentences, treating `.` `!` `?` followed by whitespace as a
/// boundary -- except when the period terminates a bare option letter, so
/// "the answer is: B. Real." stays one sentence.
fn final_sentence(text: &str) -> &str {
    let bytes = text.as_bytes();
    let mut last_boundary = 0usize;
    let trimmed_end = text.trim_end();
    for (i, b) in bytes.iter().enumerate() {
        if !matches!(b, b'.' | b'!' | b'?') {
            continue;
        }
        if i + 1 >= trimmed_end.len() {
            break; // terminal punctuation, not a boundary
        }
        if !bytes[i + 1].is_ascii_whitespace() {
            continue;
        }
        if *b == b'.' && i >= 1 && matches!(bytes[i - 1], b'A' | b'B') {
            let standalone = i < 2 || !bytes[i - 2].is_ascii_alphanumeric();
            if standalone {
                continue;
            }
        }
        last_boundary = i + 1;
    }
    text[last_boundary..].trim()
}

fn contains_refusal(text: &str, refusals: &[&str]) -> bool {
    let lower = text.to_lowercase();
    refusals.iter().any(|p| lower.contains(&p.to_lowercase()))
}

/// Total function: any text maps to a verdict.
///
/// Scan order: last `answer is/would be: A|B` anchor anywhere in the
/// text; otherwise an option token (`A. Fake` / `B. Real`) in the final
/// sentence, last occurrence winning; otherwise `Undetermined` (covering
/// a literal "undetermined" conclusion, refusals, and unrecognized text).
pub fn parse_verdict(response: &str) -> Verdict {
    let text = strip_emphasis(response);

    if let Some(cap) = anchor_re().captures_iter(&text).last() {
        return letter_to_verdict(&cap[1]);
    }

    let last = final_sentence(&text);
    if let Some(cap) = option_token_re().captures_iter(last).last() {
        return letter_to_verdict(&cap[1]);
    }

    Verdict::Undetermined
}

/// [`parse_verdict`] plus refusal detection, with a configurable phrase
/// list.
pub fn parse_verdict_with_refusals(response: &str, refusals: &[&str]) -> (Verdict, bool) {
    let verdict = parse_verdict(response);
    (verdict, contains_refusal(response, refusals))
}

/// Classifies a response to a vanilla news probe.
///
/// A definite verdict means the model knows the fact; a refusal with no
/// verdict means it does not; anything else is ambiguous.
pub fn classify_knowledge(response: &str) -> KnowledgeClass {
    classify_knowledge_with_refusals(response, DEFAULT_REFUSAL_PHRASES)
}

pub fn classify_knowledge_with_refusals(response: &str, refusals: &[&str]) -> KnowledgeClass {
    let (verdict, refused) = parse_verdict_with_refusals(response, refusals);
    match verdict {
        Verdict::Fake | Verdict::Real => KnowledgeClass::KnowsFact,
        Verdict::Undetermined if refused => KnowledgeClass::NoKnowledge,
        Verdict::Undetermined => KnowledgeClass::Ambiguous,
    }
}
