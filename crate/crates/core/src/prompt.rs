//! Deterministic prompt construction.
//!
//! Every builder is a pure function and byte-exact against the golden
//! template fixtures under `fixtures/golden/`. Comment text is embedded
//! as plain text between double quotes, with no escaping; prompts are not
//! a structured format. The standalone conflicting directive says
//! "and accordingly verify" while the combined step directive says
//! "and then accordingly verify" -- the two are kept distinct on purpose,
//! since each matches its own golden fixture.

use crate::model::{Comment, NewsItem, VariantConfig, Verdict};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("comment list is empty")]
    EmptyComments,
    #[error("comment chunk is empty")]
    EmptyChunk,
    #[error("comments are not sorted by offset")]
    UnsortedComments,
}

/// Which template a prompt was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    VanillaNews,
    RationalNews,
    VanillaComments,
    ConflictingComments,
    CopStep,
    FinalRender,
}

const OPTIONS_PLAIN: &str =
    "Please choose the answer from the following options: A. Fake, B. Real.";
const OPTIONS_AFTER_RESULTS: &str =
    "Based on above results, please choose the answer from the following options: A. Fake, B. Real.";
const RATIONAL_DIRECTIVE: &str =
    "Based on the writing style and the commonsense knowledge, estimate the credibility of the news.";
const CONFLICTING_DIRECTIVE_STANDALONE: &str =
    "Based on the comments, analyze whether there are any rebuttals or conflicts, and accordingly verify the authenticity of the news.";
const CONFLICTING_DIRECTIVE_STEP: &str =
    "Based on the comments, analyze whether there are any rebuttals or conflicts, and then accordingly verify the authenticity of the news.";
const VANILLA_COMMENTS_DIRECTIVE: &str =
    "Based on the comments, verify the authenticity of the news.";

fn news_sentence(news: &NewsItem) -> String {
    format!("There is a piece of news: \"{}\"", news.content)
}

fn comments_block(comments: &[Comment]) -> String {
    let quoted: Vec<String> = comments.iter().map(|c| format!("\"{}\"", c.text)).collect();
    format!("There are comments for the news: {}", quoted.join(" "))
}

fn is_sorted(comments: &[Comment]) -> bool {
    comments.windows(2).all(|w| w[0].offset_s <= w[1].offset_s)
}

/// News-only prompt that asks for a verdict with no guidance.
pub fn build_vanilla_news(news: &NewsItem) -> String {
    format!(
        "{} Verify the credibility of the news. {}",
        news_sentence(news),
        OPTIONS_PLAIN
    )
}

/// News-only prompt directing attention to writing style and commonsense
/// plausibility.
pub fn build_rational_news(news: &NewsItem) -> String {
    format!(
        "{} {} {}",
        news_sentence(news),
        RATIONAL_DIRECTIVE,
        OPTIONS_AFTER_RESULTS
    )
}

/// News plus comments, asking for a verdict with no guidance.
pub fn build_vanilla_comments(
    news: &NewsItem,
    comments: &[Comment],
) -> Result<String, PromptError> {
    if comments.is_empty() {
        return Err(PromptError::EmptyComments);
    }
    if !is_sorted(comments) {
        return Err(PromptError::UnsortedComments);
    }
    Ok(format!(
        "{} {} {} {}",
        news_sentence(news),
        comments_block(comments),
        VANILLA_COMMENTS_DIRECTIVE,
        OPTIONS_PLAIN
    ))
}

/// News plus comments, directing attention to rebuttals or conflicts
/// among the comments.
pub fn build_conflicting_comments(
    news: &NewsItem,
    comments: &[Comment],
) -> Result<String, PromptError> {
    if comments.is_empty() {
        return Err(PromptError::EmptyComments);
    }
    if !is_sorted(comments) {
        return Err(PromptError::UnsortedComments);
    }
    Ok(format!(
        "{} {} {} {}",
        news_sentence(news),
        comments_block(comments),
        CONFLICTING_DIRECTIVE_STANDALONE,
        OPTIONS_AFTER_RESULTS
    ))
}

/// One chain step: news, a chunk of comments, and both directives.
pub fn build_cop_step(news: &NewsItem, chunk: &[Comment]) -> Result<String, PromptError> {
    if chunk.is_empty() {
        return Err(PromptError::EmptyChunk);
    }
    Ok(format!(
        "{} {} You need to do: (1) {} (2) {} {}",
        news_sentence(news),
        comments_block(chunk),
        RATIONAL_DIRECTIVE,
        CONFLICTING_DIRECTIVE_STEP,
        OPTIONS_AFTER_RESULTS
    ))
}

/// Step prompt under ablation switches. With both directives on this is
/// identical to [`build_cop_step`]; with both off it degrades to the
/// vanilla comments form. Dropping the rational directive collapses the
/// numbering so the remaining directive is (1).
pub fn build_variant_step(
    news: &NewsItem,
    chunk: &[Comment],
    variant: &VariantConfig,
) -> Result<String, PromptError> {
    if chunk.is_empty() {
        return Err(PromptError::EmptyChunk);
    }
    match (variant.rational_prompts, variant.conflicting_prompts) {
        (true, true) => build_cop_step(news, chunk),
        (true, false) => Ok(format!(
            "{} {} You need to do: (1) {} (2) {} {}",
            news_sentence(news),
            comments_block(chunk),
            RATIONAL_DIRECTIVE,
            VANILLA_COMMENTS_DIRECTIVE,
            OPTIONS_AFTER_RESULTS
        )),
        (false, true) => Ok(format!(
            "{} {} You need to do: (1) {} {}",
            news_sentence(news),
            comments_block(chunk),
            CONFLICTING_DIRECTIVE_STEP,
            OPTIONS_AFTER_RESULTS
        )),
        (false, false) => Ok(format!(
            "{} {} {} {}",
            news_sentence(news),
            comments_block(chunk),
            VANILLA_COMMENTS_DIRECTIVE,
            OPTIONS_PLAIN
        )),
    }
}

/// News-only fallback used when a sample has no comments at all.
pub fn build_news_only_step(news: &NewsItem, variant: &VariantConfig) -> String {
    if variant.rational_prompts {
        build_rational_news(news)
    } else {
        build_vanilla_news(news)
    }
}

/// Closing line rendered after a chain completes.
pub fn render_final(final_verdict: Verdict) -> String {
    let word = match final_verdict {
        Verdict::Fake => "fake",
        Verdict::Real => "real",
        Verdict::Undetermined => "undetermined",
    };
    format!(
        "The final estimation of the veracity of the news is: The news is {}.",
        word
    )
}
