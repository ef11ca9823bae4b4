//! Core domain types shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed input: news content is empty for sample `{0}`")]
    MalformedInput(String),
}

/// Language of the news post body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    En,
    Zh,
    Other,
}

/// A news post: the root of a propagation thread.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsItem {
    pub id: String,
    pub content: String,
    #[serde(default)]
    pub language: Language,
}

/// One user comment, timed relative to the news post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub text: String,
    /// Seconds since the news post.
    pub offset_s: u64,
}

/// Ground-truth label. Binary only; unverified classes are dropped at
/// ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundTruth {
    Fake,
    Real,
}

/// A parsed model judgment. `Undetermined` covers refusals and responses
/// with no recognizable answer; it is never a ground-truth value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Fake,
    Real,
    Undetermined,
}

/// A news post plus its time-ordered comments and optional label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationSample {
    pub news: NewsItem,
    pub comments: Vec<Comment>,
    pub truth: Option<GroundTruth>,
}

impl PropagationSample {
    pub fn id(&self) -> &str {
        &self.news.id
    }
}

/// Transcript of one reasoning step inside a chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based position in the chain; strictly increasing.
    pub step_index: usize,
    pub prompt_text: String,
    pub raw_response: String,
    pub parsed: Verdict,
    /// True when the step's chunk had to be subsampled to fit the length
    /// limit.
    pub subsampled: bool,
}

/// Full transcript of a chain run over one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainResult {
    pub sample_id: String,
    pub steps: Vec<StepRecord>,
    /// Equals the last step's parsed verdict whenever steps are non-empty.
    pub final_verdict: Verdict,
    /// Comments actually rendered into prompts across all steps.
    pub comment_count_used: usize,
    /// True when the sample had no comments and the chain degenerated to a
    /// single news-only step.
    pub news_only: bool,
}

/// Ablation switches plus chunk size and prompt length budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantConfig {
    pub rational_prompts: bool,
    pub conflicting_prompts: bool,
    pub chaining: bool,
    /// Comments per reasoning step.
    pub k: usize,
    /// Budget for a fully rendered prompt, in characters.
    pub length_limit_chars: usize,
    pub temperature: f64,
}

impl Default for VariantConfig {
    fn default() -> Self {
        Self {
            rational_prompts: true,
            conflicting_prompts: true,
            chaining: true,
            k: 100,
            length_limit_chars: 16_000,
            temperature: 0.0,
        }
    }
}

impl VariantConfig {
    pub fn without_rational(mut self) -> Self {
        self.rational_prompts = false;
        self
    }

    pub fn without_conflicting(mut self) -> Self {
        self.conflicting_prompts = false;
        self
    }

    pub fn without_chaining(mut self) -> Self {
        self.chaining = false;
        self
    }
}

/// Canonicalizes a raw sample: drops comments that are empty after
/// trimming, stably sorts the rest by offset, and rejects samples whose
/// news content is blank.
///
/// Idempotent, and preserves the multiset of non-empty comment texts.
pub fn validate_sample(mut raw: PropagationSample) -> Result<PropagationSample, ModelError> {
    if raw.news.content.trim().is_empty() {
        return Err(ModelError::MalformedInput(raw.news.id));
    }
    raw.comments.retain(|c| !c.text.trim().is_empty());
    raw.comments.sort_by_key(|c| c.offset_s);
    Ok(raw)
}
