//! Chain orchestration: chunk comments in time order, reason over the
//! chunks sequentially in one session, and take the last step's verdict
//! as the final estimation. Also the non-chained single-step variant with
//! seeded overflow subsampling.

use crate::backend::{Backend, BackendError};
use crate::model::{ChainResult, Comment, NewsItem, PropagationSample, StepRecord, VariantConfig};
use crate::parser::parse_verdict;
use crate::prompt::{build_news_only_step, build_variant_step};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("length limit too small: even the news-only prompt does not fit")]
    LimitTooSmall,
    #[error("backend failed at step {step}: {source}")]
    Backend {
        step: usize,
        /// Transcript of the steps completed before the failure.
        partial: Vec<StepRecord>,
        source: BackendError,
    },
}

/// Time-ordered chunks of size `k`; only the last may be smaller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunking {
    pub chunks: Vec<Vec<Comment>>,
    pub k: usize,
}

/// Splits sorted comments into ceil(len/k) chunks in time order.
pub fn chunk_comments(comments: &[Comment], k: usize) -> Result<Chunking, ChainError> {
    if k < 1 {
        return Err(ChainError::InvalidK);
    }
    let chunks = comments.chunks(k).map(|c| c.to_vec()).collect();
    Ok(Chunking { chunks, k })
}

fn prompt_chars(prompt: &str) -> usize {
    prompt.chars().count()
}

fn render(news: &NewsItem, subset: &[Comment], variant: &VariantConfig) -> String {
    if subset.is_empty() {
        build_news_only_step(news, variant)
    } else {
        build_variant_step(news, subset, variant).expect("non-empty chunk renders")
    }
}

/// Largest seeded-random subset of `comments` (re-sorted by offset) whose
/// rendered prompt fits the length budget. Deterministic given the seed:
/// a fixed seeded permutation is prefix-sampled, so prompt length is
/// monotone in subset size and a binary search finds the cut.
pub fn fit_to_limit(
    comments: &[Comment],
    news: &NewsItem,
    variant: &VariantConfig,
    rng_seed: u64,
) -> Result<Vec<Comment>, ChainError> {
    let limit = variant.length_limit_chars;
    if prompt_chars(&render(news, comments, variant)) <= limit {
        return Ok(comments.to_vec());
    }
    if prompt_chars(&render(news, &[], variant)) > limit {
        return Err(ChainError::LimitTooSmall);
    }

    let mut order: Vec<usize> = (0..comments.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
    let subset = |m: usize| -> Vec<Comment> {
        let mut picked: Vec<usize> = order[..m].to_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| comments[i].clone()).collect()
    };

    // largest m with a fitting prompt; fits(0) holds, fits(len) does not
    let (mut lo, mut hi) = (0usize, comments.len());
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if prompt_chars(&render(news, &subset(mid), variant)) <= limit {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(subset(lo))
}

fn run_step(
    session: &mut crate::backend::Session,
    prompt: String,
    step_index: usize,
    subsampled: bool,
    partial: &[StepRecord],
) -> Result<StepRecord, ChainError> {
    let response = session.send(&prompt).map_err(|source| ChainError::Backend {
        step: step_index,
        partial: partial.to_vec(),
        source,
    })?;
    let parsed = parse_verdict(&response);
    Ok(StepRecord {
        step_index,
        prompt_text: prompt,
        raw_response: response,
        parsed,
        subsampled,
    })
}

/// Runs the chained variant: one session, one step per chunk, final
/// verdict from the last step. A comment-free sample degenerates to a
/// single news-only step.
pub fn run_chain(
    sample: &PropagationSample,
    variant: &VariantConfig,
    backend: &Arc<Backend>,
    rng_seed: u64,
) -> Result<ChainResult, ChainError> {
    let mut session = backend.open_session();
    let mut steps: Vec<StepRecord> = Vec::new();

    if sample.comments.is_empty() {
        let prompt = build_news_only_step(&sample.news, variant);
        let record = run_step(&mut session, prompt, 1, false, &steps)?;
        let final_verdict = record.parsed;
        return Ok(ChainResult {
            sample_id: sample.id().to_string(),
            steps: vec![record],
            final_verdict,
            comment_count_used: 0,
            news_only: true,
        });
    }

    let chunking = chunk_comments(&sample.comments, variant.k)?;
    let mut comment_count_used = 0;
    for (i, chunk) in chunking.chunks.iter().enumerate() {
        let step_index = i + 1;
        let mut subset = chunk.clone();
        let mut subsampled = false;
        if prompt_chars(&render(&sample.news, &subset, variant)) > variant.length_limit_chars {
            subset = fit_to_limit(
                chunk,
                &sample.news,
                variant,
                rng_seed.wrapping_add(step_index as u64),
            )?;
            subsampled = true;
        }
        comment_count_used += subset.len();
        let prompt = render(&sample.news, &subset, variant);
        let record = run_step(&mut session, prompt, step_index, subsampled, &steps)?;
        steps.push(record);
    }

    let final_verdict = steps.last().expect("at least one chunk").parsed;
    Ok(ChainResult {
        sample_id: sample.id().to_string(),
        steps,
        final_verdict,
        comment_count_used,
        news_only: false,
    })
}

/// Runs the non-chained variant: a single step over all comments,
/// subsampled to the length budget when needed.
pub fn run_flat(
    sample: &PropagationSample,
    variant: &VariantConfig,
    backend: &Arc<Backend>,
    rng_seed: u64,
) -> Result<ChainResult, ChainError> {
    let mut session = backend.open_session();

    if sample.comments.is_empty() {
        let prompt = build_news_only_step(&sample.news, variant);
        let record = run_step(&mut session, prompt, 1, false, &[])?;
        let final_verdict = record.parsed;
        return Ok(ChainResult {
            sample_id: sample.id().to_string(),
            steps: vec![record],
            final_verdict,
            comment_count_used: 0,
            news_only: true,
        });
    }

    let subset = fit_to_limit(&sample.comments, &sample.news, variant, rng_seed)?;
    let subsampled = subset.len() < sample.comments.len();
    let prompt = render(&sample.news, &subset, variant);
    let record = run_step(&mut session, prompt, 1, subsampled, &[])?;
    let final_verdict = record.parsed;
    Ok(ChainResult {
        sample_id: sample.id().to_string(),
        steps: vec![record],
        final_verdict,
        comment_count_used: subset.len(),
        news_only: false,
    })
}

/// Dispatches on the chaining switch.
pub fn run_detection(
    sample: &PropagationSample,
    variant: &VariantConfig,
    backend: &Arc<Backend>,
    rng_seed: u64,
) -> Result<ChainResult, ChainError> {
    if variant.chaining {
        run_chain(sample, variant, backend, rng_seed)
    } else {
        run_flat(sample, variant, backend, rng_seed)
    }
}
