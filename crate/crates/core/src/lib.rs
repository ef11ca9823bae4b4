//! Rumor detection over social-media propagation threads.
//!
//! A propagation thread is a news post plus the time-ordered comments it
//! receives. The pipeline builds prompts that direct a chat model at the
//! writing style of the news and at rebuttals or conflicts among the
//! comments, splits long comment streams into fixed-size chunks that are
//! reasoned over sequentially in one chat session, and takes the last
//! step's answer as the prediction. Deterministic scripted and replay
//! backends make every stage testable offline.

pub mod backend;
pub mod chain;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod filter;
pub mod model;
pub mod parser;
pub mod prompt;

pub use model::{
    ChainResult, Comment, GroundTruth, Language, NewsItem, PropagationSample, StepRecord,
    VariantConfig, Verdict,
};
