//! Dataset ingestion and export in a normalized JSONL schema, deadline
//! slicing, and a seeded synthetic generator whose planted markers make
//! end-to-end outcomes computable in closed form.
//!
//! Converters for the original platform archives are out of scope; users
//! holding that data can map it onto the JSONL schema below, one object
//! per line:
//! `{"id", "content", "lang", "label", "comments": [{"text", "offset_s"}]}`.

use crate::backend::{RUMOR_MARKER, UNKNOWN_MARKER};
use crate::model::{
    validate_sample, Comment, GroundTruth, Language, NewsItem, PropagationSample,
};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
}

/// Counts describing a loaded dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub samples: usize,
    pub fake: usize,
    pub real: usize,
    pub unlabeled: usize,
    pub avg_comments: f64,
    /// Lines dropped for carrying a non-binary label.
    pub dropped_nonbinary: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonlRecord {
    id: String,
    content: String,
    #[serde(default)]
    lang: Language,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    comments: Vec<JsonlComment>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonlComment {
    text: String,
    offset_s: u64,
}

fn parse_label(label: &Option<String>) -> Result<Option<GroundTruth>, ()> {
    match label.as_deref() {
        None => Ok(None),
        Some("fake") => Ok(Some(GroundTruth::Fake)),
        Some("real") => Ok(Some(GroundTruth::Real)),
        Some(_) => Err(()), // non-binary classes are dropped at ingestion
    }
}

/// Parses and validates a JSONL dataset. Lines with non-binary labels
/// (e.g. "unverified") are dropped and counted in the manifest.
pub fn load_jsonl(
    path: &Path,
) -> Result<(Vec<PropagationSample>, DatasetManifest), DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;

    let mut samples = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut dropped_nonbinary = 0usize;

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonlRecord =
            serde_json::from_str(line).map_err(|e| DatasetError::Schema {
                line: lineno,
                message: e.to_string(),
            })?;
        let truth = match parse_label(&record.label) {
            Ok(t) => t,
            Err(()) => {
                dropped_nonbinary += 1;
                continue;
            }
        };
        if !seen_ids.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId(record.id));
        }
        let raw = PropagationSample {
            news: NewsItem {
                id: record.id,
                content: record.content,
                language: record.lang,
            },
            comments: record
                .comments
                .into_iter()
                .map(|c| Comment {
                    text: c.text,
                    offset_s: c.offset_s,
                })
                .collect(),
            truth,
        };
        let validated = validate_sample(raw).map_err(|e| DatasetError::Schema {
            line: lineno,
            message: e.to_string(),
        })?;
        samples.push(validated);
    }

    let manifest = manifest_for(
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into()),
        &samples,
        dropped_nonbinary,
    );
    Ok((samples, manifest))
}

pub fn manifest_for(
    name: String,
    samples: &[PropagationSample],
    dropped_nonbinary: usize,
) -> DatasetManifest {
    let fake = samples
        .iter()
        .filter(|s| s.truth == Some(GroundTruth::Fake))
        .count();
    let real = samples
        .iter()
        .filter(|s| s.truth == Some(GroundTruth::Real))
        .count();
    let total_comments: usize = samples.iter().map(|s| s.comments.len()).sum();
    DatasetManifest {
        name,
        samples: samples.len(),
        fake,
        real,
        unlabeled: samples.len() - fake - real,
        avg_comments: if samples.is_empty() {
            0.0
        } else {
            total_comments as f64 / samples.len() as f64
        },
        dropped_nonbinary,
    }
}

/// Writes samples in the JSONL schema; inverse of [`load_jsonl`] on valid
/// sample lists.
pub fn save_jsonl(path: &Path, samples: &[PropagationSample]) -> Result<(), DatasetError> {
    let mut out = Vec::new();
    for s in samples {
        let record = JsonlRecord {
            id: s.news.id.clone(),
            content: s.news.content.clone(),
            lang: s.news.language,
            label: s.truth.map(|t| {
                match t {
                    GroundTruth::Fake => "fake",
                    GroundTruth::Real => "real",
                }
                .to_string()
            }),
            comments: s
                .comments
                .iter()
                .map(|c| JsonlComment {
                    text: c.text.clone(),
                    offset_s: c.offset_s,
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &record).expect("record serializes");
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(&out).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Keeps exactly the comments posted at or before the deadline.
pub fn apply_deadline(sample: &PropagationSample, deadline_s: u64) -> PropagationSample {
    let mut out = sample.clone();
    out.comments.retain(|c| c.offset_s <= deadline_s);
    out
}

/// Configuration for the synthetic corpus generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_samples: usize,
    /// floor(n_samples * fake_ratio) samples are labeled fake.
    pub fake_ratio: f64,
    pub comments_min: usize,
    pub comments_max: usize,
    /// Probability that an eligible comment of a fake sample carries the
    /// rumor marker (always at least one per marked sample).
    pub marker_rate: f64,
    pub seed: u64,
    /// Fraction of fake samples that get no marker at all.
    pub marker_withhold_ratio: f64,
    /// Markers only appear on comments in this offset window.
    pub marker_offset_min_s: u64,
    pub marker_offset_max_s: u64,
    /// Comment offsets are drawn from [0, offset_max_s].
    pub offset_max_s: u64,
    /// Probability that a sample's news carries the unknown marker, which
    /// makes the scripted backend refuse vanilla probes.
    pub unknown_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 200,
            fake_ratio: 0.5,
            comments_min: 5,
            comments_max: 40,
            marker_rate: 0.2,
            seed: 1,
            marker_withhold_ratio: 0.0,
            marker_offset_min_s: 0,
            marker_offset_max_s: u64::MAX,
            offset_max_s: 86_400,
            unknown_rate: 0.0,
        }
    }
}

const NEWS_TEMPLATES: &[&str] = &[
    "A regional office announced an update to a public schedule today.",
    "Witnesses reported an unusual gathering near the central station.",
    "A company statement described changes to a well known product line.",
    "Officials confirmed a routine inspection at a local facility.",
    "A new report summarized seasonal figures for the transit network.",
];

const COMMENT_TEMPLATES: &[&str] = &[
    "Interesting, following this.",
    "Has anyone confirmed this?",
    "Saw something about this earlier.",
    "Hope more details come out soon.",
    "Sharing with friends.",
    "Not sure what to make of it.",
    "Waiting for an official statement.",
    "This matches what I heard.",
];

/// Deterministic given the seed. Every fake sample that is not withheld
/// carries at least one rumor-marked comment inside the marker offset
/// window; real samples never carry a marker.
pub fn generate_synthetic(cfg: &SynthConfig) -> Vec<PropagationSample> {
    assert!(cfg.comments_min <= cfg.comments_max);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_fake = (cfg.n_samples as f64 * cfg.fake_ratio).floor() as usize;
    let n_withheld = (n_fake as f64 * cfg.marker_withhold_ratio).floor() as usize;

    let marker_lo = cfg.marker_offset_min_s.min(cfg.offset_max_s);
    let marker_hi = cfg.marker_offset_max_s.min(cfg.offset_max_s);
    let marker_window = Uniform::new_inclusive(marker_lo, marker_hi.max(marker_lo));

    let mut samples = Vec::with_capacity(cfg.n_samples);
    for idx in 0..cfg.n_samples {
        let is_fake = idx < n_fake;
        // withheld fakes are the tail of the fake block
        let withheld = is_fake && idx >= n_fake - n_withheld;

        let n_comments = rng.gen_range(cfg.comments_min..=cfg.comments_max);
        let mut comments: Vec<Comment> = (0..n_comments)
            .map(|_| Comment {
                text: COMMENT_TEMPLATES[rng.gen_range(0..COMMENT_TEMPLATES.len())].to_string(),
                offset_s: rng.gen_range(0..=cfg.offset_max_s),
            })
            .collect();
        comments.sort_by_key(|c| c.offset_s);

        if is_fake && !withheld {
            let mut planted = false;
            for c in comments.iter_mut() {
                if c.offset_s >= marker_lo
                    && c.offset_s <= marker_hi
                    && rng.gen_bool(cfg.marker_rate)
                {
                    c.text = format!("{} {RUMOR_MARKER}", c.text);
                    planted = true;
                }
            }
            if !planted {
                // force one marked comment inside the window
                let offset = marker_window.sample(&mut rng);
                let pos = comments.partition_point(|c| c.offset_s <= offset);
                comments.insert(
                    pos,
                    Comment {
                        text: format!("This looks off to me. {RUMOR_MARKER}"),
                        offset_s: offset,
                    },
                );
            }
        }

        let mut content = NEWS_TEMPLATES[idx % NEWS_TEMPLATES.len()].to_string();
        content.push_str(&format!(" (case {idx:04})"));
        if cfg.unknown_rate > 0.0 && rng.gen_bool(cfg.unknown_rate) {
            content.push_str(&format!(" {UNKNOWN_MARKER}"));
        }

        samples.push(PropagationSample {
            news: NewsItem {
                id: format!("synth-{idx:04}"),
                content,
                language: Language::En,
            },
            comments,
            truth: Some(if is_fake {
                GroundTruth::Fake
            } else {
                GroundTruth::Real
            }),
        });
    }
    samples
}
