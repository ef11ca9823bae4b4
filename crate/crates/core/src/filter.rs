//! Data-preparation filters: duplicate news, ethics blocklist, subjective
//! content, and the model-probe leakage filter, with an audit report.
//!
//! Pipeline order is fixed: dedupe -> ethics -> subjective -> leakage.
//! The ethics and subjectivity filters are keyword heuristics with
//! configurable term lists; they stand in for a judgment call the source
//! protocol leaves unspecified.

use crate::backend::Backend;
use crate::model::PropagationSample;
use crate::parser::{classify_knowledge_with_refusals, KnowledgeClass, DEFAULT_REFUSAL_PHRASES};
use crate::prompt::build_vanilla_news;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

/// Per-stage removal counts; `input = kept + sum(removed_*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub removed_duplicate: usize,
    pub removed_ethics: usize,
    pub removed_subjective: usize,
    pub removed_leak: usize,
    pub removed_ambiguous: usize,
    pub kept: usize,
    /// Fraction of leakage-stage input the model already knew about.
    pub leak_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterConfig {
    pub ethics_blocklist: Vec<String>,
    pub subjective_markers: Vec<String>,
    pub subjective_threshold: f64,
    pub refusal_phrases: Vec<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            ethics_blocklist: Vec::new(),
            subjective_markers: vec![
                "I think".into(),
                "I feel".into(),
                "in my opinion".into(),
                "I believe".into(),
            ],
            subjective_threshold: 0.5,
            refusal_phrases: DEFAULT_REFUSAL_PHRASES
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

/// Lowercase, collapse whitespace, strip punctuation.
fn normalize_content(content: &str) -> String {
    let lowered = content.to_lowercase();
    let stripped: String = lowered
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Removes samples whose normalized news content repeats an earlier
/// sample's, keeping the first occurrence in input order.
pub fn dedupe(
    samples: Vec<PropagationSample>,
) -> (Vec<PropagationSample>, Vec<PropagationSample>) {
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for s in samples {
        if seen.insert(normalize_content(&s.news.content)) {
            kept.push(s);
        } else {
            removed.push(s);
        }
    }
    (kept, removed)
}

/// Removes samples whose news content contains any blocklist term
/// (case-insensitive substring).
pub fn filter_ethics(
    samples: Vec<PropagationSample>,
    blocklist: &[String],
) -> (Vec<PropagationSample>, Vec<PropagationSample>) {
    let lowered: Vec<String> = blocklist.iter().map(|t| t.to_lowercase()).collect();
    samples.into_iter().partition(|s| {
        let content = s.news.content.to_lowercase();
        !lowered.iter().any(|t| !t.is_empty() && content.contains(t))
    })
}

fn sentence_count(content: &str) -> usize {
    content
        .split(['.', '!', '?'])
        .filter(|s| !s.trim().is_empty())
        .count()
        .max(1)
}

fn marker_occurrences(content: &str, markers: &[String]) -> usize {
    let lowered = content.to_lowercase();
    markers
        .iter()
        .map(|m| {
            let m = m.to_lowercase();
            if m.is_empty() {
                0
            } else {
                lowered.matches(&m).count()
            }
        })
        .sum()
}

/// Removes samples whose first-person-opinion marker density (markers per
/// sentence) exceeds the threshold.
pub fn filter_subjective(
    samples: Vec<PropagationSample>,
    markers: &[String],
    threshold: f64,
) -> (Vec<PropagationSample>, Vec<PropagationSample>) {
    samples.into_iter().partition(|s| {
        let ratio = marker_occurrences(&s.news.content, markers) as f64
            / sentence_count(&s.news.content) as f64;
        ratio <= threshold
    })
}

/// Outcome of the model-probe leakage filter.
#[derive(Debug)]
pub struct LeakageOutcome {
    pub kept: Vec<PropagationSample>,
    pub removed_known: Vec<PropagationSample>,
    pub removed_ambiguous: Vec<PropagationSample>,
    /// Per-sample backend failures; those samples are routed to
    /// `removed_ambiguous`.
    pub failures: usize,
    pub leak_ratio: f64,
}

/// Probes every sample with a vanilla news prompt on a fresh session and
/// keeps only those the model claims no knowledge about. Never mutates
/// sample content.
pub fn probe_leakage(
    samples: Vec<PropagationSample>,
    backend: &Arc<Backend>,
    refusal_phrases: &[String],
    workers: usize,
) -> LeakageOutcome {
    let refusals: Vec<&str> = refusal_phrases.iter().map(String::as_str).collect();
    let n = samples.len();
    let classes: Vec<Mutex<Option<(KnowledgeClass, bool)>>> =
        (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let prompt = build_vanilla_news(&samples[i].news);
                let mut session = backend.open_session();
                let result = match session.send(&prompt) {
                    Ok(response) => (
                        classify_knowledge_with_refusals(&response, &refusals),
                        false,
                    ),
                    Err(_) => (KnowledgeClass::Ambiguous, true),
                };
                *classes[i].lock().unwrap() = Some(result);
            });
        }
    });

    let mut kept = Vec::new();
    let mut removed_known = Vec::new();
    let mut removed_ambiguous = Vec::new();
    let mut failures = 0usize;
    for (s, cell) in samples.into_iter().zip(classes) {
        let (class, failed) = cell.into_inner().unwrap().expect("every sample classified");
        if failed {
            failures += 1;
        }
        match class {
            KnowledgeClass::NoKnowledge => kept.push(s),
            KnowledgeClass::KnowsFact => removed_known.push(s),
            KnowledgeClass::Ambiguous => removed_ambiguous.push(s),
        }
    }

    let leak_ratio = if n == 0 {
        0.0
    } else {
        removed_known.len() as f64 / n as f64
    };
    LeakageOutcome {
        kept,
        removed_known,
        removed_ambiguous,
        failures,
        leak_ratio,
    }
}

/// Runs the full pipeline in its fixed order and assembles the report.
pub fn run_pipeline(
    samples: Vec<PropagationSample>,
    cfg: &FilterConfig,
    backend: &Arc<Backend>,
    workers: usize,
) -> (Vec<PropagationSample>, FilterReport) {
    let input = samples.len();
    let (kept, dup) = dedupe(samples);
    let (kept, ethics) = filter_ethics(kept, &cfg.ethics_blocklist);
    let (kept, subjective) =
        filter_subjective(kept, &cfg.subjective_markers, cfg.subjective_threshold);
    let outcome = probe_leakage(kept, backend, &cfg.refusal_phrases, workers);

    let report = FilterReport {
        input,
        removed_duplicate: dup.len(),
        removed_ethics: ethics.len(),
        removed_subjective: subjective.len(),
        removed_leak: outcome.removed_known.len(),
        removed_ambiguous: outcome.removed_ambiguous.len(),
        kept: outcome.kept.len(),
        leak_ratio: outcome.leak_ratio,
    };
    (outcome.kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ScriptedProvider, UNKNOWN_MARKER};
    use crate::model::{Language, NewsItem};

    fn sample(id: &str, content: &str) -> PropagationSample {
        PropagationSample {
            news: NewsItem {
                id: id.into(),
                content: content.into(),
                language: Language::En,
            },
            comments: vec![],
            truth: None,
        }
    }

    #[test]
    fn dedupe_normalizes() {
        let (kept, removed) = dedupe(vec![
            sample("a", "Hello  World"),
            sample("b", "hello world."),
        ]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].news.id, "a");
        assert_eq!(removed.len(), 1);
    }

    #[test]
    fn dedupe_distinct_identity() {
        let input = vec![sample("a", "one"), sample("b", "two")];
        let (kept, removed) = dedupe(input.clone());
        assert_eq!(kept, input);
        assert!(removed.is_empty());
    }

    #[test]
    fn dedupe_matches_pairwise_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pool = ["alpha beta", "Alpha, beta!", "gamma", "GAMMA  ", "delta?"];
        let corpus: Vec<_> = (0..50)
            .map(|i| sample(&format!("s{i}"), pool[rng.gen_range(0..pool.len())]))
            .collect();
        let (kept, _) = dedupe(corpus.clone());

        // brute-force: keep sample i iff no j < i normalizes equal
        let mut expected = Vec::new();
        for (i, s) in corpus.iter().enumerate() {
            let dup = corpus[..i]
                .iter()
                .any(|p| normalize_content(&p.news.content) == normalize_content(&s.news.content));
            if !dup {
                expected.push(s.clone());
            }
        }
        assert_eq!(kept, expected);
    }

    #[test]
    fn ethics_blocklist() {
        let blocklist = vec!["gore".to_string()];
        let (kept, removed) = filter_ethics(
            vec![sample("a", "no issues here"), sample("b", "graphic GORE inside")],
            &blocklist,
        );
        assert_eq!(kept.len(), 1);
        assert_eq!(removed[0].news.id, "b");

        let (kept, removed) = filter_ethics(vec![sample("a", "anything")], &[]);
        assert_eq!(kept.len(), 1);
        assert!(removed.is_empty());
    }

    #[test]
    fn subjective_ratio() {
        let (kept, removed) = filter_subjective(
            vec![
                sample("a", "I think X. I feel Y."),
                sample("b", "A factual report. It happened at noon."),
            ],
            &FilterConfig::default().subjective_markers,
            0.5,
        );
        assert_eq!(removed.len(), 1);
        assert_eq!(removed[0].news.id, "a");
        assert_eq!(kept[0].news.id, "b");
    }

    #[test]
    fn subjective_threshold_one_keeps_most() {
        let (kept, _) = filter_subjective(
            vec![sample("a", "I think X. But here are facts.")],
            &FilterConfig::default().subjective_markers,
            1.0,
        );
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn leakage_probe_with_scripted_rule() {
        let backend = Arc::new(Backend::new(Box::new(ScriptedProvider), "scripted", 0.0));
        let corpus = vec![
            sample("known", "a fact the model recites"),
            sample("unknown", &format!("mystery event {UNKNOWN_MARKER}")),
        ];
        let outcome = probe_leakage(
            corpus,
            &backend,
            &FilterConfig::default().refusal_phrases,
            2,
        );
        assert_eq!(outcome.kept.len(), 1);
        assert_eq!(outcome.kept[0].news.id, "unknown");
        assert_eq!(outcome.removed_known.len(), 1);
        assert_eq!(outcome.leak_ratio, 0.5);
        assert_eq!(outcome.failures, 0);
    }

    #[test]
    fn filters_are_idempotent_on_their_output() {
        let cfg = FilterConfig::default();
        let corpus = vec![
            sample("a", "one"),
            sample("b", "one!"),
            sample("c", "I think this. I feel that."),
        ];
        let (kept1, _) = dedupe(corpus);
        let (kept2, removed2) = dedupe(kept1.clone());
        assert_eq!(kept1, kept2);
        assert!(removed2.is_empty());

        let (s1, _) =
            filter_subjective(kept1, &cfg.subjective_markers, cfg.subjective_threshold);
        let (s2, r2) =
            filter_subjective(s1.clone(), &cfg.subjective_markers, cfg.subjective_threshold);
        assert_eq!(s1, s2);
        assert!(r2.is_empty());
    }
}
