//! Batch detection runs and metrics: confusion matrix, accuracy, early
//! detection curves, and comment-amount bins.
//!
//! The positive class is Fake. An Undetermined verdict counts as Real in
//! the confusion matrix but is also reported separately, so hedged answers
//! stay visible instead of silently inflating either class.

use crate::backend::Backend;
use crate::chain::run_detection;
use crate::dataset::apply_deadline;
use crate::model::{GroundTruth, PropagationSample, VariantConfig, Verdict};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("truth and prediction lengths differ: {truths} vs {predictions}")]
    LengthMismatch { truths: usize, predictions: usize },
    #[error("no labeled samples to score")]
    EmptyMatrix,
    #[error("deadlines must be strictly ascending")]
    UnsortedDeadlines,
    #[error("bin edges must be strictly ascending and non-empty")]
    BadBinEdges,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Builds the confusion matrix over paired labels and predictions; the
/// second return value counts Undetermined predictions (scored as Real).
pub fn confusion(
    truths: &[GroundTruth],
    predictions: &[Verdict],
) -> Result<(ConfusionMatrix, usize), EvalError> {
    if truths.len() != predictions.len() {
        return Err(EvalError::LengthMismatch {
            truths: truths.len(),
            predictions: predictions.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    let mut undetermined = 0;
    for (t, p) in truths.iter().zip(predictions) {
        let p_fake = matches!(p, Verdict::Fake);
        if matches!(p, Verdict::Undetermined) {
            undetermined += 1;
        }
        match (t, p_fake) {
            (GroundTruth::Fake, true) => cm.tp += 1,
            (GroundTruth::Fake, false) => cm.fn_ += 1,
            (GroundTruth::Real, true) => cm.fp += 1,
            (GroundTruth::Real, false) => cm.tn += 1,
        }
    }
    Ok((cm, undetermined))
}

/// Computes accuracy, precision, recall, and F1. Any zero-denominator
/// metric is 0, not NaN, so reports stay serializable and comparable.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        accuracy: ratio(cm.tp + cm.tn, total),
        precision,
        recall,
        f1,
    })
}

/// One sample's outcome in a batch run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSample {
    pub id: String,
    pub truth: Option<GroundTruth>,
    pub predicted: Verdict,
    pub steps_used: usize,
    pub comments_used: usize,
    /// True when the backend failed for this sample; the prediction is then
    /// Undetermined.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub labeled: usize,
    pub confusion: ConfusionMatrix,
    pub undetermined: usize,
    pub failures: usize,
    pub metrics: Metrics,
    pub per_sample: Vec<PerSample>,
}

/// Runs detection over a corpus with a fixed worker pool. Per-sample
/// backend failures become Undetermined predictions; the batch never
/// aborts. Output order always matches input order regardless of worker
/// scheduling.
pub fn evaluate_batch(
    samples: &[PropagationSample],
    variant: &VariantConfig,
    backend: &Arc<Backend>,
    seed: u64,
    workers: usize,
) -> Vec<PerSample> {
    let n = samples.len();
    let slots: Vec<Mutex<Option<PerSample>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let s = &samples[i];
                let record = match run_detection(s, variant, backend, seed.wrapping_add(i as u64)) {
                    Ok(result) => PerSample {
                        id: result.sample_id,
                        truth: s.truth,
                        predicted: result.final_verdict,
                        steps_used: result.steps.len(),
                        comments_used: result.comment_count_used,
                        failed: false,
                    },
                    Err(_) => PerSample {
                        id: s.id().to_string(),
                        truth: s.truth,
                        predicted: Verdict::Undetermined,
                        steps_used: 0,
                        comments_used: 0,
                        failed: true,
                    },
                };
                *slots[i].lock().unwrap() = Some(record);
            });
        }
    });

    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every slot filled"))
        .collect()
}

/// Scores a finished batch. Unlabeled samples are excluded from the
/// confusion matrix but still counted in `n`.
pub fn score(per_sample: Vec<PerSample>) -> Result<EvalReport, EvalError> {
    let n = per_sample.len();
    let mut truths = Vec::new();
    let mut predictions = Vec::new();
    for r in &per_sample {
        if let Some(t) = r.truth {
            truths.push(t);
            predictions.push(r.predicted);
        }
    }
    let (cm, undetermined) = confusion(&truths, &predictions)?;
    let metrics = metrics(&cm)?;
    Ok(EvalReport {
        n,
        labeled: truths.len(),
        confusion: cm,
        undetermined,
        failures: per_sample.iter().filter(|r| r.failed).count(),
        metrics,
        per_sample,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub deadline_s: u64,
    pub accuracy: f64,
    pub n: usize,
}

/// Accuracy as a function of an inclusive comment deadline. Each point
/// re-runs detection over the corpus truncated to `offset_s <= deadline`.
/// Deadlines must be strictly ascending.
pub fn early_curve(
    samples: &[PropagationSample],
    deadlines: &[u64],
    variant: &VariantConfig,
    backend: &Arc<Backend>,
    seed: u64,
    workers: usize,
) -> Result<Vec<CurvePoint>, EvalError> {
    if deadlines.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::UnsortedDeadlines);
    }
    let mut curve = Vec::with_capacity(deadlines.len());
    for &deadline in deadlines {
        let truncated: Vec<_> = samples.iter().map(|s| apply_deadline(s, deadline)).collect();
        let per_sample = evaluate_batch(&truncated, variant, backend, seed, workers);
        let report = score(per_sample)?;
        curve.push(CurvePoint {
            deadline_s: deadline,
            accuracy: report.metrics.accuracy,
            n: report.labeled,
        });
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinPoint {
    pub lo: usize,
    /// Exclusive upper edge; the last bin is unbounded.
    pub hi: Option<usize>,
    /// None when the bin holds no labeled samples.
    pub accuracy: Option<f64>,
    pub n: usize,
}

/// Accuracy grouped by total comment count per sample. Edges are strictly
/// ascending; bins are `[e_i, e_{i+1})` plus a final `[e_last, inf)`.
pub fn amount_bins(
    samples: &[PropagationSample],
    per_sample: &[PerSample],
    edges: &[usize],
) -> Result<Vec<BinPoint>, EvalError> {
    if edges.is_empty() || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::BadBinEdges);
    }
    if samples.len() != per_sample.len() {
        return Err(EvalError::LengthMismatch {
            truths: samples.len(),
            predictions: per_sample.len(),
        });
    }

    let mut bins: Vec<(Vec<GroundTruth>, Vec<Verdict>)> =
        vec![(Vec::new(), Vec::new()); edges.len()];
    for (s, r) in samples.iter().zip(per_sample) {
        let count = s.comments.len();
        if count < edges[0] {
            continue;
        }
        let idx = edges.partition_point(|&e| e <= count) - 1;
        if let Some(t) = r.truth {
            bins[idx].0.push(t);
            bins[idx].1.push(r.predicted);
        }
    }

    let mut out = Vec::with_capacity(edges.len());
    for (i, (truths, predictions)) in bins.iter().enumerate() {
        let accuracy = if truths.is_empty() {
            None
        } else {
            let (cm, _) = confusion(truths, predictions)?;
            Some(metrics(&cm)?.accuracy)
        };
        out.push(BinPoint {
            lo: edges[i],
            hi: edges.get(i + 1).copied(),
            accuracy,
            n: truths.len(),
        });
    }
    Ok(out)
}

/// Aligned plain-text summary table. Deterministic given the report; no
/// timestamps or environment details.
pub fn render_report_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "samples        {:>8}", report.n);
    let _ = writeln!(out, "labeled        {:>8}", report.labeled);
    let _ = writeln!(out, "tp             {:>8}", report.confusion.tp);
    let _ = writeln!(out, "fp             {:>8}", report.confusion.fp);
    let _ = writeln!(out, "fn             {:>8}", report.confusion.fn_);
    let _ = writeln!(out, "tn             {:>8}", report.confusion.tn);
    let _ = writeln!(out, "undetermined   {:>8}", report.undetermined);
    let _ = writeln!(out, "failures       {:>8}", report.failures);
    let _ = writeln!(out, "accuracy       {:>8.4}", report.metrics.accuracy);
    let _ = writeln!(out, "precision      {:>8.4}", report.metrics.precision);
    let _ = writeln!(out, "recall         {:>8.4}", report.metrics.recall);
    let _ = writeln!(out, "f1             {:>8.4}", report.metrics.f1);
    out
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("deadline_s,accuracy,n\n");
    for p in curve {
        let _ = writeln!(out, "{},{:.6},{}", p.deadline_s, p.accuracy, p.n);
    }
    out
}

pub fn bins_csv(bins: &[BinPoint]) -> String {
    let mut out = String::from("bin_lo,bin_hi,accuracy,n\n");
    for b in bins {
        let hi = b.hi.map(|h| h.to_string()).unwrap_or_default();
        let acc = b.accuracy.map(|a| format!("{a:.6}")).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", b.lo, hi, acc, b.n);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedProvider;
    use crate::dataset::{generate_synthetic, SynthConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn confusion_counts() {
        let truths = vec![
            GroundTruth::Fake,
            GroundTruth::Fake,
            GroundTruth::Real,
            GroundTruth::Real,
            GroundTruth::Fake,
        ];
        let predictions = vec![
            Verdict::Fake,
            Verdict::Real,
            Verdict::Fake,
            Verdict::Real,
            Verdict::Undetermined,
        ];
        let (cm, undetermined) = confusion(&truths, &predictions).unwrap();
        assert_eq!((cm.tp, cm.fp, cm.fn_, cm.tn), (1, 1, 2, 1));
        assert_eq!(undetermined, 1);
    }

    #[test]
    fn length_mismatch_rejected() {
        let err = confusion(&[GroundTruth::Fake], &[]).unwrap_err();
        assert!(matches!(err, EvalError::LengthMismatch { .. }));
    }

    #[test]
    fn empty_matrix_rejected() {
        assert_eq!(
            metrics(&ConfusionMatrix::default()).unwrap_err(),
            EvalError::EmptyMatrix
        );
    }

    #[test]
    fn zero_denominators_give_zero() {
        // no fake predictions and no fake labels: precision, recall, f1 all 0
        let cm = ConfusionMatrix {
            tp: 0,
            fp: 0,
            fn_: 0,
            tn: 5,
        };
        let m = metrics(&cm).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn metrics_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..60);
            let truths: Vec<_> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        GroundTruth::Fake
                    } else {
                        GroundTruth::Real
                    }
                })
                .collect();
            let predictions: Vec<_> = (0..n)
                .map(|_| match rng.gen_range(0..3) {
                    0 => Verdict::Fake,
                    1 => Verdict::Real,
                    _ => Verdict::Undetermined,
                })
                .collect();
            let (cm, _) = confusion(&truths, &predictions).unwrap();
            let m = metrics(&cm).unwrap();

            // element-by-element recount
            let mut correct = 0usize;
            for (t, p) in truths.iter().zip(&predictions) {
                let p_fake = matches!(p, Verdict::Fake);
                let t_fake = matches!(t, GroundTruth::Fake);
                if p_fake == t_fake {
                    correct += 1;
                }
            }
            assert!((m.accuracy - correct as f64 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_output_order_matches_input() {
        let corpus = generate_synthetic(&SynthConfig {
            n_samples: 20,
            ..SynthConfig::default()
        });
        let backend = Arc::new(Backend::new(Box::new(ScriptedProvider), "scripted", 0.0));
        let per = evaluate_batch(&corpus, &VariantConfig::default(), &backend, 0, 4);
        let ids: Vec<_> = per.iter().map(|r| r.id.as_str()).collect();
        let expected: Vec<_> = corpus.iter().map(|s| s.id()).collect();
        assert_eq!(ids, expected);
    }

    #[test]
    fn batch_worker_count_does_not_change_results() {
        let corpus = generate_synthetic(&SynthConfig {
            n_samples: 30,
            ..SynthConfig::default()
        });
        let backend = Arc::new(Backend::new(Box::new(ScriptedProvider), "scripted", 0.0));
        let variant = VariantConfig::default();
        let one = evaluate_batch(&corpus, &variant, &backend, 7, 1);
        let eight = evaluate_batch(&corpus, &variant, &backend, 7, 8);
        assert_eq!(one, eight);
    }

    #[test]
    fn scripted_corpus_scores_perfectly() {
        let corpus = generate_synthetic(&SynthConfig {
            n_samples: 40,
            ..SynthConfig::default()
        });
        let backend = Arc::new(Backend::new(Box::new(ScriptedProvider), "scripted", 0.0));
        let per = evaluate_batch(&corpus, &VariantConfig::default(), &backend, 0, 4);
        let report = score(per).unwrap();
        assert_eq!(report.metrics.accuracy, 1.0);
        assert_eq!(report.failures, 0);
    }

    #[test]
    fn curve_rejects_unsorted_deadlines() {
        let backend = Arc::new(Backend::new(Box::new(ScriptedProvider), "scripted", 0.0));
        let err = early_curve(&[], &[10, 10], &VariantConfig::default(), &backend, 0, 1)
            .unwrap_err();
        assert_eq!(err, EvalError::UnsortedDeadlines);
    }

    #[test]
    fn bins_partition_and_empty_bin() {
        let corpus = generate_synthetic(&SynthConfig {
            n_samples: 12,
            comments_min: 5,
            comments_max: 10,
            ..SynthConfig::default()
        });
        let backend = Arc::new(Backend::new(Box::new(ScriptedProvider), "scripted", 0.0));
        let per = evaluate_batch(&corpus, &VariantConfig::default(), &backend, 0, 2);
        let bins = amount_bins(&corpus, &per, &[0, 5, 50]).unwrap();
        assert_eq!(bins.len(), 3);
        assert_eq!(bins[0].n, 0);
        assert_eq!(bins[0].accuracy, None);
        assert_eq!(bins[1].n, 12);
        assert_eq!(bins[2].n, 0);
        assert_eq!(bins[1].hi, Some(50));
        assert_eq!(bins[2].hi, None);
        let total: usize = bins.iter().map(|b| b.n).sum();
        assert_eq!(total, corpus.len());
    }

    #[test]
    fn bins_reject_bad_edges() {
        assert_eq!(amount_bins(&[], &[], &[]).unwrap_err(), EvalError::BadBinEdges);
        assert_eq!(
            amount_bins(&[], &[], &[3, 3]).unwrap_err(),
            EvalError::BadBinEdges
        );
    }

    #[test]
    fn csv_headers() {
        assert!(curve_csv(&[]).starts_with("deadline_s,accuracy,n\n"));
        assert!(bins_csv(&[]).starts_with("bin_lo,bin_hi,accuracy,n\n"));
    }
}
