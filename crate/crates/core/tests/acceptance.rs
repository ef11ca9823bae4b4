//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.
//!
//! Run with: cargo test --test acceptance -- --nocapture

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rumorcheck::backend::{Backend, ReplayProvider, ScriptedProvider, RUMOR_MARKER};
use rumorcheck::chain::chunk_comments;
use rumorcheck::dataset::{apply_deadline, generate_synthetic, load_jsonl, SynthConfig};
use rumorcheck::eval::{confusion, early_curve, metrics, ConfusionMatrix};
use rumorcheck::filter::{probe_leakage, FilterConfig};
use rumorcheck::model::{Comment, GroundTruth, NewsItem, VariantConfig, Verdict};
use rumorcheck::parser::{classify_knowledge, parse_verdict, KnowledgeClass};
use rumorcheck::prompt::{
    build_conflicting_comments, build_cop_step, build_rational_news, build_vanilla_comments,
    build_vanilla_news, render_final,
};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("read {name}: {e}"))
}

fn golden(name: &str) -> String {
    // golden files end with a newline the prompts do not contain
    read_fixture(&format!("golden/{name}"))
        .trim_end_matches('\n')
        .to_string()
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rumorcheck"))
}

const SAMSUNG: &str = "Samsung paid Apple one-billion fine, with 20 billion coins in 30 trucks!";
const TRAFFIC: &str = "Around 7 o'clock this morning, a major traffic accident occurred on the \
    Yuncheng to Houma section of the Shanxi Dayun Expressway, 9.3 kilometers away from Houma. A \
    total of 47 vehicles collided in a series, resulting in 3 deaths and 7 injuries.";

fn news(content: &str) -> NewsItem {
    NewsItem {
        id: "n".into(),
        content: content.into(),
        language: Default::default(),
    }
}

fn comments(texts: &[&str]) -> Vec<Comment> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| Comment {
            text: (*t).to_string(),
            offset_s: i as u64,
        })
        .collect()
}

const TRAFFIC_COMMENTS: &[&str] = &[
    "My god!",
    "Blessing...",
    "Why isn't the highway closed on such a foggy day?",
    "Repost",
    "Cherishing life!",
    "How scary!",
    "Blessing.",
    "Drive carefully and pay attention to safety.",
    "Shocking...",
];

/// Criterion 1: prompt builders reproduce the golden templates byte for
/// byte, and the replay fixture histories equal builder output.
fn criterion_prompts() {
    let start = Instant::now();

    assert_eq!(build_vanilla_news(&news(SAMSUNG)), golden("vanilla_news_samsung.txt"));
    assert_eq!(build_rational_news(&news(SAMSUNG)), golden("rational_news_samsung.txt"));
    assert_eq!(build_vanilla_news(&news(TRAFFIC)), golden("vanilla_news_traffic.txt"));
    assert_eq!(build_rational_news(&news(TRAFFIC)), golden("rational_news_traffic.txt"));

    let cs = comments(TRAFFIC_COMMENTS);
    assert_eq!(
        build_vanilla_comments(&news(TRAFFIC), &cs).unwrap(),
        golden("vanilla_comments_traffic.txt")
    );
    assert_eq!(
        build_conflicting_comments(&news(TRAFFIC), &cs).unwrap(),
        golden("conflicting_comments_traffic.txt")
    );

    // the two-step chain sample, chunked at 6, reproduces both step goldens
    let (samples, _) = load_jsonl(&fixture("tab4_sample.jsonl")).unwrap();
    assert_eq!(samples.len(), 1);
    let chunking = chunk_comments(&samples[0].comments, 6).unwrap();
    assert_eq!(chunking.chunks.len(), 2);
    assert_eq!(
        build_cop_step(&samples[0].news, &chunking.chunks[0]).unwrap(),
        golden("cop_step_samsung_step1.txt")
    );
    assert_eq!(
        build_cop_step(&samples[0].news, &chunking.chunks[1]).unwrap(),
        golden("cop_step_samsung_step2.txt")
    );

    // replay fixture user messages are exactly the built prompts
    let replay = read_fixture("replay_tab4.jsonl");
    let records: Vec<serde_json::Value> = replay
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records[0]["messages"][0]["content"], golden("cop_step_samsung_step1.txt"));
    assert_eq!(records[1]["messages"][2]["content"], golden("cop_step_samsung_step2.txt"));

    assert_eq!(
        render_final(Verdict::Fake),
        "The final estimation of the veracity of the news is: The news is fake."
    );
    assert_eq!(
        render_final(Verdict::Real),
        "The final estimation of the veracity of the news is: The news is real."
    );
    assert_eq!(
        render_final(Verdict::Undetermined),
        "The final estimation of the veracity of the news is: The news is undetermined."
    );

    assert!(start.elapsed().as_secs() < 1, "criterion 1 exceeded 1s");
}

/// Criterion 2: chunking matches a ceiling-division oracle on fixed and
/// random cases, preserving order and content.
fn criterion_chunking() {
    let start = Instant::now();

    let mk = |n: usize| -> Vec<Comment> {
        (0..n)
            .map(|i| Comment {
                text: format!("c{i}"),
                offset_s: i as u64,
            })
            .collect()
    };

    let c = chunk_comments(&mk(232), 100).unwrap();
    let sizes: Vec<usize> = c.chunks.iter().map(Vec::len).collect();
    assert_eq!(sizes, vec![100, 100, 32]);

    let c = chunk_comments(&mk(816), 100).unwrap();
    assert_eq!(c.chunks.len(), 9);
    assert_eq!(c.chunks.last().unwrap().len(), 16);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let n = rng.gen_range(0..2000usize);
        let k = rng.gen_range(1..300usize);
        let input = mk(n);
        let c = chunk_comments(&input, k).unwrap();
        let expected_chunks = n.div_ceil(k);
        assert_eq!(c.chunks.len(), expected_chunks);
        for (i, chunk) in c.chunks.iter().enumerate() {
            let expected = if i + 1 < expected_chunks { k } else { n - k * (expected_chunks - 1) };
            assert_eq!(chunk.len(), expected);
        }
        let rejoined: Vec<Comment> = c.chunks.concat();
        assert_eq!(rejoined, input);
    }

    assert!(start.elapsed().as_secs() < 1, "criterion 2 exceeded 1s");
}

/// Criterion 3: the answer parser and knowledge classifier agree with
/// every transcribed response fixture, and the probe fixtures split 3/6.
fn criterion_parser() {
    let text = read_fixture("parser_fixtures.jsonl");
    let mut total = 0;
    let mut no_knowledge = Vec::new();
    let mut knows_fact = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        let id = rec["id"].as_str().unwrap();
        let response = rec["response_text"].as_str().unwrap();

        let verdict = parse_verdict(response);
        let expected = match rec["expected_verdict"].as_str().unwrap() {
            "fake" => Verdict::Fake,
            "real" => Verdict::Real,
            "undetermined" => Verdict::Undetermined,
            other => panic!("bad verdict {other}"),
        };
        assert_eq!(verdict, expected, "verdict mismatch on {id}");

        let knowledge = classify_knowledge(response);
        let expected_k = match rec["expected_knowledge"].as_str().unwrap() {
            "knows_fact" => KnowledgeClass::KnowsFact,
            "no_knowledge" => KnowledgeClass::NoKnowledge,
            "ambiguous" => KnowledgeClass::Ambiguous,
            other => panic!("bad knowledge {other}"),
        };
        assert_eq!(knowledge, expected_k, "knowledge mismatch on {id}");

        if id.starts_with("probe-") {
            total += 1;
            match knowledge {
                KnowledgeClass::NoKnowledge => no_knowledge.push(id.to_string()),
                KnowledgeClass::KnowsFact => knows_fact += 1,
                KnowledgeClass::Ambiguous => {}
            }
        }
    }
    assert_eq!(total, 9);
    assert_eq!(knows_fact, 6);
    assert_eq!(
        no_knowledge,
        vec!["probe-exA01", "probe-exA02", "probe-exA03"]
    );
}

/// Criterion 4: metrics agree with element-by-element recounts to 1e-12
/// over 1000 random label/prediction vectors.
fn criterion_metrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let n = rng.gen_range(1..80usize);
        let truths: Vec<GroundTruth> = (0..n)
            .map(|_| if rng.gen_bool(0.5) { GroundTruth::Fake } else { GroundTruth::Real })
            .collect();
        let predictions: Vec<Verdict> = (0..n)
            .map(|_| match rng.gen_range(0..3) {
                0 => Verdict::Fake,
                1 => Verdict::Real,
                _ => Verdict::Undetermined,
            })
            .collect();
        let (cm, undetermined) = confusion(&truths, &predictions).unwrap();
        let m = metrics(&cm).unwrap();

        let mut oracle = ConfusionMatrix::default();
        let mut oracle_undetermined = 0;
        for (t, p) in truths.iter().zip(&predictions) {
            if matches!(p, Verdict::Undetermined) {
                oracle_undetermined += 1;
            }
            let p_fake = matches!(p, Verdict::Fake);
            match (t, p_fake) {
                (GroundTruth::Fake, true) => oracle.tp += 1,
                (GroundTruth::Fake, false) => oracle.fn_ += 1,
                (GroundTruth::Real, true) => oracle.fp += 1,
                (GroundTruth::Real, false) => oracle.tn += 1,
            }
        }
        assert_eq!(cm, oracle);
        assert_eq!(undetermined, oracle_undetermined);

        let acc = (oracle.tp + oracle.tn) as f64 / n as f64;
        let prec = if oracle.tp + oracle.fp == 0 {
            0.0
        } else {
            oracle.tp as f64 / (oracle.tp + oracle.fp) as f64
        };
        let rec = if oracle.tp + oracle.fn_ == 0 {
            0.0
        } else {
            oracle.tp as f64 / (oracle.tp + oracle.fn_) as f64
        };
        let f1 = if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
        assert!((m.accuracy - acc).abs() < 1e-12);
        assert!((m.precision - prec).abs() < 1e-12);
        assert!((m.recall - rec).abs() < 1e-12);
        assert!((m.f1 - f1).abs() < 1e-12);
    }
}

fn report_accuracy(path: &Path) -> f64 {
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    report["metrics"]["accuracy"].as_f64().unwrap()
}

/// Criterion 5: end-to-end synthetic runs through the CLI, offline, score
/// exactly what the scripted rule implies.
fn criterion_end_to_end() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let report = dir.path().join("report.json");

    let status = cli()
        .args(["--offline", "--seed", "1", "synth", "--n", "200", "--fake-ratio", "0.5"])
        .arg("--out")
        .arg(&corpus)
        .status()
        .unwrap();
    assert!(status.success());

    let status = cli()
        .args(["--offline", "--backend", "scripted", "eval"])
        .arg("--input")
        .arg(&corpus)
        .arg("--report")
        .arg(&report)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(report_accuracy(&report), 1.0);

    // withholding markers from 20% of fakes shifts accuracy to exactly
    // what replaying the scripted rule over the file predicts
    let held = dir.path().join("held.jsonl");
    let held_report = dir.path().join("held_report.json");
    let status = cli()
        .args([
            "--offline", "--seed", "1", "synth", "--n", "200", "--fake-ratio", "0.5",
            "--withhold-ratio", "0.2",
        ])
        .arg("--out")
        .arg(&held)
        .status()
        .unwrap();
    assert!(status.success());

    let (samples, _) = load_jsonl(&held).unwrap();
    let correct = samples
        .iter()
        .filter(|s| {
            let marked = s.comments.iter().any(|c| c.text.contains(RUMOR_MARKER));
            let predicted = if marked { GroundTruth::Fake } else { GroundTruth::Real };
            Some(predicted) == s.truth
        })
        .count();
    let oracle_accuracy = correct as f64 / samples.len() as f64;
    assert!(oracle_accuracy < 1.0);

    let status = cli()
        .args(["--offline", "--backend", "scripted", "eval"])
        .arg("--input")
        .arg(&held)
        .arg("--report")
        .arg(&held_report)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(report_accuracy(&held_report), oracle_accuracy);

    assert!(start.elapsed().as_secs() < 30, "criterion 5 exceeded 30s");
}

/// Criterion 6: the leakage probe over the recorded probe corpus keeps
/// exactly the three refused samples and reports a 6/9 leak ratio.
fn criterion_leakage() {
    let (samples, _) = load_jsonl(&fixture("appendix_a.jsonl")).unwrap();
    assert_eq!(samples.len(), 9);

    let provider =
        ReplayProvider::load(&fixture("replay_appendix_a.jsonl"), "gpt-3.5", 0.0).unwrap();
    let backend = Arc::new(Backend::new(Box::new(provider), "gpt-3.5", 0.0));
    let outcome = probe_leakage(samples, &backend, &FilterConfig::default().refusal_phrases, 2);

    let kept: Vec<&str> = outcome.kept.iter().map(|s| s.id()).collect();
    assert_eq!(kept, vec!["exA01", "exA02", "exA03"]);
    assert_eq!(outcome.removed_known.len(), 6);
    assert_eq!(outcome.removed_ambiguous.len(), 0);
    assert_eq!(outcome.failures, 0);
    assert!((outcome.leak_ratio - 6.0 / 9.0).abs() < 1e-12);
}

/// Criterion 7: deadlines gate the planted evidence, and truncation
/// matches a brute-force filter on random cases.
fn criterion_early_detection() {
    let cfg = SynthConfig {
        n_samples: 200,
        fake_ratio: 0.5,
        seed: 7,
        marker_offset_min_s: 3601,
        marker_offset_max_s: 7200,
        ..SynthConfig::default()
    };
    let corpus = generate_synthetic(&cfg);
    let backend = Arc::new(Backend::new(Box::new(ScriptedProvider), "scripted", 0.0));
    let curve = early_curve(
        &corpus,
        &[1800, 7200],
        &VariantConfig::default(),
        &backend,
        0,
        4,
    )
    .unwrap();
    // before any marker can appear, everything parses as real
    assert_eq!(curve[0].deadline_s, 1800);
    assert_eq!(curve[0].accuracy, 0.5);
    // once the marker window has passed, every fake is caught
    assert_eq!(curve[1].deadline_s, 7200);
    assert_eq!(curve[1].accuracy, 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let sample = &corpus[rng.gen_range(0..corpus.len())];
        let deadline = rng.gen_range(0..90_000u64);
        let truncated = apply_deadline(sample, deadline);
        let expected: Vec<&Comment> =
            sample.comments.iter().filter(|c| c.offset_s <= deadline).collect();
        assert_eq!(truncated.comments.iter().collect::<Vec<_>>(), expected);
        assert_eq!(truncated.news, sample.news);
    }
}

/// Criterion 8: a second cached run makes zero provider calls and
/// reproduces the report byte for byte.
fn criterion_caching() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let cache = dir.path().join("cache");
    let report1 = dir.path().join("report1.json");
    let report2 = dir.path().join("report2.json");

    let status = cli()
        .args(["--offline", "--seed", "3", "synth", "--n", "40"])
        .arg("--out")
        .arg(&corpus)
        .status()
        .unwrap();
    assert!(status.success());

    let run = |report: &Path| {
        cli()
            .args(["--offline", "--backend", "scripted"])
            .arg("--cache-dir")
            .arg(&cache)
            .arg("eval")
            .arg("--input")
            .arg(&corpus)
            .arg("--report")
            .arg(report)
            .output()
            .unwrap()
    };

    let first = run(&report1);
    assert!(first.status.success());
    let first_err = String::from_utf8_lossy(&first.stderr);
    assert!(!first_err.contains("provider calls: 0"), "first run must call the provider");

    let second = run(&report2);
    assert!(second.status.success());
    let second_err = String::from_utf8_lossy(&second.stderr);
    assert!(second_err.contains("provider calls: 0"), "second run must be fully cached");

    let a = std::fs::read(&report1).unwrap();
    let b = std::fs::read(&report2).unwrap();
    assert_eq!(a, b, "cached rerun must reproduce the report byte for byte");
}

/// Criterion 9: the ablation table lists all four variants, and the
/// transcript command replays the recorded two-step chain verbatim.
fn criterion_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let status = cli()
        .args(["--offline", "--seed", "5", "synth", "--n", "30"])
        .arg("--out")
        .arg(&corpus)
        .status()
        .unwrap();
    assert!(status.success());

    let out = cli()
        .args(["--offline", "--backend", "scripted", "ablate"])
        .arg("--input")
        .arg(&corpus)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for row in ["full", "w/o rational", "w/o conflicting", "w/o chaining"] {
        assert!(stdout.contains(row), "ablate output missing row `{row}`");
    }
    assert!(stdout.contains("variant"));

    let out = cli()
        .args([
            "--offline",
            "--backend",
            "replay",
            "--model",
            "gpt-3.5",
            "--k",
            "6",
        ])
        .arg("--fixtures")
        .arg(fixture("replay_tab4.jsonl"))
        .arg("detect")
        .arg("--input")
        .arg(fixture("tab4_sample.jsonl"))
        .output()
        .unwrap();
    assert!(out.status.success(), "detect failed: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("--- step 1 ---"));
    assert!(stdout.contains("--- step 2 ---"));
    assert_eq!(stdout.matches("Therefore, the answer is: **A. Fake**.").count(), 2);
    assert!(stdout
        .contains("The final estimation of the veracity of the news is: The news is fake."));
}

#[test]
fn acceptance() {
    let criteria: Vec<(&str, Box<dyn Fn() + Send>)> = vec![
        ("1 prompt templates match goldens", Box::new(criterion_prompts)),
        ("2 chunking matches oracle", Box::new(criterion_chunking)),
        ("3 parser agrees with response fixtures", Box::new(criterion_parser)),
        ("4 metrics match brute force", Box::new(criterion_metrics)),
        ("5 offline end-to-end scores match oracle", Box::new(criterion_end_to_end)),
        ("6 leakage probe keeps refused samples", Box::new(criterion_leakage)),
        ("7 early detection gates on deadlines", Box::new(criterion_early_detection)),
        ("8 cached rerun is call-free and identical", Box::new(criterion_caching)),
        ("9 ablation and transcript output", Box::new(criterion_transcripts)),
    ];

    let mut failures = 0;
    for (name, run) in criteria {
        match catch_unwind(AssertUnwindSafe(run)) {
            Ok(()) => println!("criterion {name}: PASS"),
            Err(_) => {
                println!("criterion {name}: FAIL");
                failures += 1;
            }
        }
    }
    assert_eq!(failures, 0, "{failures} acceptance criterion(s) failed");
}
