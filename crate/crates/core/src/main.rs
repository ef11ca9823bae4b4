//! Command line front end for the detection pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 backend failure.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rumorcheck::backend::{Backend, DiskCache, ReplayProvider, ScriptedProvider};
use rumorcheck::chain::run_detection;
use rumorcheck::config::{FileConfig, RunConfig};
use rumorcheck::dataset::{generate_synthetic, load_jsonl, save_jsonl, SynthConfig};
use rumorcheck::eval::{
    amount_bins, bins_csv, curve_csv, early_curve, evaluate_batch, render_report_text, score,
};
use rumorcheck::filter::run_pipeline;
use rumorcheck::prompt::render_final;
use rumorcheck::PropagationSample;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "rumorcheck", version, about = "Rumor detection over propagation threads")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// TOML config file; CLI flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Forbid any backend that talks to the network.
    #[arg(long, global = true)]
    offline: bool,
    /// Backend kind: scripted, replay, or http.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Replay fixture (JSONL), required for the replay backend.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    base_url: Option<String>,
    /// Name of the environment variable holding the HTTP API key.
    #[arg(long, global = true)]
    api_key_env: Option<String>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    /// Comments per reasoning step.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    length_limit_chars: Option<usize>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the on-disk response cache.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    rate_limit_per_minute: Option<u32>,
    /// Disable the writing-style reasoning directive.
    #[arg(long, global = true)]
    no_rational: bool,
    /// Disable the rebuttal-and-conflict reasoning directive.
    #[arg(long, global = true)]
    no_conflicting: bool,
    /// Run one flat step over subsampled comments instead of a chain.
    #[arg(long, global = true)]
    no_chaining: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        fake_ratio: f64,
        #[arg(long, default_value_t = 5)]
        comments_min: usize,
        #[arg(long, default_value_t = 40)]
        comments_max: usize,
        #[arg(long, default_value_t = 0.2)]
        marker_rate: f64,
        /// Fraction of fake samples generated without any marker.
        #[arg(long, default_value_t = 0.0)]
        withhold_ratio: f64,
        #[arg(long, default_value_t = 0)]
        marker_offset_min_s: u64,
        #[arg(long, default_value_t = u64::MAX)]
        marker_offset_max_s: u64,
        #[arg(long, default_value_t = 86_400)]
        offset_max_s: u64,
        #[arg(long, default_value_t = 0.0)]
        unknown_rate: f64,
    },
    /// Validate a JSONL dataset and print its manifest.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Write the normalized dataset here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the data filters and the leakage probe.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the filter report (JSON) here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print full per-step transcripts.
    Detect {
        #[arg(long)]
        input: PathBuf,
        /// Restrict to one sample id.
        #[arg(long)]
        id: Option<String>,
    },
    /// Score the corpus and print metrics.
    Eval {
        #[arg(long)]
        input: PathBuf,
        /// Write the full report (JSON) here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare the full variant against single-switch ablations.
    Ablate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Accuracy versus comment deadline (CSV).
    Early {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated ascending deadlines in seconds.
        #[arg(long)]
        deadlines: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy grouped by comment count (CSV).
    Bins {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated ascending bin edges.
        #[arg(long)]
        edges: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Data(String),
    Backend(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Backend(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are successful outcomes, not usage errors
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn resolve_config(opts: &GlobalOpts) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &opts.config {
        let file = FileConfig::load(path).map_err(|e| CliError::Data(e.to_string()))?;
        cfg = cfg.apply_file(&file);
    }
    if let Some(v) = &opts.backend {
        cfg.backend = v.clone();
    }
    if let Some(v) = &opts.model {
        cfg.model = v.clone();
    }
    if let Some(v) = &opts.base_url {
        cfg.base_url = v.clone();
    }
    if let Some(v) = &opts.api_key_env {
        cfg.api_key_env = v.clone();
    }
    if let Some(v) = opts.temperature {
        cfg.variant.temperature = v;
    }
    if let Some(v) = opts.k {
        cfg.variant.k = v;
    }
    if let Some(v) = opts.length_limit_chars {
        cfg.variant.length_limit_chars = v;
    }
    if let Some(v) = opts.workers {
        cfg.workers = v;
    }
    if let Some(v) = opts.seed {
        cfg.seed = v;
    }
    if let Some(v) = &opts.cache_dir {
        cfg.cache_dir = Some(v.display().to_string());
    }
    if let Some(v) = opts.rate_limit_per_minute {
        cfg.rate_limit_per_minute = Some(v);
    }
    if opts.no_rational {
        cfg.variant.rational_prompts = false;
    }
    if opts.no_conflicting {
        cfg.variant.conflicting_prompts = false;
    }
    if opts.no_chaining {
        cfg.variant.chaining = false;
    }
    if cfg.variant.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    Ok(cfg)
}

fn build_backend(cfg: &RunConfig, opts: &GlobalOpts) -> Result<Arc<Backend>, CliError> {
    let provider: Box<dyn rumorcheck::backend::Provider> = match cfg.backend.as_str() {
        "scripted" => Box::new(ScriptedProvider),
        "replay" => {
            let path = opts.fixtures.as_ref().ok_or_else(|| {
                CliError::Usage("the replay backend requires --fixtures".into())
            })?;
            Box::new(
                ReplayProvider::load(path, &cfg.model, cfg.variant.temperature)
                    .map_err(CliError::Data)?,
            )
        }
        "http" => {
            if opts.offline {
                return Err(CliError::Usage(
                    "--offline forbids the http backend".into(),
                ));
            }
            #[cfg(feature = "http")]
            {
                Box::new(rumorcheck::backend::HttpProvider::new(
                    &cfg.base_url,
                    &cfg.model,
                    cfg.variant.temperature,
                    &cfg.api_key_env,
                ))
            }
            #[cfg(not(feature = "http"))]
            {
                return Err(CliError::Usage(
                    "this build has no http backend support".into(),
                ));
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown backend `{other}` (expected scripted, replay, or http)"
            )))
        }
    };

    let mut backend = Backend::new(provider, cfg.model.clone(), cfg.variant.temperature);
    if let Some(dir) = &cfg.cache_dir {
        let cache = DiskCache::open(dir).map_err(|e| CliError::Data(e.to_string()))?;
        backend = backend.with_cache(cache);
    }
    if let Some(rpm) = cfg.rate_limit_per_minute {
        backend = backend.with_rate_limit(rpm);
    }
    Ok(Arc::new(backend))
}

fn load_corpus(path: &Path) -> Result<Vec<PropagationSample>, CliError> {
    load_jsonl(path)
        .map(|(samples, _)| samples)
        .map_err(|e| CliError::Data(e.to_string()))
}

fn write_or_print(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, content).map_err(|e| CliError::Data(e.to_string()))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid {what} value `{s}`")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.global)?;

    match cli.command {
        Command::Synth {
            out,
            n,
            fake_ratio,
            comments_min,
            comments_max,
            marker_rate,
            withhold_ratio,
            marker_offset_min_s,
            marker_offset_max_s,
            offset_max_s,
            unknown_rate,
        } => {
            let synth = SynthConfig {
                n_samples: n,
                fake_ratio,
                comments_min,
                comments_max,
                marker_rate,
                seed: cfg.seed,
                marker_withhold_ratio: withhold_ratio,
                marker_offset_min_s,
                marker_offset_max_s,
                offset_max_s,
                unknown_rate,
            };
            let samples = generate_synthetic(&synth);
            save_jsonl(&out, &samples).map_err(|e| CliError::Data(e.to_string()))?;
            eprintln!("wrote {} samples to {}", samples.len(), out.display());
            Ok(())
        }

        Command::Ingest { input, out } => {
            let (samples, manifest) =
                load_jsonl(&input).map_err(|e| CliError::Data(e.to_string()))?;
            if let Some(out) = out {
                save_jsonl(&out, &samples).map_err(|e| CliError::Data(e.to_string()))?;
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&manifest).expect("manifest serializes")
            );
            Ok(())
        }

        Command::Filter { input, out, report } => {
            let samples = load_corpus(&input)?;
            let backend = build_backend(&cfg, &cli.global)?;
            let (kept, filter_report) =
                run_pipeline(samples, &cfg.filter, &backend, cfg.workers);
            save_jsonl(&out, &kept).map_err(|e| CliError::Data(e.to_string()))?;
            let json = serde_json::to_string_pretty(&filter_report).expect("report serializes");
            write_or_print(report.as_deref(), &format!("{json}\n"))?;
            eprintln!("provider calls: {}", backend.provider_calls());
            Ok(())
        }

        Command::Detect { input, id } => {
            let samples = load_corpus(&input)?;
            let backend = build_backend(&cfg, &cli.global)?;
            let selected: Vec<_> = match &id {
                Some(id) => {
                    let found: Vec<_> = samples.iter().filter(|s| s.id() == id).collect();
                    if found.is_empty() {
                        return Err(CliError::Data(format!("no sample with id `{id}`")));
                    }
                    found
                }
                None => samples.iter().collect(),
            };
            for (i, sample) in selected.iter().enumerate() {
                let result = run_detection(sample, &cfg.variant, &backend, cfg.seed)
                    .map_err(|e| CliError::Backend(e.to_string()))?;
                println!("=== sample {} ===", sample.id());
                for step in &result.steps {
                    println!("--- step {} ---", step.step_index);
                    println!("{}", step.prompt_text);
                    println!(">>> {}", step.raw_response);
                    println!("parsed: {:?}", step.parsed);
                }
                println!("{}", render_final(result.final_verdict));
                if i + 1 < selected.len() {
                    println!();
                }
            }
            eprintln!("provider calls: {}", backend.provider_calls());
            Ok(())
        }

        Command::Eval { input, report } => {
            let samples = load_corpus(&input)?;
            let backend = build_backend(&cfg, &cli.global)?;
            let per_sample =
                evaluate_batch(&samples, &cfg.variant, &backend, cfg.seed, cfg.workers);
            let eval_report = score(per_sample).map_err(|e| CliError::Data(e.to_string()))?;
            print!("{}", render_report_text(&eval_report));
            if let Some(path) = report {
                let json =
                    serde_json::to_string_pretty(&eval_report).expect("report serializes");
                std::fs::write(&path, format!("{json}\n"))
                    .map_err(|e| CliError::Data(e.to_string()))?;
            }
            eprintln!("provider calls: {}", backend.provider_calls());
            Ok(())
        }

        Command::Ablate { input } => {
            let samples = load_corpus(&input)?;
            let backend = build_backend(&cfg, &cli.global)?;
            let variants = [
                ("full", cfg.variant.clone()),
                ("w/o rational", cfg.variant.clone().without_rational()),
                ("w/o conflicting", cfg.variant.clone().without_conflicting()),
                ("w/o chaining", cfg.variant.clone().without_chaining()),
            ];
            println!("{:<16} {:>8} {:>8} {:>8} {:>8}", "variant", "acc", "prec", "rec", "f1");
            for (name, variant) in &variants {
                let per_sample =
                    evaluate_batch(&samples, variant, &backend, cfg.seed, cfg.workers);
                let report = score(per_sample).map_err(|e| CliError::Data(e.to_string()))?;
                println!(
                    "{:<16} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                    name,
                    report.metrics.accuracy,
                    report.metrics.precision,
                    report.metrics.recall,
                    report.metrics.f1
                );
            }
            eprintln!("provider calls: {}", backend.provider_calls());
            Ok(())
        }

        Command::Early {
            input,
            deadlines,
            out,
        } => {
            let samples = load_corpus(&input)?;
            let backend = build_backend(&cfg, &cli.global)?;
            let deadlines: Vec<u64> = parse_list(&deadlines, "deadline")?;
            let curve = early_curve(
                &samples,
                &deadlines,
                &cfg.variant,
                &backend,
                cfg.seed,
                cfg.workers,
            )
            .map_err(|e| CliError::Usage(e.to_string()))?;
            write_or_print(out.as_deref(), &curve_csv(&curve))?;
            eprintln!("provider calls: {}", backend.provider_calls());
            Ok(())
        }

        Command::Bins { input, edges, out } => {
            let samples = load_corpus(&input)?;
            let backend = build_backend(&cfg, &cli.global)?;
            let edges: Vec<usize> = parse_list(&edges, "bin edge")?;
            let per_sample =
                evaluate_batch(&samples, &cfg.variant, &backend, cfg.seed, cfg.workers);
            let bins = amount_bins(&samples, &per_sample, &edges)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            write_or_print(out.as_deref(), &bins_csv(&bins))?;
            eprintln!("provider calls: {}", backend.provider_calls());
            Ok(())
        }
    }
}
