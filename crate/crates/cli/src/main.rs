//! `rti`: run the RTI pipeline over a corpus, sweep thresholds, and score
//! labeled reports.
//!
//! Exit status of `run`: 0 when nothing is suspicious, 1 when issues were
//! reported, 2 on any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rti_core::evalkit::{self, EvalLabels};
use rti_core::pipeline::{self, BackendKind, PipelineConfig, Report};
use rti_core::synth;

#[derive(Parser)]
#[command(
    name = "rti",
    version,
    about = "Flag noun phrases that translate differently alone and in context"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Inputs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// JSONL corpus: one {id, text, tree} object per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Override the configured backend.
    #[arg(long)]
    backend: Option<BackendKind>,
    /// Answer from the cache only; a miss is an error.
    #[arg(long)]
    replay_only: bool,
}

impl Inputs {
    fn load(&self, threshold: Option<usize>) -> Result<(PipelineConfig, Vec<pipeline::CorpusEntry>)> {
        let mut cfg =
            PipelineConfig::load(&self.config).with_context(|| format!("loading config {}", self.config.display()))?;
        if let Some(kind) = self.backend {
            cfg.backend.kind = kind;
        }
        if self.replay_only {
            cfg.backend.replay_only = true;
        }
        if let Some(d) = threshold {
            cfg.threshold = d;
        }
        cfg.validate()?;
        let corpus =
            pipeline::load_corpus(&self.corpus).with_context(|| format!("loading corpus {}", self.corpus.display()))?;
        Ok((cfg, corpus))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract, pair, translate and detect; write the report JSON.
    Run {
        #[command(flatten)]
        inputs: Inputs,
        /// Report output path. Timing goes to `<stem>.timing.json` beside it.
        #[arg(long)]
        out: PathBuf,
        /// Distance threshold d; a pair is reported when distance > d.
        #[arg(long)]
        threshold: Option<usize>,
    },
    /// Count suspicious issues over a range of thresholds.
    Sweep {
        #[command(flatten)]
        inputs: Inputs,
        /// Thresholds: `0..5` (inclusive), `0,2,4` or a single value.
        #[arg(long = "d", default_value = "0..5")]
        thresholds: String,
        /// Labels JSON; adds erroneous-issue and precision columns.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Precision, distinct erroneous translations and category counts of a
    /// labeled report.
    Eval {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write a synthetic corpus, its mock dictionary and a config.
    Synth {
        #[arg(long, default_value_t = 200)]
        sentences: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_thresholds(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    let values: Vec<usize> = if let Some((lo, hi)) = spec.split_once("..") {
        let lo: usize = lo.trim().parse().context("threshold range start")?;
        let hi: usize = hi
            .trim_start_matches('=')
            .trim()
            .parse()
            .context("threshold range end")?;
        if lo > hi {
            bail!("empty threshold range {spec}");
        }
        (lo..=hi).collect()
    } else {
        spec.split(',')
            .map(|v| v.trim().parse::<usize>().with_context(|| format!("threshold {v:?}")))
            .collect::<Result<_>>()?
    };
    if values.is_empty() {
        bail!("no thresholds given");
    }
    Ok(values)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(inputs: &Inputs, out: &Path, threshold: Option<usize>) -> Result<ExitCode> {
    let (cfg, corpus) = inputs.load(threshold)?;
    let output = pipeline::run(&cfg, &corpus)?;
    write(out, &output.report.to_json())?;
    let timing_path = out.with_extension("timing.json");
    write(&timing_path, &(serde_json::to_string_pretty(&output.timing)? + "\n"))?;
    eprint!("{}", output.report.render_summary());
    eprintln!("report written to {} ({:.1} ms)", out.display(), output.timing.total_ms);
    Ok(if output.report.issues.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_sweep(
    inputs: &Inputs,
    thresholds: &str,
    labels: Option<&Path>,
    csv: Option<&Path>,
    json: Option<&Path>,
) -> Result<ExitCode> {
    let thresholds = parse_thresholds(thresholds)?;
    let (cfg, corpus) = inputs.load(None)?;
    let labels = labels.map(EvalLabels::load).transpose()?;
    let prepared = pipeline::prepare(&corpus, &cfg.filter_config()?)?;
    let pairs = pipeline::collect_translations(&cfg, &prepared)?;
    let rows = evalkit::threshold_sweep(&pairs, &thresholds, cfg.tokenization_mode(), labels.as_ref())?;
    let table = evalkit::sweep_to_csv(&rows);
    if let Some(path) = csv {
        write(path, &table)?;
    }
    if let Some(path) = json {
        write(path, &(serde_json::to_string_pretty(&rows)? + "\n"))?;
    }
    print!("{table}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(labels: &Path, report: &Path, json: Option<&Path>) -> Result<ExitCode> {
    let labels = EvalLabels::load(labels)?;
    let text = std::fs::read_to_string(report).with_context(|| format!("reading {}", report.display()))?;
    let report = Report::from_json(&text).with_context(|| format!("parsing {}", report.display()))?;
    labels.validate_against(&report.issues)?;
    let precision = evalkit::precision(&labels, &report.issues)?;
    let erroneous = evalkit::unique_erroneous_translations(&labels, &report.issues)?;
    let tally = evalkit::category_tally(&labels);

    println!(
        "precision: {:.4} ({}/{} erroneous issues)",
        precision.precision, precision.true_count, precision.total_count
    );
    println!("distinct erroneous translations: {}", erroneous.len());
    for (category, n) in &tally {
        println!("  {category}: {n}");
    }
    if let Some(path) = json {
        let doc = serde_json::json!({
            "precision": precision,
            "erroneous_translations": erroneous,
            "categories": tally.iter().map(|(c, n)| (c.to_string(), *n)).collect::<std::collections::BTreeMap<_, _>>(),
        });
        write(path, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    }
    Ok(ExitCode::SUCCESS)
}

const SYNTH_CONFIG: &str = r#"# Synthetic corpus translated by the compositional mock backend.
threshold = 0
src_lang = "en"
tgt_lang = "zh"

[backend]
kind = "mock"
id = "mock"
cache = "cache.json"

[backend.mock]
dictionary = "dictionary.json"
"#;

fn cmd_synth(sentences: usize, seed: u64, out_dir: &Path) -> Result<ExitCode> {
    let corpus = synth::generate_corpus(sentences, seed);
    write(&out_dir.join("corpus.jsonl"), &pipeline::corpus_to_jsonl(&corpus))?;
    write(
        &out_dir.join("dictionary.json"),
        &(serde_json::to_string_pretty(&synth::dictionary())? + "\n"),
    )?;
    write(&out_dir.join("config.toml"), SYNTH_CONFIG)?;
    eprintln!("wrote {sentences} sentences to {}", out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { inputs, out, threshold } => cmd_run(inputs, out, *threshold),
        Command::Sweep {
            inputs,
            thresholds,
            labels,
            csv,
            json,
        } => cmd_sweep(inputs, thresholds, labels.as_deref(), csv.as_deref(), json.as_deref()),
        Command::Eval { labels, report, json } => cmd_eval(labels, report, json.as_deref()),
        Command::Synth {
            sentences,
            seed,
            out_dir,
        } => cmd_synth(*sentences, *seed, out_dir),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
