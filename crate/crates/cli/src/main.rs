use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lcc_cli::artifacts::{read_json, write_json, ModelArtifact};
use lcc_cli::config::ExperimentConfig;
use lcc_cli::error::{CliError, Result};
use lcc_cli::ingest::{ingest_csv, ingest_csv_with_labels, write_dataset_csv};
use lcc_cli::pipeline::{
    evaluate, load_splits, run_on_splits, select, train_pair_models, validation_matrices, bank_from_cache,
    chain_length_histogram, LocalTraining, TerminationCounts, ValidationMatrices,
};
use lcc_cli::report::stats_report;
use lcc_cli::synthetic::generate_synthetic;
use lcc_core::matcher::{match_signature, Gallery};
use lcc_core::matrices::write_matrix_csv;
use lcc_core::models::train_model;
use lcc_core::pairs::LocalModelBank;
use lcc_core::signature::{
    build_identification_signature, build_signatures, read_signature_file, write_signature_file, SignatureMetadata,
};
use lcc_core::stats::bonferroni_dunn_q;
use lcc_core::{ChainTrace, LabelPairSet, LabeledDataset, PairSource, Termination};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "lcc", version, about = "Global model plus local-model chain matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Default)]
struct ConfigArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config value, e.g. `--set model.max_iterations=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Similarity,
    Confusion,
}

impl From<Source> for PairSource {
    fn from(s: Source) -> Self {
        match s {
            Source::Similarity => PairSource::Similarity,
            Source::Confusion => PairSource::Confusion,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV.
    GenData {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the global model.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Similarity and confusion matrices of a model on a validation CSV.
    Matrices {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Directory for matrices.json and the CSV exports.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Threshold a matrix into a label pair set.
    SelectPairs {
        #[arg(long)]
        matrices: PathBuf,
        #[arg(long, value_enum)]
        source: Source,
        #[arg(long)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one local model per selected pair.
    BuildBank {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write signatures for every row of a CSV, one JSON document per line.
    Sign {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chain-match signatures, or gallery probes with `--gallery`.
    Match {
        #[arg(long, required_unless_present = "gallery")]
        signatures: Option<PathBuf>,
        /// Pair set to use instead of the one recorded in the signature file.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Labeled gallery CSV for identification mode.
        #[arg(long, requires_all = ["probes", "bank"])]
        gallery: Option<PathBuf>,
        #[arg(long)]
        probes: Option<PathBuf>,
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Include the full chain trace for every sample.
        #[arg(long)]
        explain: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy of the global model and of chain matching on a labeled CSV.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline over the configured threshold sweep.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory for report.json and the resolved config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Friedman, Iman-Davenport and Bonferroni-Dunn over an accuracy CSV.
    Stats {
        /// CSV with one column per method and one row per split.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Critical value to use instead of the bundled table.
        #[arg(long)]
        q_alpha: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let base = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let mut config = apply_overrides(base, &args.overrides)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

/// Applies `a.b.c=value` assignments. Values parse as TOML, falling back to a
/// plain string.
fn apply_overrides(config: ExperimentConfig, overrides: &[String]) -> Result<ExperimentConfig> {
    if overrides.is_empty() {
        return Ok(config);
    }
    let mut root: toml::Table = toml::from_str(&config.to_toml_string()).expect("config round-trips");
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {item:?} is not KEY=VALUE")))?;
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut parts: Vec<&str> = key.trim().split('.').collect();
        let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::Config(format!("empty key in {item:?}")))?;
        let mut table = &mut root;
        for part in parts {
            table = table
                .entry(part)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| CliError::Config(format!("{part} in {key} is not a table")))?;
        }
        table.insert(last.to_string(), value);
    }
    ExperimentConfig::from_toml_str(&toml::to_string(&root).expect("table serializes"))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value).expect("serializes"));
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<ModelArtifact> {
    read_json(path)
}

fn load_bank(path: &Path) -> Result<LocalModelBank> {
    read_json(path)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData { cfg, out } => {
            let config = load_config(&cfg)?;
            let ds = generate_synthetic(&config.synthetic_spec())?;
            let mut w = output(out.as_deref())?;
            write_dataset_csv(&mut w, &ds)?;
            w.flush().map_err(|e| CliError::io("output", e))
        }
        Command::Train { data, cfg, out } => {
            let config = load_config(&cfg)?;
            let ds = ingest_csv(&data)?;
            let model = train_model(&ds, &config.global_model())?;
            emit_json(
                out.as_deref(),
                &ModelArtifact {
                    label_names: ds.label_names().to_vec(),
                    model,
                },
            )
        }
        Command::Matrices { model, data, out_dir } => {
            let artifact = load_model(&model)?;
            let ds = ingest_csv_with_labels(&data, &artifact.label_names)?;
            let m = validation_matrices(&artifact.model, &ds)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
            write_json(&out_dir.join("matrices.json"), &m)?;
            let names = &artifact.label_names;
            let csv_out = |name: &str| -> Result<BufWriter<File>> {
                let p = out_dir.join(name);
                Ok(BufWriter::new(File::create(&p).map_err(|e| CliError::io(&p, e))?))
            };
            write_matrix_csv(csv_out("similarity_w.csv")?, m.similarity.w.view(), names)?;
            write_matrix_csv(csv_out("similarity_q.csv")?, m.similarity.q.view(), names)?;
            write_matrix_csv(csv_out("confusion_z.csv")?, m.confusion.z.view(), names)?;
            write_matrix_csv(csv_out("confusion_r.csv")?, m.confusion.r.view(), names)?;
            Ok(())
        }
        Command::SelectPairs {
            matrices,
            source,
            threshold,
            out,
        } => {
            let m: ValidationMatrices = read_json(&matrices)?;
            let set = select(&m, source.into(), threshold)?;
            emit_json(out.as_deref(), &set)
        }
        Command::BuildBank {
            model,
            data,
            pairs,
            cfg,
            out,
        } => {
            let config = load_config(&cfg)?;
            let artifact = load_model(&model)?;
            let ds = ingest_csv_with_labels(&data, &artifact.label_names)?;
            let set: LabelPairSet = read_json(&pairs)?;
            let how = LocalTraining {
                config: config.local_model(),
                warm_from: config.warm_start.then_some(&artifact.model),
            };
            let cache = train_pair_models(&ds, &set.pairs, how)?;
            emit_json(out.as_deref(), &bank_from_cache(&set, &cache)?)
        }
        Command::Sign { model, bank, data, out } => {
            let artifact = load_model(&model)?;
            let bank = load_bank(&bank)?;
            let ds = ingest_csv_with_labels(&data, &artifact.label_names)?;
            let signatures = build_signatures(ds.features(), &artifact.model, &bank)?;
            let meta = SignatureMetadata {
                label_names: artifact.label_names.clone(),
                pair_set: bank.pair_set().clone(),
            };
            let mut w = output(out.as_deref())?;
            write_signature_file(&mut w, Some(&meta), &signatures)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(out.unwrap_or_else(|| "stdout".into()), e))
        }
        Command::Match {
            signatures,
            pairs,
            gallery,
            probes,
            bank,
            explain,
            out,
        } => {
            let records = match (gallery, signatures) {
                (Some(gallery), _) => match_gallery(
                    &gallery,
                    &probes.expect("clap requires probes"),
                    &bank.expect("clap requires bank"),
                    explain,
                )?,
                (None, Some(signatures)) => match_signatures(&signatures, pairs.as_deref(), explain)?,
                (None, None) => unreachable!("clap requires one input"),
            };
            let mut w = output(out.as_deref())?;
            for r in &records {
                serde_json::to_writer(&mut w, r).expect("serializes");
                writeln!(w).map_err(|e| CliError::io("output", e))?;
            }
            w.flush().map_err(|e| CliError::io("output", e))
        }
        Command::Evaluate { model, bank, data, out } => {
            let artifact = load_model(&model)?;
            let bank = load_bank(&bank)?;
            let ds = ingest_csv_with_labels(&data, &artifact.label_names)?;
            let empty = LocalModelBank::empty(bank.pair_set().source, 1.0);
            let global = evaluate(&artifact.model, &empty, &ds)?;
            let lcc = evaluate(&artifact.model, &bank, &ds)?;
            emit_json(
                out.as_deref(),
                &EvaluationReport {
                    samples: ds.len(),
                    pair_count: bank.len(),
                    global_accuracy: global.accuracy,
                    lcc_accuracy: lcc.accuracy,
                    changed: lcc
                        .predictions
                        .iter()
                        .zip(&global.predictions)
                        .filter(|(a, b)| a != b)
                        .count(),
                    chain_lengths: chain_length_histogram(&lcc.traces),
                    terminations: TerminationCounts::tally(&lcc.traces),
                },
            )
        }
        Command::Sweep { cfg, out_dir } => {
            let config = load_config(&cfg)?;
            let splits = load_splits(&config)?;
            let report = run_on_splits(&config, &splits)?;
            let dir = out_dir.or_else(|| config.output.clone());
            match dir {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                    write_json(&dir.join("report.json"), &report)?;
                    let p = dir.join("config.toml");
                    std::fs::write(&p, config.to_toml_string()).map_err(|e| CliError::io(&p, e))?;
                }
                None => emit_json(None, &report)?,
            }
            eprintln!("global test accuracy {:.4}", report.global_test_accuracy);
            for r in &report.sweep {
                eprintln!(
                    "{:<10} t={:<6} pairs={:<3} val={:.4} test={:.4}",
                    r.source, r.threshold, r.pair_count, r.validation_accuracy, r.test_accuracy
                );
            }
            Ok(())
        }
        Command::Stats {
            input,
            alpha,
            q_alpha,
            out,
        } => {
            let k = csv::Reader::from_path(&input)
                .and_then(|mut r| r.headers().map(|h| h.len()))
                .map_err(|e| CliError::Parse {
                    line: 1,
                    message: e.to_string(),
                })?;
            let q = match q_alpha {
                Some(q) => q,
                None => bonferroni_dunn_q(k, alpha).ok_or_else(|| {
                    CliError::Config(format!("no bundled critical value for k={k}, alpha={alpha}; pass --q-alpha"))
                })?,
            };
            emit_json(out.as_deref(), &stats_report(&input, q)?)
        }
    }
}

#[derive(Serialize)]
struct EvaluationReport {
    samples: usize,
    pair_count: usize,
    global_accuracy: f64,
    lcc_accuracy: f64,
    changed: usize,
    chain_lengths: Vec<usize>,
    terminations: TerminationCounts,
}

#[derive(Serialize)]
struct MatchRecord {
    index: usize,
    label: usize,
    label_name: Option<String>,
    global_label: usize,
    steps: usize,
    terminated_by: Termination,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<ChainTrace>,
}

fn record(index: usize, trace: ChainTrace, names: &[String], truth: Option<usize>, explain: bool) -> MatchRecord {
    MatchRecord {
        index,
        label: trace.final_label,
        label_name: names.get(trace.final_label).cloned(),
        global_label: trace.start_label,
        steps: trace.steps.len(),
        terminated_by: trace.terminated_by,
        truth,
        trace: explain.then_some(trace),
    }
}

fn match_signatures(path: &Path, pairs: Option<&Path>, explain: bool) -> Result<Vec<MatchRecord>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let sig_file = read_signature_file(BufReader::new(file))?;
    let (names, recorded) = match sig_file.metadata {
        Some(m) => (m.label_names, Some(m.pair_set)),
        None => (Vec::new(), None),
    };
    let pair_set = match pairs {
        Some(p) => read_json::<LabelPairSet>(p)?,
        None => recorded.ok_or_else(|| {
            CliError::Config("signature file has no metadata line; pass --pairs".into())
        })?,
    };
    sig_file
        .signatures
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (_, trace) = match_signature(s, &pair_set)?;
            Ok(record(i, trace, &names, None, explain))
        })
        .collect()
}

fn match_gallery(gallery: &Path, probes: &Path, bank: &Path, explain: bool) -> Result<Vec<MatchRecord>> {
    let enrolled = ingest_csv(gallery)?;
    let names = enrolled.label_names().to_vec();
    let probes: LabeledDataset = ingest_csv_with_labels(probes, &names)?;
    let bank = load_bank(bank)?;
    if let Some(d) = bank.dimension().filter(|&d| d != enrolled.dimension()) {
        return Err(lcc_core::LccError::DimensionMismatch {
            expected: enrolled.dimension(),
            found: d,
        }
        .into());
    }
    let gallery = Gallery::from_dataset(&enrolled)?;
    (0..probes.len())
        .map(|i| {
            let s = build_identification_signature(probes.sample(i), &gallery, &bank)?;
            let (_, trace) = match_signature(&s, bank.pair_set())?;
            Ok(record(i, trace, &names, Some(probes.labels()[i]), explain))
        })
        .collect()
}
