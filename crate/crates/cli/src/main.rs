use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use zerotopic::corpus::{filter_labels, load_corpus, CorpusFormat};
use zerotopic::evaluation::{export_entailment_matrix_to, run_experiment, ExperimentId, ExperimentSpec, RunOptions};
use zerotopic::zeroshot::{self, TrainedModel};

mod config;

use config::ConfigArgs;

#[derive(Parser)]
#[command(name = "zerotopic")]
#[command(about = "Zero-shot text classification through topic modeling and entailment")]
#[command(version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit topics on the configured corpus and score them against the labels
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Model artifact path (overrides config)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Classify documents with a trained model
    Predict {
        /// Model artifact written by `train`
        #[arg(short, long)]
        model: PathBuf,
        /// Documents to classify
        #[arg(short, long)]
        input: PathBuf,
        /// JSONL output, one {id, label, theta} object per document
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = "jsonl", value_parser = parse_format)]
        format: CorpusFormat,
        /// Field(s) whose values form the document text
        #[arg(long = "text-field", default_values_t = config::default_text_fields())]
        text_fields: Vec<String>,
    },
    /// Run a cross-validated experiment and write a metrics report
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// exp1, exp2, exp3 or exp4
        #[arg(short, long, value_parser = parse_experiment)]
        experiment: ExperimentId,
        /// Score direct document entailment instead of the topic classifier
        #[arg(long)]
        baseline: bool,
        /// Run only the first rotation
        #[arg(long)]
        single_rotation: bool,
        /// Report directory (overrides config)
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
    /// Write the topic × label entailment matrix of a model as CSV
    ExportMatrix {
        #[arg(short, long)]
        model: PathBuf,
        #[arg(long, default_value_t = 50)]
        top_n: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn parse_format(s: &str) -> Result<CorpusFormat, String> {
    s.parse().map_err(|e: zerotopic::Error| e.to_string())
}

fn parse_experiment(s: &str) -> Result<ExperimentId, String> {
    s.parse().map_err(|e: zerotopic::Error| e.to_string())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { config, output } => train(&config, output),
        Command::Predict {
            model,
            input,
            output,
            format,
            text_fields,
        } => predict(&model, &input, &output, format, &text_fields),
        Command::Evaluate {
            config,
            experiment,
            baseline,
            single_rotation,
            report_dir,
        } => evaluate(&config, experiment, RunOptions { baseline, single_rotation }, report_dir),
        Command::ExportMatrix { model, top_n, output } => {
            let model = load_model(&model)?;
            let rows = export_entailment_matrix_to(&model, top_n, &output)?;
            eprintln!("wrote {rows} topic rows to {}", output.display());
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    TrainedModel::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(())
}

fn train(args: &ConfigArgs, output: Option<PathBuf>) -> Result<()> {
    let cfg = config::resolve(args)?;
    let corpus = load_corpus(&cfg.corpus_path, cfg.format, &cfg.text_fields)?;
    let model = zeroshot::train(&corpus.unlabeled(), &cfg.labels, &cfg.zeroshot, cfg.backend.as_ref())?;
    let path = output.unwrap_or(cfg.model_path);
    create_parent(&path)?;
    model.save(&path)?;

    let topics = model.topic_model();
    println!(
        "{} topics from {} documents ({} outliers), seed {}",
        topics.num_topics(),
        corpus.len(),
        topics.outlier_count(),
        cfg.seed
    );
    for (k, t) in topics.topics().iter().enumerate() {
        let row = model.entailment_table().row(k);
        let best = row
            .iter()
            .enumerate()
            .fold(0, |b, (j, p)| if *p > row[b] { j } else { b });
        println!(
            "  topic {:>3}  size {:>5}  -> {} ({:.3})  {}",
            t.index,
            t.size,
            model.labels().get(best).unwrap_or("?"),
            row[best],
            t.term_summary(8)
        );
    }
    eprintln!("wrote model to {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    id: &'a str,
    label: &'a str,
    theta: &'a [f64],
}

fn predict(model: &Path, input: &Path, output: &Path, format: CorpusFormat, text_fields: &[String]) -> Result<()> {
    let model = load_model(model)?;
    let corpus = load_corpus(input, format, text_fields)?;
    let docs = corpus.unlabeled().to_vec();
    let predictions = zeroshot::predict_batch(&model, &docs)?;

    create_parent(output)?;
    let file = std::fs::File::create(output).with_context(|| format!("cannot create {}", output.display()))?;
    let mut out = std::io::BufWriter::new(file);
    for (doc, p) in docs.iter().zip(&predictions) {
        let row = PredictionRow {
            id: doc.id,
            label: &p.label,
            theta: p.scores.theta(),
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    let fallback = predictions.iter().filter(|p| p.fallback).count();
    if fallback > 0 {
        log::warn!("{fallback} documents matched no topic and were scored with a uniform topic mix");
    }
    eprintln!("wrote {} predictions to {}", predictions.len(), output.display());
    Ok(())
}

fn evaluate(args: &ConfigArgs, id: ExperimentId, options: RunOptions, report_dir: Option<PathBuf>) -> Result<()> {
    let cfg = config::resolve(args)?;
    let corpus = load_corpus(&cfg.corpus_path, cfg.format, &cfg.text_fields)?;
    let kept = filter_labels(&corpus, &cfg.labels);
    if kept.len() < corpus.len() {
        log::warn!(
            "dropped {} documents whose gold label is not configured",
            corpus.len() - kept.len()
        );
    }
    let spec = ExperimentSpec::new(id, cfg.k, cfg.seed)?;
    let report = run_experiment(&spec, &kept, &cfg.labels, &cfg.zeroshot, cfg.backend.as_ref(), options)?;

    let dir = report_dir.unwrap_or(cfg.report_dir);
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let name = if options.baseline {
        format!("{id}-baseline.json")
    } else {
        format!("{id}.json")
    };
    let path = dir.join(name);
    std::fs::write(&path, report.to_json()?).with_context(|| format!("cannot write {}", path.display()))?;
    print!("{}", report.render_table());
    eprintln!("wrote report to {}", path.display());
    Ok(())
}
