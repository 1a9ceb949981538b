//! Run configuration: a TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use zerotopic::corpus::{CorpusFormat, LabelSet};
use zerotopic::embedding::EmbedderSpec;
use zerotopic::entailment::{EntailmentBackend, LexicalBackend, RemoteBackend};
use zerotopic::remote::RetryPolicy;
use zerotopic::zeroshot::ZeroShotConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Keyword lexicon for entailment, configured embedder for topics.
    Lexical,
    /// Inference sidecar for entailment (and embeddings if the embedder is remote).
    Remote,
    /// Keyword lexicon for entailment, embeddings read from a JSONL file.
    Precomputed,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub labels: Vec<String>,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub model: ZeroShotConfig,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_k() -> usize {
    zerotopic::evaluation::DEFAULT_K
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: CorpusFormat,
    #[serde(default = "default_text_fields")]
    pub text_fields: Vec<String>,
}

fn default_format() -> CorpusFormat {
    CorpusFormat::Jsonl
}

pub fn default_text_fields() -> Vec<String> {
    vec!["text".to_string()]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    #[serde(default = "default_backend")]
    pub kind: BackendKind,
    pub lexicon: Option<PathBuf>,
    pub endpoint: Option<String>,
    /// Embedding file for the precomputed backend.
    pub vectors: Option<PathBuf>,
    pub dim: Option<usize>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_backend() -> BackendKind {
    BackendKind::Lexical
}

fn default_in_flight() -> usize {
    4
}

fn default_timeout() -> u64 {
    60
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            kind: default_backend(),
            lexicon: None,
            endpoint: None,
            vectors: None,
            dim: None,
            max_in_flight: default_in_flight(),
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_model_path")]
    pub model: PathBuf,
    #[serde(default = "default_reports")]
    pub reports: PathBuf,
}

fn default_model_path() -> PathBuf {
    PathBuf::from("model.json")
}

fn default_reports() -> PathBuf {
    PathBuf::from("reports")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            model: default_model_path(),
            reports: default_reports(),
        }
    }
}

/// Flags shared by the commands that read a run configuration.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// TOML run configuration
    #[arg(short, long)]
    pub config: PathBuf,
    /// Random seed (required here or in the config)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Corpus file (overrides config)
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Comma-separated label names (overrides config)
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Keyword lexicon JSON for the lexical and precomputed backends
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Inference sidecar base URL
    #[arg(long, env = zerotopic::remote::ENDPOINT_ENV)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub min_topic_size: Option<usize>,
    #[arg(long)]
    pub distance_threshold: Option<f64>,
}

/// Everything a command needs, with overrides applied and files checked.
pub struct Resolved {
    pub seed: u64,
    pub k: usize,
    pub labels: LabelSet,
    pub corpus_path: PathBuf,
    pub format: CorpusFormat,
    pub text_fields: Vec<String>,
    pub zeroshot: ZeroShotConfig,
    pub backend: Box<dyn EntailmentBackend>,
    pub model_path: PathBuf,
    pub report_dir: PathBuf,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        config.corpus.path = base.join(&config.corpus.path);
        config.output.model = base.join(&config.output.model);
        config.output.reports = base.join(&config.output.reports);
        if let Some(p) = config.backend.lexicon.take() {
            config.backend.lexicon = Some(base.join(p));
        }
        if let Some(p) = config.backend.vectors.take() {
            config.backend.vectors = Some(base.join(p));
        }
        if let EmbedderSpec::Precomputed { path, .. } = &mut config.model.embedder {
            *path = base.join(&*path);
        }
        Ok(config)
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} {} does not exist", path.display());
    }
    Ok(())
}

pub fn resolve(args: &ConfigArgs) -> Result<Resolved> {
    let mut config = RunConfig::from_path(&args.config)?;
    if let Some(p) = &args.corpus {
        config.corpus.path = p.clone();
    }
    if let Some(l) = &args.labels {
        config.labels = l.clone();
    }
    if let Some(b) = args.backend {
        config.backend.kind = b;
    }
    if let Some(p) = &args.lexicon {
        config.backend.lexicon = Some(p.clone());
    }
    if let Some(e) = &args.endpoint {
        config.backend.endpoint = Some(e.clone());
    }
    if let Some(m) = args.min_topic_size {
        config.model.topic_model.min_topic_size = m;
    }
    if let Some(t) = args.distance_threshold {
        config.model.topic_model.distance_threshold = t;
    }
    let Some(seed) = args.seed.or(config.seed) else {
        bail!("a seed is required: set `seed` in {} or pass --seed", args.config.display());
    };
    config.model.topic_model.seed = seed;

    if config.labels.is_empty() {
        bail!("no labels configured: set `labels` in {} or pass --labels", args.config.display());
    }
    let labels = LabelSet::new(config.labels.clone())?;
    require_file(&config.corpus.path, "corpus")?;

    let b = &config.backend;
    let backend: Box<dyn EntailmentBackend> = match b.kind {
        BackendKind::Lexical | BackendKind::Precomputed => {
            let lexicon = b
                .lexicon
                .as_deref()
                .context("the lexical and precomputed backends need `backend.lexicon`")?;
            require_file(lexicon, "lexicon")?;
            Box::new(LexicalBackend::from_path(lexicon)?)
        }
        BackendKind::Remote => {
            let endpoint = b.endpoint.as_deref().with_context(|| {
                format!(
                    "the remote backend needs `backend.endpoint`, --endpoint or {}",
                    zerotopic::remote::ENDPOINT_ENV
                )
            })?;
            Box::new(RemoteBackend::new(
                endpoint,
                b.max_in_flight,
                Duration::from_secs(b.timeout_secs),
                b.retry,
            ))
        }
    };
    match b.kind {
        BackendKind::Precomputed => {
            let vectors = b.vectors.clone().context("the precomputed backend needs `backend.vectors`")?;
            require_file(&vectors, "embedding file")?;
            let dim = b.dim.context("the precomputed backend needs `backend.dim`")?;
            config.model.embedder = EmbedderSpec::Precomputed { path: vectors, dim };
        }
        BackendKind::Remote => {
            if let (EmbedderSpec::Remote { endpoint, .. }, Some(e)) = (&mut config.model.embedder, &b.endpoint) {
                *endpoint = e.clone();
            }
        }
        BackendKind::Lexical => {}
    }
    config.model.embedder.validate()?;
    config.model.topic_model.validate()?;

    Ok(Resolved {
        seed,
        k: config.k,
        labels,
        corpus_path: config.corpus.path,
        format: config.corpus.format,
        text_fields: config.corpus.text_fields,
        zeroshot: config.model,
        backend,
        model_path: config.output.model,
        report_dir: config.output.reports,
    })
}
