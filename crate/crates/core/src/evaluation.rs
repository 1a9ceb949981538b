//! Cross-validated experiment harness.
//!
//! A stratified k-fold plan is split four ways, each rotation `r` choosing:
//!
//! | id   | train folds | eval folds  |
//! |------|-------------|-------------|
//! | exp1 | all but `r` | all but `r` |
//! | exp2 | all but `r` | `r`         |
//! | exp3 | `r`         | `r`         |
//! | exp4 | `r`         | all but `r` |
//!
//! Gold labels are only read when scoring predictions.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{select_folds, stratified_kfold, Corpus, LabelSet, TextRef};
use crate::entailment::EntailmentBackend;
use crate::error::{Error, Result};
use crate::zeroshot::{self, direct_classify, TrainedModel, ZeroShotConfig};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 4] = [Self::Exp1, Self::Exp2, Self::Exp3, Self::Exp4];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Exp1 => "exp1",
            Self::Exp2 => "exp2",
            Self::Exp3 => "exp3",
            Self::Exp4 => "exp4",
        }
    }

    /// Whether evaluation happens on the training documents.
    pub fn evaluates_on_training_data(&self) -> bool {
        matches!(self, Self::Exp1 | Self::Exp3)
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment {s:?} (expected exp1..exp4)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub k: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidFolds(format!("k must be at least 2, got {k}")));
        }
        Ok(Self { id, k, seed })
    }

    /// Train and eval fold sets for `rotation`.
    pub fn folds(&self, rotation: usize) -> (BTreeSet<usize>, BTreeSet<usize>) {
        let one = BTreeSet::from([rotation]);
        let rest: BTreeSet<usize> = (0..self.k).filter(|&f| f != rotation).collect();
        match self.id {
            ExperimentId::Exp1 => (rest.clone(), rest),
            ExperimentId::Exp2 => (rest, one),
            ExperimentId::Exp3 => (one.clone(), one),
            ExperimentId::Exp4 => (one, rest),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall and F1 with support-weighted averages.
/// Empty denominators score 0.
pub fn weighted_metrics<G, P>(gold: &[G], pred: &[P], labels: &LabelSet) -> Result<ClassificationScores>
where
    G: AsRef<str>,
    P: AsRef<str>,
{
    if gold.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            actual: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::InvalidConfig("no predictions to score".into()));
    }
    let m = labels.len();
    let index = |l: &str| labels.index_of(l).ok_or_else(|| Error::UnknownLabel(l.to_string()));
    let mut tp = vec![0usize; m];
    let mut predicted = vec![0usize; m];
    let mut support = vec![0usize; m];
    for (g, p) in gold.iter().zip(pred) {
        let (g, p) = (index(g.as_ref())?, index(p.as_ref())?);
        support[g] += 1;
        predicted[p] += 1;
        if g == p {
            tp[g] += 1;
        }
    }
    let n = gold.len() as f64;
    let per_class: Vec<ClassMetrics> = (0..m)
        .map(|j| {
            let precision = ratio(tp[j], predicted[j]);
            let recall = ratio(tp[j], support[j]);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                label: labels.get(j).unwrap_or_default().to_string(),
                precision,
                recall,
                f1,
                support: support[j],
            }
        })
        .collect();
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / n
    };
    Ok(ClassificationScores {
        weighted_precision: weighted(|c| c.precision),
        weighted_recall: weighted(|c| c.recall),
        weighted_f1: weighted(|c| c.f1),
        per_class,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationResult {
    pub rotation: usize,
    pub train_folds: Vec<usize>,
    pub eval_folds: Vec<usize>,
    pub train_docs: usize,
    pub eval_docs: usize,
    pub num_topics: Option<usize>,
    /// Eval documents that matched no topic.
    pub fallback_docs: usize,
    pub scores: ClassificationScores,
    pub train_secs: f64,
    pub inference_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationFailure {
    pub rotation: usize,
    pub error: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub train_secs: f64,
    pub inference_secs: f64,
    pub total_secs: f64,
}

impl Summary {
    fn of(r: &RotationResult) -> Self {
        Self {
            weighted_precision: r.scores.weighted_precision,
            weighted_recall: r.scores.weighted_recall,
            weighted_f1: r.scores.weighted_f1,
            train_secs: r.train_secs,
            inference_secs: r.inference_secs,
            total_secs: r.total_secs,
        }
    }

    fn map2(a: Self, b: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            weighted_precision: f(a.weighted_precision, b.weighted_precision),
            weighted_recall: f(a.weighted_recall, b.weighted_recall),
            weighted_f1: f(a.weighted_f1, b.weighted_f1),
            train_secs: f(a.train_secs, b.train_secs),
            inference_secs: f(a.inference_secs, b.inference_secs),
            total_secs: f(a.total_secs, b.total_secs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub experiment: ExperimentId,
    pub baseline: bool,
    pub k: usize,
    pub seed: u64,
    pub rotations: Vec<RotationResult>,
    pub failures: Vec<RotationFailure>,
    pub mean: Summary,
    /// Population standard deviation across successful rotations.
    pub std: Summary,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fixed-width text table of every rotation plus mean ± std.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let model = if self.baseline { "baseline" } else { "zero-shot topics" };
        let _ = writeln!(out, "{} ({model}), k = {}, seed = {}", self.experiment, self.k, self.seed);
        let _ = writeln!(
            out,
            "{:>8} {:>7} {:>7} {:>7} {:>7} {:>10} {:>10} {:>10}",
            "rotation", "P", "R", "F1", "topics", "train(s)", "infer(s)", "total(s)"
        );
        for r in &self.rotations {
            let topics = r.num_topics.map_or_else(|| "-".to_string(), |k| k.to_string());
            let _ = writeln!(
                out,
                "{:>8} {:>7.4} {:>7.4} {:>7.4} {:>7} {:>10.3} {:>10.3} {:>10.3}",
                r.rotation,
                r.scores.weighted_precision,
                r.scores.weighted_recall,
                r.scores.weighted_f1,
                topics,
                r.train_secs,
                r.inference_secs,
                r.total_secs
            );
        }
        for f in &self.failures {
            let _ = writeln!(out, "{:>8} FAILED: {}", f.rotation, f.error);
        }
        let (m, s) = (&self.mean, &self.std);
        let _ = writeln!(
            out,
            "mean±std P {:.4}±{:.4}  R {:.4}±{:.4}  F1 {:.4}±{:.4}  total {:.3}s±{:.3}s",
            m.weighted_precision,
            s.weighted_precision,
            m.weighted_recall,
            s.weighted_recall,
            m.weighted_f1,
            s.weighted_f1,
            m.total_secs,
            s.total_secs
        );
        out
    }
}

fn aggregate(rotations: &[RotationResult]) -> (Summary, Summary) {
    if rotations.is_empty() {
        return (Summary::default(), Summary::default());
    }
    let n = rotations.len() as f64;
    let sum = rotations
        .iter()
        .map(Summary::of)
        .fold(Summary::default(), |a, b| Summary::map2(a, b, |x, y| x + y));
    let mean = Summary::map2(sum, sum, |x, _| x / n);
    let sq = rotations
        .iter()
        .map(|r| Summary::map2(Summary::of(r), mean, |x, mu| (x - mu) * (x - mu)))
        .fold(Summary::default(), |a, b| Summary::map2(a, b, |x, y| x + y));
    let std = Summary::map2(sq, sq, |x, _| (x / n).sqrt());
    (mean, std)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Score the direct-entailment baseline instead of the topic classifier.
    pub baseline: bool,
    /// Run only rotation 0.
    pub single_rotation: bool,
}

/// Runs every rotation of `spec`. Rotations that fail are logged and reported
/// in [`MetricsReport::failures`]; the run only errors when nothing succeeds.
pub fn run_experiment(
    spec: &ExperimentSpec,
    corpus: &Corpus,
    labels: &LabelSet,
    config: &ZeroShotConfig,
    backend: &dyn EntailmentBackend,
    options: RunOptions,
) -> Result<MetricsReport> {
    let plan = stratified_kfold(corpus, spec.k, spec.seed)?;
    let rotations = if options.single_rotation { 1 } else { spec.k };
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for r in 0..rotations {
        let (train_folds, eval_folds) = spec.folds(r);
        let outcome = select_folds(corpus, &plan, &train_folds).and_then(|train| {
            let eval = select_folds(corpus, &plan, &eval_folds)?;
            run_rotation(r, &train_folds, &eval_folds, &train, &eval, labels, config, backend, options.baseline)
        });
        match outcome {
            Ok(res) => {
                log::info!(
                    "{} rotation {r}: weighted F1 {:.4} in {:.3}s",
                    spec.id,
                    res.scores.weighted_f1,
                    res.total_secs
                );
                results.push(res);
            }
            Err(e) => {
                log::warn!("{} rotation {r} failed: {e}", spec.id);
                failures.push(RotationFailure {
                    rotation: r,
                    error: e.to_string(),
                });
            }
        }
    }
    if results.is_empty() {
        let detail = failures.first().map(|f| f.error.clone()).unwrap_or_default();
        return Err(Error::InvalidConfig(format!("every rotation failed; first error: {detail}")));
    }
    let (mean, std) = aggregate(&results);
    Ok(MetricsReport {
        experiment: spec.id,
        baseline: options.baseline,
        k: spec.k,
        seed: spec.seed,
        rotations: results,
        failures,
        mean,
        std,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_rotation(
    rotation: usize,
    train_folds: &BTreeSet<usize>,
    eval_folds: &BTreeSet<usize>,
    train: &Corpus,
    eval: &Corpus,
    labels: &LabelSet,
    config: &ZeroShotConfig,
    backend: &dyn EntailmentBackend,
    baseline: bool,
) -> Result<RotationResult> {
    let eval_docs: Vec<TextRef<'_>> = eval.unlabeled().to_vec();
    let gold: Vec<&str> = eval
        .iter()
        .map(|d| {
            d.gold_label()
                .ok_or_else(|| Error::InvalidConfig(format!("document {:?} has no gold label", d.id())))
        })
        .collect::<Result<_>>()?;

    let (predictions, num_topics, train_time, inference_time) = if baseline {
        let start = Instant::now();
        let preds = eval_docs
            .par_iter()
            .map(|d| {
                direct_classify(
                    *d,
                    labels,
                    &config.document_template,
                    backend,
                    config.max_tokens,
                    config.normalize,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        (preds, None, Duration::ZERO, start.elapsed())
    } else {
        let start = Instant::now();
        let model = zeroshot::train(&train.unlabeled(), labels, config, backend)?;
        let train_time = start.elapsed();
        let start = Instant::now();
        let preds = zeroshot::predict_batch(&model, &eval_docs)?;
        (preds, Some(model.topic_model().num_topics()), train_time, start.elapsed())
    };

    let pred_labels: Vec<&str> = predictions.iter().map(|p| p.label.as_str()).collect();
    let scores = weighted_metrics(&gold, &pred_labels, labels)?;
    let (train_secs, inference_secs) = (train_time.as_secs_f64(), inference_time.as_secs_f64());
    Ok(RotationResult {
        rotation,
        train_folds: train_folds.iter().copied().collect(),
        eval_folds: eval_folds.iter().copied().collect(),
        train_docs: if baseline { 0 } else { train.len() },
        eval_docs: eval.len(),
        num_topics,
        fallback_docs: predictions.iter().filter(|p| p.fallback).count(),
        scores,
        train_secs,
        inference_secs,
        total_secs: train_secs + inference_secs,
    })
}

/// Writes the topic × label entailment matrix as CSV: the `top_n` largest
/// topics (ties by topic index), one column per label.
pub fn export_entailment_matrix<W: io::Write>(model: &TrainedModel, top_n: usize, out: W) -> Result<usize> {
    let topics = model.topic_model().topics();
    let mut order: Vec<usize> = (0..topics.len()).collect();
    order.sort_by(|&a, &b| topics[b].size.cmp(&topics[a].size).then(a.cmp(&b)));
    order.truncate(top_n);

    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["topic".to_string()];
    header.extend(model.labels().names().iter().cloned());
    w.write_record(&header)?;
    for &k in &order {
        let t = &topics[k];
        let name = std::iter::once(t.index.to_string())
            .chain(t.terms.iter().take(4).map(|(term, _)| term.replace(' ', "-")))
            .collect::<Vec<_>>()
            .join("_");
        let mut row = vec![name];
        row.extend(model.entailment_table().row(k).iter().map(|p| p.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<matrix output>", e))?;
    Ok(order.len())
}

pub fn export_entailment_matrix_to(model: &TrainedModel, top_n: usize, path: &Path) -> Result<usize> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    export_entailment_matrix(model, top_n, file)
}
