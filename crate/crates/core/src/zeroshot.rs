//! Topic-mediated zero-shot classifier and the direct-entailment baseline.
//!
//! Training fits a topic model on unlabeled text and scores every topic's term
//! list against every label hypothesis once. Prediction never looks at a
//! document's text through the entailment model: the label score is
//!
//! ```text
//! θ_j = Σ_k P(topic k ⇒ H(label j)) · ω_k
//! ```
//!
//! where `ω` is the document's topic distribution.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSet, TextRef, UnlabeledCorpus};
use crate::embedding::EmbedderSpec;
use crate::entailment::{
    self, serialize_topic_premise, EntailmentBackend, EntailmentTable, HypothesisTemplate,
};
use crate::error::{Error, Result};
use crate::text;
use crate::topic_model::{self, argmax, FittedTopicModel, TopicDistribution, TopicModelConfig};

/// Serialized layout version of [`TrainedModel`].
pub const MODEL_FORMAT: u32 = 1;

/// Whitespace-token budget of the baseline classifier's premise.
pub const DEFAULT_MAX_TOKENS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZeroShotConfig {
    pub topic_template: HypothesisTemplate,
    pub document_template: HypothesisTemplate,
    pub embedder: EmbedderSpec,
    pub topic_model: TopicModelConfig,
    /// Normalize entailment probabilities across labels.
    pub normalize: bool,
    /// Baseline premise truncation, in whitespace tokens.
    pub max_tokens: usize,
}

impl Default for ZeroShotConfig {
    fn default() -> Self {
        Self {
            topic_template: HypothesisTemplate::topic_default(),
            document_template: HypothesisTemplate::document_default(),
            embedder: EmbedderSpec::default(),
            topic_model: TopicModelConfig::default(),
            normalize: true,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    theta: Vec<f64>,
}

impl LabelScores {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidConfig("label scores are empty".into()));
        }
        if let Some(v) = theta.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::ContractViolation(format!("label score {v} is invalid")));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Highest-scoring label index; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub scores: LabelScores,
    /// The document matched no topic and was scored from a uniform distribution.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    format_version: u32,
    topic_model: FittedTopicModel,
    entailment_table: EntailmentTable,
    labels: LabelSet,
    template: HypothesisTemplate,
}

impl TrainedModel {
    pub fn new(
        topic_model: FittedTopicModel,
        entailment_table: EntailmentTable,
        labels: LabelSet,
        template: HypothesisTemplate,
    ) -> Result<Self> {
        let model = Self {
            format_version: MODEL_FORMAT,
            topic_model,
            entailment_table,
            labels,
            template,
        };
        model.check_shape()?;
        Ok(model)
    }

    fn check_shape(&self) -> Result<()> {
        if self.entailment_table.num_topics() != self.topic_model.num_topics() {
            return Err(Error::DimensionMismatch {
                expected: self.topic_model.num_topics(),
                actual: self.entailment_table.num_topics(),
            });
        }
        if self.entailment_table.num_labels() != self.labels.len() {
            return Err(Error::DimensionMismatch {
                expected: self.labels.len(),
                actual: self.entailment_table.num_labels(),
            });
        }
        Ok(())
    }

    pub fn topic_model(&self) -> &FittedTopicModel {
        &self.topic_model
    }

    pub fn entailment_table(&self) -> &EntailmentTable {
        &self.entailment_table
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn template(&self) -> &HypothesisTemplate {
        &self.template
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(json)?;
        if model.format_version != MODEL_FORMAT {
            return Err(Error::Artifact(format!(
                "model format {} (expected {MODEL_FORMAT})",
                model.format_version
            )));
        }
        // re-validate the nested topic model version and table shape
        FittedTopicModel::from_json(&serde_json::to_string(&model.topic_model)?)?;
        model.check_shape()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }
}

/// Fits the topic model on `corpus` and scores every topic against every label.
pub fn train(
    corpus: &UnlabeledCorpus<'_>,
    labels: &LabelSet,
    config: &ZeroShotConfig,
    backend: &dyn EntailmentBackend,
) -> Result<TrainedModel> {
    if labels.is_empty() {
        return Err(Error::InvalidLabelSet("label set is empty".into()));
    }
    let topic_model = topic_model::fit(corpus, &config.embedder, &config.topic_model)?;
    let rows = topic_model
        .topics()
        .par_iter()
        .map(|t| {
            entailment::predict(
                &serialize_topic_premise(t),
                labels,
                &config.topic_template,
                backend,
                config.normalize,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let table = EntailmentTable::new(rows, config.normalize)?;
    TrainedModel::new(
        topic_model,
        table,
        labels.clone(),
        config.topic_template.clone(),
    )
}

/// `θ_j = Σ_k table[k][j] · ω_k`.
pub fn compose_probabilities(
    omega: &TopicDistribution,
    table: &EntailmentTable,
) -> Result<LabelScores> {
    if omega.len() != table.num_topics() {
        return Err(Error::DimensionMismatch {
            expected: table.num_topics(),
            actual: omega.len(),
        });
    }
    let mut theta = vec![0.0; table.num_labels()];
    for (row, w) in table.rows().iter().zip(omega.weights()) {
        for (acc, p) in theta.iter_mut().zip(row) {
            *acc += p * w;
        }
    }
    LabelScores::new(theta)
}

fn decide(model: &TrainedModel, omega: &TopicDistribution) -> Result<Prediction> {
    let scores = compose_probabilities(omega, &model.entailment_table)?;
    let label = model.labels.get(scores.argmax()).expect("table width = label count");
    Ok(Prediction {
        label: label.to_string(),
        scores,
        fallback: omega.is_fallback(),
    })
}

pub fn predict(model: &TrainedModel, doc: TextRef<'_>) -> Result<Prediction> {
    Ok(predict_batch(model, &[doc])?.remove(0))
}

/// Predicts many documents, embedding them in one pass.
pub fn predict_batch(model: &TrainedModel, docs: &[TextRef<'_>]) -> Result<Vec<Prediction>> {
    if docs.is_empty() {
        return Ok(Vec::new());
    }
    let encoder = model.topic_model.encoder()?;
    encoder
        .encode_batch(docs)?
        .iter()
        .map(|omega| decide(model, omega))
        .collect()
}

/// Baseline: entailment of the truncated document itself against each label.
pub fn direct_classify(
    doc: TextRef<'_>,
    labels: &LabelSet,
    template: &HypothesisTemplate,
    backend: &dyn EntailmentBackend,
    max_tokens: usize,
    normalize: bool,
) -> Result<Prediction> {
    if max_tokens < 1 {
        return Err(Error::InvalidConfig("max_tokens must be at least 1".into()));
    }
    let premise = text::truncate_whitespace_tokens(doc.text, max_tokens);
    let probs = entailment::predict(&premise, labels, template, backend, normalize)?;
    let scores = LabelScores::new(probs)?;
    Ok(Prediction {
        label: labels.get(scores.argmax()).expect("one score per label").to_string(),
        scores,
        fallback: false,
    })
}
