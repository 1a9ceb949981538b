//! Topic model: clusters document embeddings into topics, describes each
//! topic by its highest c-TF-IDF n-grams, and encodes any document as a
//! distribution over topics.
//!
//! A document's topic weight is its sharpened, clamped cosine similarity to
//! each topic centroid, normalized to sum to one:
//! `w_k ∝ max(0, cos(e, c_k))^τ`. When no centroid has positive similarity the
//! distribution is uniform and flagged as a fallback.

mod cluster;
mod terms;

use serde::{Deserialize, Serialize};

use crate::corpus::{TextRef, UnlabeledCorpus};
use crate::embedding::{cosine_similarity, Embedder, EmbedderSpec, Embedding};
use crate::error::{Error, Result};

pub use cluster::{cluster, cluster_with, Assignment, Clusterer, ThresholdAgglomerative};
pub use terms::{class_counts, ctfidf_top_terms, document_terms, extract_topic_terms, TermCounts};

/// Serialized layout version of [`FittedTopicModel`].
pub const TOPIC_MODEL_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum ClusteringMethod {
    ThresholdAgglomerative,
    /// Supplied by the caller through [`fit_with_clusterer`].
    Plugin { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicModelConfig {
    pub n_grams_range: (usize, usize),
    /// Number of terms kept per topic.
    pub top_n_words: usize,
    pub min_topic_size: usize,
    pub clustering: ClusteringMethod,
    /// Cosine distance at which the average-linkage dendrogram is cut.
    pub distance_threshold: f64,
    /// Exponent applied to clamped centroid similarities before normalizing.
    pub sharpening: f64,
    pub stopwords: Option<Vec<String>>,
    pub seed: u64,
}

impl Default for TopicModelConfig {
    fn default() -> Self {
        Self {
            n_grams_range: (1, 3),
            top_n_words: 20,
            min_topic_size: 10,
            clustering: ClusteringMethod::ThresholdAgglomerative,
            distance_threshold: 0.75,
            sharpening: 4.0,
            stopwords: None,
            seed: 0,
        }
    }
}

impl TopicModelConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.n_grams_range;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if lo < 1 || lo > hi {
            return bad(format!("n_grams_range must satisfy 1 <= lo <= hi, got ({lo}, {hi})"));
        }
        if self.top_n_words < 1 {
            return bad("top_n_words must be at least 1".into());
        }
        if self.min_topic_size < 2 {
            return bad(format!(
                "min_topic_size must be at least 2, got {}",
                self.min_topic_size
            ));
        }
        if !(self.distance_threshold.is_finite() && self.distance_threshold >= 0.0) {
            return bad(format!("invalid distance_threshold {}", self.distance_threshold));
        }
        if !(self.sharpening.is_finite() && self.sharpening > 0.0) {
            return bad(format!("invalid sharpening exponent {}", self.sharpening));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub index: usize,
    /// Sorted by weight, descending.
    pub terms: Vec<(String, f64)>,
    pub centroid: Embedding,
    pub size: usize,
}

impl Topic {
    pub fn term_summary(&self, max_terms: usize) -> String {
        self.terms
            .iter()
            .take(max_terms)
            .map(|(t, _)| t.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDistribution {
    weights: Vec<f64>,
    /// Set when the document resembled no topic and the weights are uniform.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    fallback: bool,
}

impl TopicDistribution {
    /// Fails unless the weights are non-negative and sum to one within 1e-9.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidConfig("topic distribution is empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::ContractViolation("negative topic weight".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::ContractViolation(format!("topic weights sum to {s}")));
        }
        Ok(Self {
            weights,
            fallback: false,
        })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            weights: vec![1.0 / k as f64; k],
            fallback: true,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_fallback(&self) -> bool {
        self.fallback
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.weights)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTopicModel {
    format_version: u32,
    config: TopicModelConfig,
    embedder: EmbedderSpec,
    topics: Vec<Topic>,
    outliers: usize,
}

impl FittedTopicModel {
    pub fn config(&self) -> &TopicModelConfig {
        &self.config
    }

    pub fn embedder_spec(&self) -> &EmbedderSpec {
        &self.embedder
    }

    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    /// Training documents that ended up in no topic.
    pub fn outlier_count(&self) -> usize {
        self.outliers
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(json)?;
        if model.format_version != TOPIC_MODEL_FORMAT {
            return Err(Error::Artifact(format!(
                "topic model format {} (expected {TOPIC_MODEL_FORMAT})",
                model.format_version
            )));
        }
        Ok(model)
    }

    /// Topic distribution of an already-embedded document.
    pub fn encode_embedding(&self, embedding: &Embedding) -> Result<TopicDistribution> {
        let k = self.topics.len();
        let mut weights = Vec::with_capacity(k);
        for t in &self.topics {
            let sim = cosine_similarity(embedding, &t.centroid)?;
            weights.push(sim.max(0.0).powf(self.config.sharpening));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Ok(TopicDistribution::uniform(k));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(TopicDistribution {
            weights,
            fallback: false,
        })
    }

    /// Encoder that embeds with a backend built from the stored embedder spec.
    pub fn encoder(&self) -> Result<TopicEncoder<'_>> {
        Ok(TopicEncoder {
            model: self,
            embedder: self.embedder.build()?,
        })
    }
}

pub struct TopicEncoder<'m> {
    model: &'m FittedTopicModel,
    embedder: Box<dyn Embedder>,
}

impl TopicEncoder<'_> {
    pub fn encode(&self, doc: TextRef<'_>) -> Result<TopicDistribution> {
        Ok(self.encode_batch(&[doc])?.remove(0))
    }

    pub fn encode_batch(&self, docs: &[TextRef<'_>]) -> Result<Vec<TopicDistribution>> {
        self.embedder
            .embed(docs)?
            .iter()
            .map(|e| self.model.encode_embedding(e))
            .collect()
    }
}

/// Topic distribution of a single document under `model`.
pub fn topic_encoder(doc: TextRef<'_>, model: &FittedTopicModel) -> Result<TopicDistribution> {
    model.encoder()?.encode(doc)
}

/// Embeds the corpus with `embedder` and fits with the configured clustering.
pub fn fit(
    corpus: &UnlabeledCorpus<'_>,
    embedder_spec: &EmbedderSpec,
    config: &TopicModelConfig,
) -> Result<FittedTopicModel> {
    check_size(corpus.len(), config)?;
    let embeddings = embedder_spec.build()?.embed(&corpus.to_vec())?;
    fit_embeddings(corpus, &embeddings, embedder_spec, config)
}

/// Fits on precomputed embeddings, one per corpus document.
pub fn fit_embeddings(
    corpus: &UnlabeledCorpus<'_>,
    embeddings: &[Embedding],
    embedder_spec: &EmbedderSpec,
    config: &TopicModelConfig,
) -> Result<FittedTopicModel> {
    match &config.clustering {
        ClusteringMethod::ThresholdAgglomerative => {
            fit_with_clusterer(corpus, embeddings, embedder_spec, config, &ThresholdAgglomerative)
        }
        ClusteringMethod::Plugin { name } => Err(Error::InvalidConfig(format!(
            "clustering plugin {name:?} must be supplied through fit_with_clusterer"
        ))),
    }
}

pub fn fit_with_clusterer(
    corpus: &UnlabeledCorpus<'_>,
    embeddings: &[Embedding],
    embedder_spec: &EmbedderSpec,
    config: &TopicModelConfig,
    clusterer: &dyn Clusterer,
) -> Result<FittedTopicModel> {
    config.validate()?;
    check_size(corpus.len(), config)?;
    if embeddings.len() != corpus.len() {
        return Err(Error::DimensionMismatch {
            expected: corpus.len(),
            actual: embeddings.len(),
        });
    }
    if embeddings.iter().any(|e| e.dim() != embedder_spec.dim()) {
        return Err(Error::ContractViolation(format!(
            "embeddings do not match embedder dim {}",
            embedder_spec.dim()
        )));
    }
    if embeddings.windows(2).all(|w| w[0] == w[1]) {
        log::warn!("all {} embeddings are identical; fitting a single topic", embeddings.len());
    }

    let assignment = cluster_with(clusterer, embeddings, config)?;
    let num_topics = assignment.iter().flatten().max().map_or(0, |m| m + 1);
    if num_topics == 0 {
        return Err(Error::NoTopics(config.min_topic_size));
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_topics];
    let mut outlier_docs = Vec::new();
    for (i, a) in assignment.iter().enumerate() {
        match a {
            Some(k) => members[*k].push(i),
            None => outlier_docs.push(i),
        }
    }

    let text_of = |i: usize| corpus.get(i).expect("index within corpus").text;
    let mut classes: Vec<TermCounts> = members
        .iter()
        .map(|m| class_counts(m.iter().map(|&i| text_of(i)), config))
        .collect();
    if let Some(empty) = classes.iter().position(|c| c.is_empty()) {
        log::error!("topic {empty} has no terms after tokenization");
        return Err(Error::EmptyVocabulary);
    }
    if !outlier_docs.is_empty() {
        classes.push(class_counts(outlier_docs.iter().map(|&i| text_of(i)), config));
    }
    let top_terms = ctfidf_top_terms(&classes, config.top_n_words);

    let dim = embedder_spec.dim();
    let topics = members
        .iter()
        .zip(top_terms)
        .enumerate()
        .map(|(index, (m, terms))| {
            let mut mean = vec![0.0; dim];
            for &i in m {
                for (acc, v) in mean.iter_mut().zip(embeddings[i].values()) {
                    *acc += v;
                }
            }
            mean.iter_mut().for_each(|v| *v /= m.len() as f64);
            Ok(Topic {
                index,
                terms,
                centroid: Embedding::normalized(mean)?,
                size: m.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FittedTopicModel {
        format_version: TOPIC_MODEL_FORMAT,
        config: config.clone(),
        embedder: embedder_spec.clone(),
        topics,
        outliers: outlier_docs.len(),
    })
}

fn check_size(docs: usize, config: &TopicModelConfig) -> Result<()> {
    if docs < config.min_topic_size {
        return Err(Error::CorpusTooSmall {
            docs,
            min_topic_size: config.min_topic_size,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Document};

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Document::new(format!("d{i}"), *t, None).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn hashing() -> EmbedderSpec {
        EmbedderSpec::Hashing { dim: 64 }
    }

    #[test]
    fn too_small_corpus() {
        let c = corpus(&["a", "b", "c", "d", "e"]);
        let err = fit(&c.unlabeled(), &hashing(), &TopicModelConfig::default()).unwrap_err();
        assert!(matches!(err, Error::CorpusTooSmall { docs: 5, min_topic_size: 10 }));
        assert!(err.to_string().contains("corpus too small"));
    }

    #[test]
    fn identical_texts_give_one_topic() {
        let c = corpus(&["gol jogo campeonato"; 12]);
        let m = fit(&c.unlabeled(), &hashing(), &TopicModelConfig::default()).unwrap();
        assert_eq!(m.num_topics(), 1);
        assert_eq!(m.topics()[0].size, 12);
        assert_eq!(m.outlier_count(), 0);
        let omega = topic_encoder(TextRef { id: "x", text: "juros" }, &m).unwrap();
        assert_eq!(omega.weights(), &[1.0]);
    }

    #[test]
    fn orthogonal_document_gets_flagged_uniform() {
        let e = |v: &[f64]| Embedding::normalized(v.to_vec()).unwrap();
        let model = FittedTopicModel {
            format_version: TOPIC_MODEL_FORMAT,
            config: TopicModelConfig::default(),
            embedder: EmbedderSpec::Hashing { dim: 3 },
            topics: vec![
                Topic { index: 0, terms: vec![("a".into(), 1.0)], centroid: e(&[1.0, 0.0, 0.0]), size: 10 },
                Topic { index: 1, terms: vec![("b".into(), 1.0)], centroid: e(&[0.0, 1.0, 0.0]), size: 10 },
            ],
            outliers: 0,
        };
        let omega = model.encode_embedding(&e(&[0.0, 0.0, 1.0])).unwrap();
        assert!(omega.is_fallback());
        assert_eq!(omega.weights(), &[0.5, 0.5]);
        let omega = model.encode_embedding(&e(&[-1.0, 0.0, 0.0])).unwrap();
        assert!(omega.is_fallback());

        let omega = model.encode_embedding(&e(&[3.0, 1.0, 0.0])).unwrap();
        assert!(!omega.is_fallback());
        // cos = 3/sqrt(10), 1/sqrt(10); tau = 4 -> 81 : 1
        assert!((omega.weights()[0] - 81.0 / 82.0).abs() < 1e-12);
    }

    #[test]
    fn plugin_clustering_requires_clusterer() {
        struct AllOne;
        impl Clusterer for AllOne {
            fn cluster(&self, e: &[Embedding], _: &TopicModelConfig) -> Result<Assignment> {
                Ok(vec![Some(0); e.len()])
            }
        }
        let c = corpus(&["um dois", "tres quatro"]);
        let config = TopicModelConfig {
            min_topic_size: 2,
            clustering: ClusteringMethod::Plugin { name: "all-one".into() },
            ..TopicModelConfig::default()
        };
        assert!(fit(&c.unlabeled(), &hashing(), &config).is_err());
        let embeddings = hashing().build().unwrap().embed(&c.unlabeled().to_vec()).unwrap();
        let m = fit_with_clusterer(&c.unlabeled(), &embeddings, &hashing(), &config, &AllOne).unwrap();
        assert_eq!(m.num_topics(), 1);
    }

    #[test]
    fn config_validation() {
        let bad = [
            TopicModelConfig { n_grams_range: (0, 1), ..Default::default() },
            TopicModelConfig { n_grams_range: (3, 2), ..Default::default() },
            TopicModelConfig { top_n_words: 0, ..Default::default() },
            TopicModelConfig { min_topic_size: 1, ..Default::default() },
            TopicModelConfig { sharpening: 0.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert!(TopicModelConfig::default().validate().is_ok());
    }

    #[test]
    fn json_round_trip_checks_version() {
        let c = corpus(&["gol jogo"; 10]);
        let m = fit(&c.unlabeled(), &hashing(), &TopicModelConfig::default()).unwrap();
        let json = m.to_json().unwrap();
        assert_eq!(FittedTopicModel::from_json(&json).unwrap(), m);
        let bumped = json.replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(FittedTopicModel::from_json(&bumped).is_err());
    }
}
