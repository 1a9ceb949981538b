//! Hypothesis templates and entailment scoring of a premise against every label.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::LabelSet;
use crate::error::{Error, Result};
use crate::remote::{EntailRequest, RetryPolicy, SidecarClient};
use crate::text;
use crate::topic_model::Topic;

pub const PLACEHOLDER: &str = "{}";

/// Default template for scoring whole documents.
pub const DOCUMENT_TEMPLATE: &str = "O tema principal desta notícia é {}";
/// Default template for scoring topic term lists.
pub const TOPIC_TEMPLATE: &str = "O tema principal desta lista de palavras é {}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HypothesisTemplate {
    pattern: String,
}

impl HypothesisTemplate {
    /// The pattern must contain exactly one `{}`.
    pub fn new(pattern: impl Into<String>) -> Result<Self> {
        let pattern = pattern.into();
        let n = pattern.matches(PLACEHOLDER).count();
        if n != 1 {
            return Err(Error::InvalidTemplate {
                reason: format!("expected exactly one {PLACEHOLDER} placeholder, found {n}"),
                pattern,
            });
        }
        Ok(Self { pattern })
    }

    pub fn document_default() -> Self {
        Self::new(DOCUMENT_TEMPLATE).expect("valid default template")
    }

    pub fn topic_default() -> Self {
        Self::new(TOPIC_TEMPLATE).expect("valid default template")
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn render(&self, label: &str) -> String {
        self.pattern.replacen(PLACEHOLDER, label, 1)
    }
}

impl TryFrom<String> for HypothesisTemplate {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Self::new(s)
    }
}

impl From<HypothesisTemplate> for String {
    fn from(t: HypothesisTemplate) -> Self {
        t.pattern
    }
}

/// One hypothesis per label, in label order.
pub fn render_hypotheses(template: &HypothesisTemplate, labels: &LabelSet) -> Vec<String> {
    labels.iter().map(|l| template.render(l)).collect()
}

/// A topic's terms in weight order, joined by ", ".
pub fn serialize_topic_premise(topic: &Topic) -> String {
    topic
        .terms
        .iter()
        .map(|(t, _)| t.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Scores a premise against the rendered hypotheses of every label.
pub trait EntailmentBackend: Send + Sync {
    /// One probability per label, in label order. `hypotheses[j]` is the
    /// rendering of `labels[j]`.
    fn score(
        &self,
        premise: &str,
        labels: &LabelSet,
        hypotheses: &[String],
        normalize: bool,
    ) -> Result<Vec<f64>>;
}

/// Entailment probabilities of `premise` for every label.
pub fn predict(
    premise: &str,
    labels: &LabelSet,
    template: &HypothesisTemplate,
    backend: &dyn EntailmentBackend,
    normalize: bool,
) -> Result<Vec<f64>> {
    if premise.trim().is_empty() {
        return Err(Error::InvalidConfig("premise is empty".into()));
    }
    let hypotheses = render_hypotheses(template, labels);
    let probs = backend.score(premise, labels, &hypotheses, normalize)?;
    check_probabilities(&probs, labels.len(), normalize)?;
    Ok(probs)
}

fn check_probabilities(probs: &[f64], m: usize, normalized: bool) -> Result<()> {
    if probs.len() != m {
        return Err(Error::ContractViolation(format!(
            "backend returned {} probabilities for {m} labels",
            probs.len()
        )));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::ContractViolation(format!("probability {p} outside [0, 1]")));
    }
    if normalized {
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::ContractViolation(format!(
                "normalized probabilities sum to {s}"
            )));
        }
    }
    Ok(())
}

/// K × m matrix of P(topic k entails the hypothesis of label j).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentTable {
    probs: Vec<Vec<f64>>,
    row_normalized: bool,
}

impl EntailmentTable {
    pub fn new(probs: Vec<Vec<f64>>, row_normalized: bool) -> Result<Self> {
        let m = probs.first().map_or(0, Vec::len);
        if probs.is_empty() || m == 0 {
            return Err(Error::InvalidConfig("entailment table is empty".into()));
        }
        for row in &probs {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    actual: row.len(),
                });
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::ContractViolation("table entry outside [0, 1]".into()));
            }
            if row_normalized {
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::ContractViolation(format!("table row sums to {s}")));
                }
            }
        }
        Ok(Self {
            probs,
            row_normalized,
        })
    }

    pub fn num_topics(&self) -> usize {
        self.probs.len()
    }

    pub fn num_labels(&self) -> usize {
        self.probs[0].len()
    }

    pub fn row(&self, topic: usize) -> &[f64] {
        &self.probs[topic]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn get(&self, topic: usize, label: usize) -> f64 {
        self.probs[topic][label]
    }

    pub fn is_row_normalized(&self) -> bool {
        self.row_normalized
    }
}

/// Smoothing added to every label's lexicon count.
pub const LEXICAL_EPSILON: f64 = 0.01;

/// Deterministic stand-in for an NLI model: a label's score is the number of
/// premise tokens the lexicon maps to it, plus a small smoothing constant.
///
/// Normalized: `(ε + count_l) / Σ_j (ε + count_j)`.
/// Raw: `(ε + count_l) / (ε + tokens)`, each label scored on its own.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LexicalBackend {
    lexicon: HashMap<String, String>,
    epsilon: f64,
}

impl LexicalBackend {
    pub fn new<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        Self {
            lexicon: entries
                .into_iter()
                .map(|(k, v)| (k.as_ref().to_lowercase(), v.into()))
                .collect(),
            epsilon: LEXICAL_EPSILON,
        }
    }

    /// Reads a JSON object mapping term → label name.
    pub fn from_path(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: HashMap<String, String> = serde_json::from_str(&raw)?;
        Ok(Self::new(map))
    }

    pub fn len(&self) -> usize {
        self.lexicon.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lexicon.is_empty()
    }
}

impl EntailmentBackend for LexicalBackend {
    fn score(
        &self,
        premise: &str,
        labels: &LabelSet,
        _hypotheses: &[String],
        normalize: bool,
    ) -> Result<Vec<f64>> {
        let tokens = text::words(premise);
        let mut counts = vec![0.0; labels.len()];
        for t in &tokens {
            if let Some(j) = self.lexicon.get(t).and_then(|l| labels.index_of(l)) {
                counts[j] += 1.0;
            }
        }
        let scores: Vec<f64> = counts.iter().map(|c| self.epsilon + c).collect();
        let denom = if normalize {
            scores.iter().sum::<f64>()
        } else {
            self.epsilon + tokens.len() as f64
        };
        Ok(scores.into_iter().map(|s| s / denom).collect())
    }
}

/// The sidecar's `/entail` endpoint; all hypotheses for a premise go in one request.
#[derive(Debug)]
pub struct RemoteBackend {
    client: SidecarClient,
}

impl RemoteBackend {
    pub fn new(endpoint: &str, max_in_flight: usize, timeout: Duration, retry: RetryPolicy) -> Self {
        Self {
            client: SidecarClient::new(endpoint, max_in_flight, timeout, retry),
        }
    }

    pub fn endpoint(&self) -> &str {
        self.client.endpoint()
    }
}

impl EntailmentBackend for RemoteBackend {
    fn score(
        &self,
        premise: &str,
        _labels: &LabelSet,
        hypotheses: &[String],
        normalize: bool,
    ) -> Result<Vec<f64>> {
        let resp = self.client.entail(&EntailRequest {
            premise: premise.to_string(),
            hypotheses: hypotheses.to_vec(),
            normalize,
        })?;
        if resp.truncated == Some(true) {
            log::debug!("sidecar truncated a premise of {} bytes", premise.len());
        }
        Ok(resp.probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Embedding;

    fn labels(names: &[&str]) -> LabelSet {
        LabelSet::new(names.iter().copied()).unwrap()
    }

    fn sports_lexicon() -> LexicalBackend {
        LexicalBackend::new([
            ("gol", "esporte"),
            ("jogo", "esporte"),
            ("campeonato", "esporte"),
            ("juros", "mercado"),
        ])
    }

    #[test]
    fn render_with_default_template() {
        let h = render_hypotheses(&HypothesisTemplate::document_default(), &labels(&["esporte"]));
        assert_eq!(h, ["O tema principal desta notícia é esporte"]);
    }

    #[test]
    fn bare_placeholder() {
        let t = HypothesisTemplate::new("{}").unwrap();
        assert_eq!(render_hypotheses(&t, &labels(&["x"])), ["x"]);
    }

    #[test]
    fn placeholder_count_is_checked() {
        assert!(HypothesisTemplate::new("sem marcador").is_err());
        assert!(HypothesisTemplate::new("{} e {}").is_err());
        assert!(serde_json::from_str::<HypothesisTemplate>("\"nada\"").is_err());
    }

    #[test]
    fn lexical_scores_by_hand() {
        // esporte: 0.01 + 3, mercado: 0.01 -> 3.01 / 3.02, 0.01 / 3.02
        let p = predict(
            "gol jogo campeonato",
            &labels(&["esporte", "mercado"]),
            &HypothesisTemplate::topic_default(),
            &sports_lexicon(),
            true,
        )
        .unwrap();
        assert!((p[0] - 3.01 / 3.02).abs() < 1e-12);
        assert!((p[1] - 0.01 / 3.02).abs() < 1e-12);
    }

    #[test]
    fn lexical_without_matches_is_uniform() {
        let p = predict(
            "bolo receita",
            &labels(&["esporte", "mercado", "comida"]),
            &HypothesisTemplate::topic_default(),
            &sports_lexicon(),
            true,
        )
        .unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_label_normalizes_to_one() {
        let p = predict(
            "gol",
            &labels(&["esporte"]),
            &HypothesisTemplate::topic_default(),
            &sports_lexicon(),
            true,
        )
        .unwrap();
        assert_eq!(p, vec![1.0]);
    }

    #[test]
    fn raw_mode_stays_in_range() {
        let p = predict(
            "gol jogo bolo",
            &labels(&["esporte", "mercado"]),
            &HypothesisTemplate::topic_default(),
            &sports_lexicon(),
            false,
        )
        .unwrap();
        assert!((p[0] - 2.01 / 3.01).abs() < 1e-12);
        assert!((p[1] - 0.01 / 3.01).abs() < 1e-12);
    }

    #[test]
    fn empty_premise_rejected() {
        assert!(predict(
            "  ",
            &labels(&["a"]),
            &HypothesisTemplate::topic_default(),
            &sports_lexicon(),
            true
        )
        .is_err());
    }

    #[test]
    fn out_of_range_backend_output_is_a_contract_violation() {
        struct Broken;
        impl EntailmentBackend for Broken {
            fn score(&self, _: &str, l: &LabelSet, _: &[String], _: bool) -> Result<Vec<f64>> {
                Ok(vec![1.5; l.len()])
            }
        }
        let err = predict("x", &labels(&["a"]), &HypothesisTemplate::topic_default(), &Broken, false)
            .unwrap_err();
        assert!(matches!(err, Error::ContractViolation(_)));
    }

    #[test]
    fn topic_premise_join() {
        let topic = |terms: Vec<(&str, f64)>| Topic {
            index: 0,
            terms: terms.into_iter().map(|(t, w)| (t.to_string(), w)).collect(),
            centroid: Embedding::normalized(vec![1.0, 0.0]).unwrap(),
            size: 10,
        };
        assert_eq!(serialize_topic_premise(&topic(vec![("gol", 0.9), ("jogo", 0.5)])), "gol, jogo");
        assert_eq!(serialize_topic_premise(&topic(vec![("gol", 0.9)])), "gol");
        let many: Vec<(String, f64)> = (0..20).map(|i| (format!("t{i}"), 20.0 - i as f64)).collect();
        let t = Topic {
            terms: many,
            ..topic(vec![])
        };
        assert_eq!(serialize_topic_premise(&t).matches(", ").count(), 19);
    }

    #[test]
    fn table_invariants() {
        assert!(EntailmentTable::new(vec![vec![0.5, 0.5], vec![0.2, 0.8]], true).is_ok());
        assert!(EntailmentTable::new(vec![vec![0.5, 0.6]], true).is_err());
        assert!(EntailmentTable::new(vec![vec![0.5, 0.6]], false).is_ok());
        assert!(EntailmentTable::new(vec![vec![1.2]], false).is_err());
        assert!(EntailmentTable::new(vec![vec![0.5], vec![0.2, 0.8]], false).is_err());
        assert!(EntailmentTable::new(vec![], false).is_err());
    }
}
