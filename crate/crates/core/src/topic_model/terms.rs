//! Class-based TF-IDF over n-gram counts.
//!
//! Each class (a cluster's documents taken together) is treated as a single
//! document. The weight of term `t` in class `c` is
//!
//! ```text
//! W(t, c) = tf(t, c) * ln(1 + A / f(t))
//! ```
//!
//! where `tf(t, c)` counts `t` in class `c`, `f(t)` counts `t` over all
//! classes, and `A` is the mean number of terms per class.

use std::collections::{BTreeMap, HashSet};

use crate::error::{Error, Result};
use crate::text;

use super::TopicModelConfig;

pub type TermCounts = BTreeMap<String, u64>;

/// Lowercase word tokens, stopwords removed, then n-grams over the range.
pub fn document_terms(doc: &str, config: &TopicModelConfig) -> Vec<String> {
    let stop: HashSet<String> = config
        .stopwords
        .iter()
        .flatten()
        .map(|w| w.to_lowercase())
        .collect();
    let tokens: Vec<String> = text::words(doc)
        .into_iter()
        .filter(|w| !stop.contains(w))
        .collect();
    let (lo, hi) = config.n_grams_range;
    text::ngrams(&tokens, lo, hi)
}

pub fn class_counts<'a>(docs: impl IntoIterator<Item = &'a str>, config: &TopicModelConfig) -> TermCounts {
    let mut counts = TermCounts::new();
    for doc in docs {
        for term in document_terms(doc, config) {
            *counts.entry(term).or_default() += 1;
        }
    }
    counts
}

/// Top-`q` terms of every class by c-TF-IDF weight, descending, ties broken
/// lexicographically. Classes with no terms get an empty list.
pub fn ctfidf_top_terms(classes: &[TermCounts], q: usize) -> Vec<Vec<(String, f64)>> {
    let total: u64 = classes.iter().flat_map(|c| c.values()).sum();
    if classes.is_empty() || total == 0 {
        return vec![Vec::new(); classes.len()];
    }
    let avg = total as f64 / classes.len() as f64;
    let mut overall: BTreeMap<&str, u64> = BTreeMap::new();
    for class in classes {
        for (t, n) in class {
            *overall.entry(t.as_str()).or_default() += n;
        }
    }
    classes
        .iter()
        .map(|class| {
            let mut weighted: Vec<(String, f64)> = class
                .iter()
                .map(|(t, &tf)| {
                    let f = overall[t.as_str()] as f64;
                    (t.clone(), tf as f64 * (1.0 + avg / f).ln())
                })
                .collect();
            weighted.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
            weighted.truncate(q);
            weighted
        })
        .collect()
}

/// Terms characterizing `cluster_docs` against the rest of `all_docs`.
///
/// The corpus is split into two classes, the cluster and its complement (the
/// complement is dropped when empty). `cluster_docs` must be a sub-multiset of
/// `all_docs`.
pub fn extract_topic_terms(
    cluster_docs: &[&str],
    all_docs: &[&str],
    config: &TopicModelConfig,
) -> Result<Vec<(String, f64)>> {
    if cluster_docs.is_empty() {
        return Err(Error::InvalidConfig("cluster has no documents".into()));
    }
    let cluster = class_counts(cluster_docs.iter().copied(), config);
    if cluster.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let mut rest = class_counts(all_docs.iter().copied(), config);
    for (t, n) in &cluster {
        let entry = rest.get_mut(t).filter(|m| **m >= *n).ok_or_else(|| {
            Error::InvalidConfig("cluster documents are not a subset of the corpus".into())
        })?;
        *entry -= n;
    }
    rest.retain(|_, n| *n > 0);
    let classes = if rest.is_empty() {
        vec![cluster]
    } else {
        vec![cluster, rest]
    };
    Ok(ctfidf_top_terms(&classes, config.top_n_words)
        .into_iter()
        .next()
        .unwrap_or_default())
}
