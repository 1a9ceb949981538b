mod common;

use proptest::prelude::*;
use zerotopic::corpus::TextRef;
use zerotopic::embedding::{cosine_similarity, Embedder, EmbedderSpec, HashingEmbedder};
use zerotopic::synthetic::SyntheticCorpus;
use zerotopic::topic_model::{fit, topic_encoder, FittedTopicModel, TopicModelConfig};

fn hashing() -> EmbedderSpec {
    EmbedderSpec::Hashing { dim: 256 }
}

fn fit_fixture(s: &SyntheticCorpus) -> FittedTopicModel {
    fit(&s.corpus.unlabeled(), &hashing(), &TopicModelConfig::default()).unwrap()
}

/// Mean pairwise cosine distance within and across gold classes, by brute force.
fn class_distances(s: &SyntheticCorpus) -> (f64, f64) {
    let docs = s.corpus.unlabeled().to_vec();
    let e = HashingEmbedder::new(256).embed(&docs).unwrap();
    let gold: Vec<&str> = s.corpus.iter().map(|d| d.gold_label().unwrap()).collect();
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            let d = 1.0 - cosine_similarity(&e[i], &e[j]).unwrap();
            if gold[i] == gold[j] {
                intra += d;
                ni += 1;
            } else {
                inter += d;
                nx += 1;
            }
        }
    }
    (intra / ni as f64, inter / nx as f64)
}

#[test]
fn fixture_geometry_brackets_the_threshold() {
    let t = TopicModelConfig::default().distance_threshold;
    for s in [common::short_fixture(), common::long_fixture()] {
        let (intra, inter) = class_distances(&s);
        assert!(intra < t && t < inter, "intra {intra:.3} threshold {t} inter {inter:.3}");
    }
}

#[test]
fn three_vocabularies_give_three_topics() {
    for s in [common::short_fixture(), common::long_fixture()] {
        let m = fit_fixture(&s);
        assert_eq!(m.num_topics(), 3);
        let total: usize = m.topics().iter().map(|t| t.size).sum();
        assert_eq!(total + m.outlier_count(), s.corpus.len());
        for t in m.topics() {
            assert!((90..=110).contains(&t.size), "size {}", t.size);
            assert!(t.terms.len() <= 20);
            assert!(t.terms.windows(2).all(|w| w[0].1 >= w[1].1));
            assert!((t.centroid.norm() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn topic_terms_come_from_one_vocabulary() {
    let s = common::short_fixture();
    let m = fit_fixture(&s);
    for t in m.topics() {
        let (head, _) = &t.terms[0];
        let label = &s.lexicon[head];
        let vocab = SyntheticCorpus::class_vocabulary(label).unwrap();
        for (term, _) in &t.terms {
            assert!(
                term.split(' ').all(|w| vocab.contains(&w)),
                "{term} not in {label} vocabulary"
            );
        }
    }
}

#[test]
fn encoder_agrees_with_clusters_on_training_data() {
    let s = common::long_fixture();
    let m = fit_fixture(&s);
    let encoder = m.encoder().unwrap();
    let omegas = encoder.encode_batch(&s.corpus.unlabeled().to_vec()).unwrap();
    // map each topic to the gold class of its top term
    let topic_label: Vec<&String> = m.topics().iter().map(|t| &s.lexicon[&t.terms[0].0]).collect();
    let agree = s
        .corpus
        .iter()
        .zip(&omegas)
        .filter(|(d, o)| topic_label[o.argmax()] == d.gold_label().unwrap())
        .count();
    assert!(agree as f64 >= 0.9 * s.corpus.len() as f64, "{agree}/{}", s.corpus.len());
}

#[test]
fn topic_text_encodes_to_its_topic() {
    let s = common::short_fixture();
    let m = fit_fixture(&s);
    for (k, t) in m.topics().iter().enumerate() {
        let text = t.terms.iter().filter(|(w, _)| !w.contains(' ')).map(|(w, _)| w.as_str()).collect::<Vec<_>>().join(" ");
        let omega = topic_encoder(TextRef { id: "probe", text: &text }, &m).unwrap();
        assert_eq!(omega.argmax(), k);
        assert!(!omega.is_fallback());
    }
}

#[test]
fn refit_is_bit_identical() {
    let s = common::short_fixture();
    let a = fit_fixture(&s).to_json().unwrap();
    let b = fit_fixture(&s).to_json().unwrap();
    assert_eq!(a, b);
    assert_eq!(FittedTopicModel::from_json(&a).unwrap().to_json().unwrap(), a);
}

#[test]
fn outliers_are_counted() {
    let mut s = common::short_fixture();
    let mut docs = s.corpus.documents().to_vec();
    docs.push(zerotopic::corpus::Document::new("odd", "bolo receita farinha açúcar forno", None).unwrap());
    s.corpus = zerotopic::corpus::Corpus::new(docs).unwrap();
    let m = fit_fixture(&s);
    assert_eq!(m.num_topics(), 3);
    assert_eq!(m.outlier_count(), 1);
    let total: usize = m.topics().iter().map(|t| t.size).sum();
    assert_eq!(total + 1, s.corpus.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributions_are_normalized(words in proptest::collection::vec("[a-zçãé]{1,8}", 1..30)) {
        static MODEL: std::sync::OnceLock<FittedTopicModel> = std::sync::OnceLock::new();
        let m = MODEL.get_or_init(|| fit_fixture(&common::short_fixture()));
        let text = words.join(" ");
        let omega = topic_encoder(TextRef { id: "p", text: &text }, m).unwrap();
        prop_assert_eq!(omega.len(), m.num_topics());
        prop_assert!(omega.weights().iter().all(|w| *w >= 0.0 && *w <= 1.0));
        prop_assert!((omega.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
