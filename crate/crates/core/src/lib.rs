//! Zero-shot text classification through topic modeling and textual entailment.
//!
//! Training clusters an unlabeled corpus into topics, describes each topic by
//! its most characteristic n-grams, and asks an entailment backend how well
//! each topic's term list supports a hypothesis for every candidate label.
//! Prediction encodes a document as a distribution over topics and mixes the
//! per-topic label probabilities with those weights.
//!
//! ```no_run
//! use zerotopic::corpus::{load_corpus, CorpusFormat, LabelSet};
//! use zerotopic::entailment::LexicalBackend;
//! use zerotopic::zeroshot::{self, ZeroShotConfig};
//!
//! # fn main() -> zerotopic::Result<()> {
//! let corpus = load_corpus("news.jsonl".as_ref(), CorpusFormat::Jsonl, &["title".into(), "content".into()])?;
//! let labels = LabelSet::new(["esporte", "mercado"])?;
//! let backend = LexicalBackend::from_path("lexicon.json".as_ref())?;
//! let model = zeroshot::train(&corpus.unlabeled(), &labels, &ZeroShotConfig::default(), &backend)?;
//! for doc in corpus.unlabeled().iter() {
//!     println!("{} {}", doc.id, zeroshot::predict(&model, doc)?.label);
//! }
//! # Ok(())
//! # }
//! ```

pub mod corpus;
pub mod embedding;
pub mod entailment;
pub mod error;
pub mod evaluation;
pub mod remote;
pub mod synthetic;
mod text;
pub mod topic_model;
pub mod zeroshot;

pub use error::{Error, Result};
