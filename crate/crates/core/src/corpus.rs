//! Document collections: ingestion, label filtering and stratified fold plans.
//!
//! Gold labels ride along on [`Document`] for evaluation only. Training code
//! takes an [`UnlabeledCorpus`], a borrowed view that exposes ids and texts
//! and nothing else.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_label: Option<String>,
}

impl Document {
    /// Fails when `text` is empty after trimming whitespace.
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        gold_label: Option<String>,
    ) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::MalformedRecord {
                location: format!("document {id:?}"),
                reason: "text is empty".into(),
            });
        }
        Ok(Self {
            id,
            text,
            gold_label,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn gold_label(&self) -> Option<&str> {
        self.gold_label.as_deref()
    }
}

/// Ordered, duplicate-free list of label names. Order is the tie-break order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet {
    labels: Vec<String>,
}

impl LabelSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidLabelSet("label set is empty".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidLabelSet(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }
}

impl TryFrom<Vec<String>> for LabelSet {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        LabelSet::new(labels)
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(set: LabelSet) -> Self {
        set.labels
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<Document>,
}

impl Corpus {
    /// Fails on duplicate ids.
    pub fn new(docs: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(docs.len());
        for d in &docs {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::DuplicateId(d.id.clone()));
            }
        }
        Ok(Self { docs })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.docs.iter()
    }

    /// The label-free view consumed by training.
    pub fn unlabeled(&self) -> UnlabeledCorpus<'_> {
        UnlabeledCorpus {
            docs: self.docs.iter().collect(),
        }
    }

    /// Distinct gold labels in first-appearance order.
    pub fn gold_labels_present(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.docs
            .iter()
            .filter_map(|d| d.gold_label.as_deref())
            .filter(|l| seen.insert(*l))
            .map(str::to_string)
            .collect()
    }
}

/// Borrowed id/text pair with no access to the gold label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextRef<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

#[derive(Debug, Clone)]
pub struct UnlabeledCorpus<'a> {
    docs: Vec<&'a Document>,
}

impl<'a> UnlabeledCorpus<'a> {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<TextRef<'a>> {
        self.docs.get(index).map(|d| TextRef {
            id: &d.id,
            text: &d.text,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = TextRef<'a>> + '_ {
        self.docs.iter().map(|d| TextRef {
            id: &d.id,
            text: &d.text,
        })
    }

    pub fn to_vec(&self) -> Vec<TextRef<'a>> {
        self.iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::InvalidConfig(format!("unknown corpus format {other:?}"))),
        }
    }
}

const ID_FIELD: &str = "id";
const LABEL_FIELD: &str = "label";

/// Reads a corpus file. Each document's text is its `text_fields` values joined
/// by a single space; the optional `label` field becomes the gold label.
pub fn load_corpus(path: &Path, format: CorpusFormat, text_fields: &[String]) -> Result<Corpus> {
    if text_fields.is_empty() {
        return Err(Error::InvalidConfig("no text fields given".into()));
    }
    let docs = match format {
        CorpusFormat::Jsonl => read_jsonl(path, text_fields)?,
        CorpusFormat::Csv => read_csv(path, text_fields)?,
    };
    Corpus::new(docs)
}

fn read_jsonl(path: &Path, text_fields: &[String]) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("{}:{}", path.display(), lineno + 1);
        let malformed = |reason: String| Error::MalformedRecord {
            location: location.clone(),
            reason,
        };
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed("record is not a JSON object".into()))?;
        let field = |name: &str| -> Result<Option<String>> {
            match obj.get(name) {
                None | Some(serde_json::Value::Null) => Ok(None),
                Some(serde_json::Value::String(s)) => Ok(Some(s.clone())),
                Some(serde_json::Value::Number(n)) => Ok(Some(n.to_string())),
                Some(_) => Err(malformed(format!("field {name:?} is not a string"))),
            }
        };
        let id = field(ID_FIELD)?.ok_or_else(|| malformed("missing field \"id\"".into()))?;
        let mut parts = Vec::with_capacity(text_fields.len());
        for f in text_fields {
            parts.push(field(f)?.ok_or_else(|| malformed(format!("missing field {f:?}")))?);
        }
        let label = field(LABEL_FIELD)?;
        docs.push(
            Document::new(id, parts.join(" "), label).map_err(|e| malformed(e.to_string()))?,
        );
    }
    Ok(docs)
}

fn read_csv(path: &Path, text_fields: &[String]) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();
    // an empty file has no header row and no records
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let column = |name: &str| headers.iter().position(|h| h == name);
    let missing_column = |name: &str| Error::MalformedRecord {
        location: format!("{}:1", path.display()),
        reason: format!("header has no column {name:?}"),
    };
    let id_col = column(ID_FIELD).ok_or_else(|| missing_column(ID_FIELD))?;
    let text_cols = text_fields
        .iter()
        .map(|f| column(f).ok_or_else(|| missing_column(f)))
        .collect::<Result<Vec<_>>>()?;
    let label_col = column(LABEL_FIELD);

    let mut docs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // header is line 1
        let location = format!("{}: record {}", path.display(), i + 1);
        let record = record.map_err(|e| Error::MalformedRecord {
            location: location.clone(),
            reason: e.to_string(),
        })?;
        let get = |col: usize| -> Result<&str> {
            record.get(col).ok_or_else(|| Error::MalformedRecord {
                location: location.clone(),
                reason: format!("missing column {}", headers.get(col).unwrap_or("?")),
            })
        };
        let id = get(id_col)?.to_string();
        let text = text_cols
            .iter()
            .map(|&c| get(c))
            .collect::<Result<Vec<_>>>()?
            .join(" ");
        let label = match label_col {
            Some(c) => Some(get(c)?.to_string()).filter(|l| !l.is_empty()),
            None => None,
        };
        docs.push(Document::new(id, text, label).map_err(|e| Error::MalformedRecord {
            location: location.clone(),
            reason: e.to_string(),
        })?);
    }
    Ok(docs)
}

/// Drops documents whose gold label is not in `keep`. Unlabeled documents stay.
pub fn filter_labels(corpus: &Corpus, keep: &LabelSet) -> Corpus {
    Corpus {
        docs: corpus
            .docs
            .iter()
            .filter(|d| d.gold_label.as_deref().is_none_or(|l| keep.contains(l)))
            .cloned()
            .collect(),
    }
}

/// Assignment of every document to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    k: usize,
    assignments: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignments.get(id).copied()
    }

    pub fn assignments(&self) -> &BTreeMap<String, usize> {
        &self.assignments
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified split: each class is shuffled with a seeded RNG, then dealt
/// round-robin starting at fold 0, so remainders land on the lowest folds.
pub fn stratified_kfold(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidFolds(format!("k must be at least 2, got {k}")));
    }
    let mut by_class: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for d in &corpus.docs {
        let label = d.gold_label.as_deref().ok_or_else(|| {
            Error::InvalidFolds(format!("document {:?} has no gold label", d.id))
        })?;
        by_class.entry(label).or_default().push(&d.id);
    }
    if by_class.is_empty() {
        return Err(Error::InvalidFolds("corpus has no labeled documents".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = BTreeMap::new();
    for ids in by_class.values_mut() {
        ids.shuffle(&mut rng);
        for (i, id) in ids.iter().enumerate() {
            assignments.insert((*id).to_string(), i % k);
        }
    }
    Ok(FoldPlan { k, assignments })
}

/// Sub-corpus of the documents assigned to any fold in `folds`, in corpus order.
pub fn select_folds(corpus: &Corpus, plan: &FoldPlan, folds: &BTreeSet<usize>) -> Result<Corpus> {
    if let Some(&bad) = folds.iter().find(|&&f| f >= plan.k) {
        return Err(Error::InvalidFolds(format!(
            "fold index {bad} out of range for k = {}",
            plan.k
        )));
    }
    let mut docs = Vec::new();
    for d in &corpus.docs {
        let fold = plan.fold_of(&d.id).ok_or_else(|| {
            Error::InvalidFolds(format!("document {:?} is not in the fold plan", d.id))
        })?;
        if folds.contains(&fold) {
            docs.push(d.clone());
        }
    }
    Ok(Corpus { docs })
}
