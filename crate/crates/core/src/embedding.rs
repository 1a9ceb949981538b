//! Dense document vectors behind a pluggable [`Embedder`].
//!
//! Three backends:
//!
//! * `hashing`: signed feature hashing of lowercase word unigrams. Every token
//!   of the input contributes, however long the document is.
//! * `remote`: the sidecar's `/embed` endpoint.
//! * `precomputed`: id → vector lookups from a JSONL file of `{id, vector}`.
//!
//! Every backend returns L2-normalized vectors of the configured dimension.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::TextRef;
use crate::error::{Error, Result};
use crate::remote::{EmbedRequest, RetryPolicy, SidecarClient};
use crate::text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    /// Fails on an empty vector or any non-finite entry.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ContractViolation("embedding has no entries".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ContractViolation("embedding has a non-finite entry".into()));
        }
        Ok(Self { values })
    }

    /// Rescales to unit L2 norm. Fails on the zero vector.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let mut e = Self::new(values)?;
        let norm = e.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        e.values.iter_mut().for_each(|v| *v /= norm);
        Ok(e)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn default_max_in_flight() -> usize {
    4
}

fn default_batch_size() -> usize {
    32
}

fn default_timeout_secs() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderSpec {
    Hashing {
        dim: usize,
    },
    Remote {
        endpoint: String,
        dim: usize,
        #[serde(default = "default_max_in_flight")]
        max_in_flight: usize,
        #[serde(default = "default_batch_size")]
        batch_size: usize,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default)]
        retry: RetryPolicy,
    },
    Precomputed {
        path: PathBuf,
        dim: usize,
    },
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::Hashing { dim: 256 }
    }
}

impl EmbedderSpec {
    pub fn dim(&self) -> usize {
        match self {
            EmbedderSpec::Hashing { dim }
            | EmbedderSpec::Remote { dim, .. }
            | EmbedderSpec::Precomputed { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() < 2 {
            return Err(Error::InvalidConfig(format!(
                "embedding dim must be at least 2, got {}",
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn Embedder>> {
        self.validate()?;
        Ok(match self {
            EmbedderSpec::Hashing { dim } => Box::new(HashingEmbedder::new(*dim)),
            EmbedderSpec::Remote {
                endpoint,
                dim,
                max_in_flight,
                batch_size,
                timeout_secs,
                retry,
            } => Box::new(RemoteEmbedder {
                client: SidecarClient::new(
                    endpoint,
                    *max_in_flight,
                    Duration::from_secs(*timeout_secs),
                    *retry,
                ),
                dim: *dim,
                max_in_flight: (*max_in_flight).max(1),
                batch_size: (*batch_size).max(1),
            }),
            EmbedderSpec::Precomputed { path, dim } => {
                Box::new(PrecomputedEmbedder::from_path(path, *dim)?)
            }
        })
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// One embedding per input, order preserved.
    fn embed(&self, items: &[TextRef<'_>]) -> Result<Vec<Embedding>>;
}

/// Embeds `items` with a backend built from `spec`.
pub fn embed(items: &[TextRef<'_>], spec: &EmbedderSpec) -> Result<Vec<Embedding>> {
    spec.build()?.embed(items)
}

#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    pub fn embed_text(&self, text: &str) -> Result<Embedding> {
        let mut values = vec![0.0; self.dim];
        let tokens = text::words(text);
        let mut add = |feature: &str| {
            let h = fnv1a(feature.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            values[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        };
        if tokens.is_empty() {
            // no word characters at all: hash the raw text as one feature
            add(text.trim());
        } else {
            tokens.iter().for_each(|t| add(t));
        }
        match Embedding::normalized(values) {
            Err(Error::ZeroVector) => {
                // signed collisions cancelled out; fall back to the unsigned histogram
                let mut values = vec![0.0; self.dim];
                for t in &tokens {
                    values[(fnv1a(t.as_bytes()) % self.dim as u64) as usize] += 1.0;
                }
                Embedding::normalized(values)
            }
            other => other,
        }
    }
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, items: &[TextRef<'_>]) -> Result<Vec<Embedding>> {
        items.iter().map(|t| self.embed_text(t.text)).collect()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

#[derive(Debug)]
pub struct RemoteEmbedder {
    client: SidecarClient,
    dim: usize,
    max_in_flight: usize,
    batch_size: usize,
}

impl RemoteEmbedder {
    fn embed_batch(&self, texts: Vec<String>) -> Result<Vec<Embedding>> {
        let n = texts.len();
        let resp = self.client.embed(&EmbedRequest { texts })?;
        if resp.vectors.len() != n {
            return Err(Error::ContractViolation(format!(
                "/embed returned {} vectors for {n} texts",
                resp.vectors.len()
            )));
        }
        if resp.dim != self.dim {
            return Err(Error::ContractViolation(format!(
                "/embed reports dim {}, expected {}",
                resp.dim, self.dim
            )));
        }
        resp.vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(Error::ContractViolation(format!(
                        "/embed vector of length {}, expected {}",
                        v.len(),
                        self.dim
                    )));
                }
                Embedding::normalized(v)
            })
            .collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, items: &[TextRef<'_>]) -> Result<Vec<Embedding>> {
        let batches: Vec<&[TextRef<'_>]> = items.chunks(self.batch_size).collect();
        let results: Vec<Mutex<Option<Result<Vec<Embedding>>>>> =
            batches.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.max_in_flight.min(batches.len());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(batch) = batches.get(i) else { break };
                    let texts = batch.iter().map(|t| t.text.to_string()).collect();
                    let out = self.embed_batch(texts);
                    *results[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(out);
                });
            }
        });
        let mut out = Vec::with_capacity(items.len());
        for slot in results {
            let batch = slot
                .into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .expect("every batch is processed");
            out.extend(batch?);
        }
        Ok(out)
    }
}

#[derive(Debug, Deserialize)]
struct PrecomputedRecord {
    id: String,
    vector: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PrecomputedEmbedder {
    dim: usize,
    vectors: HashMap<String, Embedding>,
}

impl PrecomputedEmbedder {
    pub fn from_path(path: &Path, dim: usize) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = HashMap::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| Error::MalformedRecord {
                location: format!("{}:{}", path.display(), lineno + 1),
                reason,
            };
            let rec: PrecomputedRecord =
                serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            if rec.vector.len() != dim {
                return Err(malformed(format!(
                    "vector of length {}, expected {dim}",
                    rec.vector.len()
                )));
            }
            let emb = Embedding::normalized(rec.vector).map_err(|e| malformed(e.to_string()))?;
            if vectors.insert(rec.id.clone(), emb).is_some() {
                return Err(Error::DuplicateId(rec.id));
            }
        }
        Ok(Self { dim, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl Embedder for PrecomputedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, items: &[TextRef<'_>]) -> Result<Vec<Embedding>> {
        items
            .iter()
            .map(|t| {
                self.vectors
                    .get(t.id)
                    .cloned()
                    .ok_or_else(|| Error::MissingVector(t.id.to_string()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn t<'a>(id: &'a str, text: &'a str) -> TextRef<'a> {
        TextRef { id, text }
    }

    #[test]
    fn cosine_cases() {
        let v = Embedding::new(vec![0.3, -0.4]).unwrap();
        assert!((cosine_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        let x = Embedding::new(vec![1.0, 0.0]).unwrap();
        let y = Embedding::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(cosine_similarity(&x, &y).unwrap(), 0.0);
        let h = 1.0 / 2f64.sqrt();
        let d = Embedding::new(vec![h, h]).unwrap();
        assert!((cosine_similarity(&x, &d).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((cosine_similarity(&x, &d).unwrap() - h).abs() < 1e-6);
        assert_eq!(
            cosine_similarity(&x, &d).unwrap(),
            cosine_similarity(&d, &x).unwrap()
        );
    }

    #[test]
    fn cosine_errors() {
        let a = Embedding::new(vec![1.0, 0.0]).unwrap();
        let b = Embedding::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            cosine_similarity(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        let z = Embedding::new(vec![0.0, 0.0]).unwrap();
        assert!(matches!(cosine_similarity(&a, &z), Err(Error::ZeroVector)));
    }

    #[test]
    fn hashing_is_deterministic_and_normalized() {
        let e = HashingEmbedder::new(64);
        let items = [t("a", "gol jogo campeonato"), t("b", "gol jogo campeonato")];
        let out = e.embed(&items).unwrap();
        assert_eq!(out[0], out[1]);
        for v in &out {
            assert_eq!(v.dim(), 64);
            assert!((v.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn hashing_disjoint_vocabularies_are_dissimilar() {
        let e = HashingEmbedder::new(64);
        let a = e
            .embed_text("gol jogo campeonato time técnico estádio torcida partida")
            .unwrap();
        let b = e
            .embed_text("juros banco inflação dólar bolsa mercado crédito ações")
            .unwrap();
        let cos = cosine_similarity(&a, &b).unwrap();
        assert!(cos < 0.3, "cosine {cos}");
    }

    #[test]
    fn hashing_reads_every_token() {
        let e = HashingEmbedder::new(64);
        let base: String = (0..5_000).map(|i| format!("palavra{i} ")).collect();
        let longer = format!("{base} juros");
        assert_ne!(e.embed_text(&base).unwrap(), e.embed_text(&longer).unwrap());
    }

    #[test]
    fn hashing_handles_text_without_words() {
        let e = HashingEmbedder::new(8);
        let v = e.embed_text("!!! ???").unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spec_validation() {
        assert!(EmbedderSpec::Hashing { dim: 1 }.build().is_err());
        let spec: EmbedderSpec =
            serde_json::from_str(r#"{"kind":"remote","endpoint":"http://x","dim":8}"#).unwrap();
        assert!(matches!(spec, EmbedderSpec::Remote { max_in_flight: 4, batch_size: 32, .. }));
    }

    #[test]
    fn precomputed_lookup() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"d1","vector":[3.0,4.0]}}"#).unwrap();
        writeln!(f, r#"{{"id":"d2","vector":[0.0,2.0]}}"#).unwrap();
        let spec = EmbedderSpec::Precomputed {
            path: f.path().to_path_buf(),
            dim: 2,
        };
        let out = embed(&[t("d2", "x"), t("d1", "y")], &spec).unwrap();
        assert_eq!(out[0].values(), &[0.0, 1.0]);
        assert!((out[1].values()[0] - 0.6).abs() < 1e-12);
        assert!(matches!(
            embed(&[t("nope", "x")], &spec),
            Err(Error::MissingVector(id)) if id == "nope"
        ));
    }

    #[test]
    fn precomputed_rejects_wrong_length() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"d1","vector":[1.0,0.0,0.0]}}"#).unwrap();
        assert!(PrecomputedEmbedder::from_path(f.path(), 2).is_err());
    }
}
