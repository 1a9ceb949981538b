//! Seeded synthetic corpora with one disjoint vocabulary per label.
//!
//! Each document is an optional prefix of filler words shared by every class
//! followed by words drawn from its class vocabulary. A matching lexicon maps
//! every class word to its label, so the lexical backend recognizes the
//! classes exactly.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{Corpus, Document, LabelSet};
use crate::entailment::LexicalBackend;
use crate::error::{Error, Result};

const ESPORTE: &[&str] = &[
    "gol", "jogo", "campeonato", "time", "técnico", "estádio", "torcida", "partida", "atacante",
    "zagueiro", "goleiro", "clube", "rodada", "artilheiro", "treino", "escalação", "placar",
    "árbitro", "pênalti", "escanteio", "torneio", "seleção", "copa", "futebol",
];
const MERCADO: &[&str] = &[
    "juros", "banco", "inflação", "dólar", "bolsa", "crédito", "ações", "investidor", "lucro",
    "receita", "dívida", "câmbio", "tributo", "empresa", "varejo", "indústria", "balanço",
    "dividendos", "emprego", "salário", "exportação", "petróleo", "commodities", "economia",
];
const TECNOLOGIA: &[&str] = &[
    "software", "aplicativo", "internet", "celular", "computador", "dados", "algoritmo",
    "startup", "robô", "chip", "processador", "rede", "nuvem", "servidor", "programa",
    "digital", "tela", "bateria", "sensor", "satélite", "código", "plataforma", "usuário",
    "hacker",
];
const FILLER: &[&str] = &[
    "segundo", "ontem", "semana", "ainda", "também", "sobre", "depois", "antes", "durante",
    "nesta", "quarta", "sexta", "anúncio", "reportagem", "afirmou", "disse", "cidade",
    "país", "governo", "pessoas",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticOptions {
    pub docs_per_class: usize,
    /// Shared filler words at the start of each document.
    pub filler_tokens: usize,
    /// Class words after the filler.
    pub class_tokens: usize,
    pub seed: u64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            docs_per_class: 100,
            filler_tokens: 0,
            class_tokens: 30,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub labels: LabelSet,
    /// Word → label name.
    pub lexicon: BTreeMap<String, String>,
}

impl SyntheticCorpus {
    pub fn backend(&self) -> LexicalBackend {
        LexicalBackend::new(self.lexicon.iter().map(|(k, v)| (k.as_str(), v.clone())))
    }

    pub fn class_vocabulary(label: &str) -> Option<&'static [&'static str]> {
        CLASSES.iter().find(|(l, _)| *l == label).map(|(_, v)| *v)
    }

    /// Writes the corpus as JSONL with `id`, `text` and `label` fields.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            id: &'a str,
            text: &'a str,
            label: Option<&'a str>,
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for d in self.corpus.iter() {
            let row = Row {
                id: d.id(),
                text: d.text(),
                label: d.gold_label(),
            };
            writeln!(f, "{}", serde_json::to_string(&row)?).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn write_lexicon(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.lexicon)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

const CLASSES: [(&str, &[&str]); 3] =
    [("esporte", ESPORTE), ("mercado", MERCADO), ("tecnologia", TECNOLOGIA)];

/// Documents are interleaved by class (`esporte-0`, `mercado-0`, ...).
pub fn three_topic_corpus(options: SyntheticOptions) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut docs = Vec::with_capacity(options.docs_per_class * CLASSES.len());
    for i in 0..options.docs_per_class {
        for (label, vocab) in CLASSES {
            let mut words: Vec<&str> = Vec::with_capacity(options.filler_tokens + options.class_tokens);
            words.extend((0..options.filler_tokens).map(|_| *FILLER.choose(&mut rng).expect("non-empty")));
            words.extend((0..options.class_tokens).map(|_| *vocab.choose(&mut rng).expect("non-empty")));
            docs.push(
                Document::new(format!("{label}-{i}"), words.join(" "), Some(label.to_string()))
                    .expect("generated text is non-empty"),
            );
        }
    }
    let lexicon = CLASSES
        .iter()
        .flat_map(|(label, vocab)| vocab.iter().map(move |w| (w.to_string(), label.to_string())))
        .collect();
    SyntheticCorpus {
        corpus: Corpus::new(docs).expect("generated ids are unique"),
        labels: LabelSet::new(CLASSES.map(|(l, _)| l)).expect("distinct labels"),
        lexicon,
    }
}
