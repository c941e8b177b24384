//! Passage retrieval and re-ranking over a local corpus, plus
//! instruction-similarity search for few-shot demonstration selection.
//!
//! Scoring is BM25 with k1 = 1.2, b = 0.75 over a deterministic tokenizer
//! (Unicode lowercase, alphanumeric word segmentation, no stemming, no
//! stopwords). Results order by descending score with ties broken by
//! ascending doc_id, so rankings are reproducible across runs and platforms.

use crate::gateway::{Gateway, Message};
use crate::types::{Passage, SamplingParams};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
/// Candidate pool size for support retrieval.
pub const DEFAULT_K_RETRIEVE: usize = 20;
/// Supports handed to the claim verifier.
pub const DEFAULT_M_SUPPORTS: usize = 10;
/// Demonstrations selected for few-shot prompts.
pub const DEFAULT_K_DEMOS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate doc_id {0}")]
    DuplicateDocId(String),
    #[error("query instruction {0} must be excluded from the seed set")]
    QueryInSeedSet(String),
    #[error("index file {path}: {message}")]
    BadIndexFile { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Lowercased alphanumeric word segmentation; deterministic, language-neutral.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub total_terms: u64,
    pub avg_doc_len: f64,
}

/// Passages plus token statistics, ready for indexing.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub passages: Vec<Passage>,
    pub stats: CorpusStats,
}

impl Corpus {
    pub fn from_passages(passages: Vec<Passage>) -> Result<Self, RetrievalError> {
        if passages.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let mut seen = std::collections::HashSet::new();
        let mut total_terms = 0u64;
        for p in &passages {
            if !seen.insert(p.doc_id.as_str()) {
                return Err(RetrievalError::DuplicateDocId(p.doc_id.clone()));
            }
            total_terms += tokenize(&p.text).len() as u64;
        }
        let doc_count = passages.len();
        let stats = CorpusStats {
            doc_count,
            total_terms,
            avg_doc_len: total_terms as f64 / doc_count as f64,
        };
        Ok(Corpus { passages, stats })
    }

    /// Digest over doc ids, titles, and texts; embedded in built indexes.
    pub fn digest(&self) -> String {
        let fields: Vec<String> = self
            .passages
            .iter()
            .map(|p| format!("{}\u{1f}{}\u{1f}{}", p.doc_id, p.title, p.text))
            .collect();
        let refs: Vec<&str> = fields.iter().map(|s| s.as_str()).collect();
        crate::digest::tagged_digest("corpus.v1", &refs)
    }
}

/// Raw document fields kept inside the index file. Plain fields only so the
/// binary encoding stays self-consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredDoc {
    doc_id: String,
    title: String,
    text: String,
}

impl StoredDoc {
    fn to_passage(&self) -> Passage {
        Passage {
            doc_id: self.doc_id.clone(),
            title: self.title.clone(),
            text: self.text.clone(),
            retrieval_score: 0.0,
            rerank_score: None,
        }
    }
}

/// Immutable inverted index over a corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LexicalIndex {
    /// term -> (doc ordinal, term frequency), ordinals ascending.
    postings: BTreeMap<String, Vec<(u32, u32)>>,
    doc_lengths: Vec<u32>,
    avg_doc_len: f64,
    docs: Vec<StoredDoc>,
    pub built_from: String,
}

/// Build an index; deterministic for a given corpus.
pub fn build_index(corpus: &Corpus) -> Result<LexicalIndex, RetrievalError> {
    if corpus.passages.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
    let mut doc_lengths = Vec::with_capacity(corpus.passages.len());
    for (ordinal, passage) in corpus.passages.iter().enumerate() {
        let tokens = tokenize(&passage.text);
        doc_lengths.push(tokens.len() as u32);
        let mut freqs: BTreeMap<String, u32> = BTreeMap::new();
        for token in tokens {
            *freqs.entry(token).or_insert(0) += 1;
        }
        for (term, tf) in freqs {
            postings.entry(term).or_default().push((ordinal as u32, tf));
        }
    }
    let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
    Ok(LexicalIndex {
        postings,
        doc_lengths,
        avg_doc_len: total as f64 / corpus.passages.len() as f64,
        docs: corpus
            .passages
            .iter()
            .map(|p| StoredDoc { doc_id: p.doc_id.clone(), title: p.title.clone(), text: p.text.clone() })
            .collect(),
        built_from: corpus.digest(),
    })
}

const INDEX_MAGIC: &[u8; 4] = b"FAIX";
const INDEX_VERSION: u32 = 1;

impl LexicalIndex {
    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn postings(&self, term: &str) -> Option<&[(u32, u32)]> {
        self.postings.get(term).map(|v| v.as_slice())
    }

    /// The stored document at an ordinal, as a passage with scores unset.
    pub fn passage(&self, ordinal: u32) -> Passage {
        self.docs[ordinal as usize].to_passage()
    }

    /// Digest of the serialized index (stable across rebuilds of one corpus).
    pub fn digest(&self) -> String {
        crate::digest::bytes_digest(&self.to_bytes())
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        bincode::serialize_into(&mut out, self).expect("index serializes");
        out
    }

    /// Persist as a single versioned binary file with the corpus digest embedded.
    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let io_err = |source| RetrievalError::Io { path: path.display().to_string(), source };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io_err)?;
        }
        let mut file = std::fs::File::create(path).map_err(io_err)?;
        file.write_all(&self.to_bytes()).map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let p = path.display().to_string();
        let io_err = |source| RetrievalError::Io { path: p.clone(), source };
        let bad = |message: String| RetrievalError::BadIndexFile { path: p.clone(), message };
        let mut bytes = Vec::new();
        std::fs::File::open(path).map_err(io_err)?.read_to_end(&mut bytes).map_err(io_err)?;
        if bytes.len() < 8 || &bytes[..4] != INDEX_MAGIC {
            return Err(bad("missing index magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != INDEX_VERSION {
            return Err(bad(format!("unsupported index version {version}")));
        }
        bincode::deserialize(&bytes[8..]).map_err(|e| bad(e.to_string()))
    }
}

fn idf(doc_count: usize, df: usize) -> f64 {
    let n = doc_count as f64;
    let df = df as f64;
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

/// BM25 contribution of one term occurrence in one document.
fn bm25_term(tf: u32, doc_len: u32, avg_doc_len: f64, idf: f64) -> f64 {
    let tf = tf as f64;
    let norm = 1.0 - BM25_B + BM25_B * doc_len as f64 / avg_doc_len;
    idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm)
}

/// Top-k passages by BM25, ties broken by ascending doc_id.
///
/// Returns `min(k, matching docs)` passages with `retrieval_score` set; an
/// empty result is allowed.
pub fn search(index: &LexicalIndex, query: &str, k: usize) -> Vec<Passage> {
    let tokens = tokenize(query);
    if tokens.is_empty() || k == 0 {
        return Vec::new();
    }
    let mut scores: BTreeMap<u32, f64> = BTreeMap::new();
    for token in &tokens {
        if let Some(postings) = index.postings.get(token) {
            let term_idf = idf(index.doc_count(), postings.len());
            for &(ordinal, tf) in postings {
                let doc_len = index.doc_lengths[ordinal as usize];
                *scores.entry(ordinal).or_insert(0.0) +=
                    bm25_term(tf, doc_len, index.avg_doc_len, term_idf);
            }
        }
    }
    let mut ranked: Vec<(u32, f64)> = scores.into_iter().collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| index.docs[a.0 as usize].doc_id.cmp(&index.docs[b.0 as usize].doc_id))
    });
    ranked
        .into_iter()
        .take(k)
        .map(|(ordinal, score)| {
            let mut passage = index.passage(ordinal);
            passage.retrieval_score = score;
            passage
        })
        .collect()
}

/// A pluggable passage scorer for second-stage ranking.
pub trait Reranker: Send + Sync {
    /// Higher is more relevant. `Err` keeps the passage on its retrieval score.
    fn score(&self, query: &str, passage: &Passage) -> Result<f64, String>;
}

/// Leaves retrieval order untouched (`rerank_score = retrieval_score`).
pub struct IdentityReranker;

impl Reranker for IdentityReranker {
    fn score(&self, _query: &str, passage: &Passage) -> Result<f64, String> {
        Ok(passage.retrieval_score)
    }
}

/// Prompts a backend for a 0–10 relevance rating through the gateway.
pub struct LlmReranker<'a> {
    pub gateway: &'a Gateway,
    pub backend_id: String,
    pub templates: &'a crate::templates::TemplateSet,
}

impl Reranker for LlmReranker<'_> {
    fn score(&self, query: &str, passage: &Passage) -> Result<f64, String> {
        let prompt = self
            .templates
            .render(
                "rerank",
                &[("query", query), ("passage", &format!("{}\n{}", passage.title, passage.text))],
            )
            .map_err(|e| e.to_string())?;
        let request = self
            .gateway
            .request(&self.backend_id, vec![Message::user(prompt)], SamplingParams::greedy())
            .map_err(|e| e.to_string())?;
        let completions = self.gateway.cached_complete(&request).map_err(|e| e.to_string())?;
        let text = &completions[0].text;
        // Ratings are on a 0-10 scale, so the shared 1-5 score parser does
        // not apply; take the first number in the reply.
        static RATING: OnceLock<Regex> = OnceLock::new();
        let pattern =
            RATING.get_or_init(|| Regex::new(r"([0-9]+(?:\.[0-9]+)?)").expect("rating pattern"));
        let caps = pattern.captures(text).ok_or_else(|| format!("no rating in reply: {text:?}"))?;
        let raw: f64 = caps[1].parse().map_err(|e| format!("bad rating: {e}"))?;
        Ok(raw.clamp(0.0, 10.0))
    }
}

/// Stable sort by rerank score, descending. Passages the reranker fails on
/// keep their retrieval score as the sort key and get a logged warning.
pub fn rerank(query: &str, mut passages: Vec<Passage>, reranker: &dyn Reranker) -> Vec<Passage> {
    if passages.is_empty() {
        return passages;
    }
    for passage in &mut passages {
        match reranker.score(query, passage) {
            Ok(score) => passage.rerank_score = Some(score),
            Err(message) => {
                log::warn!("reranker failed on {}: {message}; keeping retrieval score", passage.doc_id);
                passage.rerank_score = None;
            }
        }
    }
    passages.sort_by(|a, b| {
        let ka = a.rerank_score.unwrap_or(a.retrieval_score);
        let kb = b.rerank_score.unwrap_or(b.retrieval_score);
        kb.partial_cmp(&ka).unwrap_or(std::cmp::Ordering::Equal)
    });
    passages
}

/// The `m` support passages for a query: first `m` of the re-ranked top-20.
pub fn top_supports(
    index: &LexicalIndex,
    query: &str,
    m: usize,
    k_retrieve: usize,
    reranker: &dyn Reranker,
) -> Vec<Passage> {
    let mut supports = rerank(query, search(index, query, k_retrieve), reranker);
    supports.truncate(m);
    supports
}

/// A seed instruction visible to similarity search.
#[derive(Debug, Clone)]
pub struct SeedInstruction {
    pub id: String,
    pub text: String,
}

/// Top-k seed instructions most similar to the query text, by BM25 over
/// instruction texts with the same tie-breaking as [`search`] (doc_id = id).
///
/// The seed set must already exclude the query instruction by id. Fewer than
/// k seeds returns them all with a logged warning.
pub fn similar_instructions(
    seeds: &[SeedInstruction],
    query_id: &str,
    query_text: &str,
    k: usize,
) -> Result<Vec<SeedInstruction>, RetrievalError> {
    if seeds.iter().any(|s| s.id == query_id) {
        return Err(RetrievalError::QueryInSeedSet(query_id.to_string()));
    }
    if seeds.is_empty() || k == 0 {
        return Ok(Vec::new());
    }
    if seeds.len() < k {
        log::warn!("only {} seeds available for top-{k} similarity", seeds.len());
    }
    let passages: Vec<Passage> = seeds
        .iter()
        .map(|s| Passage {
            doc_id: s.id.clone(),
            title: String::new(),
            text: s.text.clone(),
            retrieval_score: 0.0,
            rerank_score: None,
        })
        .collect();
    let corpus = Corpus::from_passages(passages)?;
    let index = build_index(&corpus)?;
    let hits = search(&index, query_text, k);
    let by_id: std::collections::HashMap<&str, &SeedInstruction> =
        seeds.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut out: Vec<SeedInstruction> =
        hits.iter().map(|p| by_id[p.doc_id.as_str()].clone()).collect();
    // Demo selection needs k results even when few seeds share terms with
    // the query: pad with the zero-score seeds in ascending id order.
    if out.len() < k {
        let taken: std::collections::HashSet<&str> =
            hits.iter().map(|p| p.doc_id.as_str()).collect();
        let mut rest: Vec<&SeedInstruction> =
            seeds.iter().filter(|s| !taken.contains(s.id.as_str())).collect();
        rest.sort_by(|a, b| a.id.cmp(&b.id));
        out.extend(rest.into_iter().take(k - out.len()).cloned());
    }
    Ok(out)
}
