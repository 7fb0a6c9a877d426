//! BM25 ranking over title, abstract and MeSH headings.
//!
//! Each article becomes one bag of tokens in which the title counts twice,
//! MeSH headings 1.5 times and the abstract once (fractional term counts).
//! Scores use Okapi BM25 with the non-negative IDF
//! `ln(1 + (N - df + 0.5) / (df + 0.5))`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{write_file, Article, Corpus};
use crate::text::tokenize;

/// File name used inside an index cache directory.
pub const INDEX_FILE: &str = "index.json";
const INDEX_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a valid index cache: {message}")]
    BadCache { path: PathBuf, message: String },
    #[error("index does not match corpus: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldWeights {
    pub title: f64,
    pub mesh: f64,
    #[serde(rename = "abstract")]
    pub abstract_text: f64,
}

impl Default for FieldWeights {
    fn default() -> Self {
        FieldWeights {
            title: 2.0,
            mesh: 1.5,
            abstract_text: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: f64,
}

/// Inverted index. Immutable once built; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    format: u32,
    params: Bm25Params,
    weights: FieldWeights,
    doc_ids: Vec<String>,
    doc_lengths: Vec<f64>,
    avg_doc_length: f64,
    postings: BTreeMap<String, Vec<Posting>>,
}

/// A ranked retrieval hit.
#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub id: String,
    pub score: f64,
}

/// A corpus article with its BM25 relevance to a query.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredArticle {
    pub article: Article,
    pub bm25_score: f64,
}

fn weighted_terms(article: &Article, w: &FieldWeights) -> BTreeMap<String, f64> {
    let mut tf: BTreeMap<String, f64> = BTreeMap::new();
    let mut add = |text: &str, weight: f64| {
        for tok in tokenize(text) {
            *tf.entry(tok).or_insert(0.0) += weight;
        }
    };
    add(&article.title, w.title);
    for heading in &article.mesh_headings {
        add(heading, w.mesh);
    }
    add(&article.abstract_text, w.abstract_text);
    tf
}

/// Builds an index with the default BM25 parameters and field weights.
pub fn build_index(corpus: &Corpus) -> Result<Index, RetrievalError> {
    Index::build(
        corpus.articles(),
        Bm25Params::default(),
        FieldWeights::default(),
    )
}

impl Index {
    pub fn build(
        articles: &[Article],
        params: Bm25Params,
        weights: FieldWeights,
    ) -> Result<Self, RetrievalError> {
        if articles.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(articles.len());
        for (doc, article) in articles.iter().enumerate() {
            let terms = weighted_terms(article, &weights);
            doc_lengths.push(terms.values().sum());
            for (term, tf) in terms {
                postings.entry(term).or_default().push(Posting {
                    doc: doc as u32,
                    tf,
                });
            }
        }
        let avg_doc_length = doc_lengths.iter().sum::<f64>() / articles.len() as f64;
        Ok(Index {
            format: INDEX_FORMAT,
            params,
            weights,
            doc_ids: articles.iter().map(|a| a.id.clone()).collect(),
            doc_lengths,
            avg_doc_length,
            postings,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.doc_count() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Top `k` documents for `text`, by score descending then id ascending,
    /// skipping any id in `exclude`.
    pub fn query(&self, text: &str, k: usize, exclude: &HashSet<String>) -> Vec<Hit> {
        let terms: BTreeSet<String> = tokenize(text).into_iter().collect();
        let Bm25Params { k1, b } = self.params;
        let mut scores = vec![0.0f64; self.doc_count()];
        let mut touched = vec![false; self.doc_count()];
        for term in &terms {
            let plist = self.postings(term);
            if plist.is_empty() {
                continue;
            }
            let idf = self.idf(plist.len());
            for p in plist {
                let d = p.doc as usize;
                let norm = 1.0 - b + b * self.doc_lengths[d] / self.avg_doc_length;
                scores[d] += idf * p.tf * (k1 + 1.0) / (p.tf + k1 * norm);
                touched[d] = true;
            }
        }
        let mut hits: Vec<Hit> = (0..self.doc_count())
            .filter(|&d| touched[d] && !exclude.contains(&self.doc_ids[d]))
            .map(|d| Hit {
                id: self.doc_ids[d].clone(),
                score: scores[d],
            })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
        hits.truncate(k);
        hits
    }

    /// Like [`Index::query`] but returns the matching corpus articles.
    pub fn query_articles(
        &self,
        corpus: &Corpus,
        text: &str,
        k: usize,
        exclude: &HashSet<String>,
    ) -> Result<Vec<ScoredArticle>, RetrievalError> {
        self.query(text, k, exclude)
            .into_iter()
            .map(|hit| {
                corpus
                    .get(&hit.id)
                    .map(|a| ScoredArticle {
                        article: a.clone(),
                        bm25_score: hit.score,
                    })
                    .ok_or_else(|| {
                        RetrievalError::Mismatch(format!("article {:?} not in corpus", hit.id))
                    })
            })
            .collect()
    }

    /// Verifies that the index was built over exactly this corpus' ids.
    pub fn check_corpus(&self, corpus: &Corpus) -> Result<(), RetrievalError> {
        if self.doc_ids.len() != corpus.len()
            || self
                .doc_ids
                .iter()
                .zip(corpus.articles())
                .any(|(id, a)| *id != a.id)
        {
            return Err(RetrievalError::Mismatch(format!(
                "index holds {} documents, corpus {}; ids or order differ",
                self.doc_ids.len(),
                corpus.len()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("index serializes")
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, RetrievalError> {
        let index: Index =
            serde_json::from_slice(bytes).map_err(|e| RetrievalError::BadCache {
                path: path.to_owned(),
                message: e.to_string(),
            })?;
        if index.format != INDEX_FORMAT {
            return Err(RetrievalError::BadCache {
                path: path.to_owned(),
                message: format!("unsupported format {}", index.format),
            });
        }
        Ok(index)
    }

    /// Writes `<dir>/index.json`.
    pub fn save_dir(&self, dir: &Path) -> Result<PathBuf, RetrievalError> {
        let path = dir.join(INDEX_FILE);
        write_file(&path, &self.to_bytes()).map_err(|source| RetrievalError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    /// Reads `<dir>/index.json`, or `dir` itself when it names a file.
    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let file = if path.is_dir() {
            path.join(INDEX_FILE)
        } else {
            path.to_owned()
        };
        let bytes = fs::read(&file).map_err(|source| RetrievalError::Io {
            path: file.clone(),
            source,
        })?;
        Self::from_bytes(&bytes, &file)
    }
}
