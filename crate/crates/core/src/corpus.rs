//! Evidence corpus and RAG-output records.
//!
//! Both files are line-delimited JSON, one record per line. Blank lines are
//! skipped. Corpus records carry `id`, `title`, `abstract`, `mesh_headings`,
//! `publication_types` and `date_revised` (`YYYY-MM-DD`); the two list fields
//! may be omitted. RAG-output records carry `question`, `response_text`,
//! optional `chosen_answer`, `given_evidence` (inline article objects or
//! `{"ref": "<id>"}`), optional `gold_label` and an optional `id`.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("duplicate article id {id:?} on lines {first_line} and {second_line}")]
    DuplicateId {
        id: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("line {line}: article {id:?} revised {date} which is after the reference date {today}")]
    DateInFuture {
        line: usize,
        id: String,
        date: NaiveDate,
        today: NaiveDate,
    },
    #[error("line {line}: given evidence references unknown article {id:?}")]
    UnresolvedReference { line: usize, id: String },
}

/// One corpus document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub mesh_headings: Vec<String>,
    #[serde(default)]
    pub publication_types: Vec<String>,
    pub date_revised: NaiveDate,
}

impl Article {
    /// Checks the per-record invariants. `line` is only used for messages.
    pub fn validate(&self, line: usize, today: NaiveDate) -> Result<(), CorpusError> {
        let blank = |field: &str| CorpusError::Schema {
            line,
            message: format!("article {:?}: {field} is empty", self.id),
        };
        if self.id.trim().is_empty() {
            return Err(CorpusError::Schema {
                line,
                message: "article id is empty".into(),
            });
        }
        if self.title.trim().is_empty() {
            return Err(blank("title"));
        }
        if self.abstract_text.trim().is_empty() {
            return Err(blank("abstract"));
        }
        if self.date_revised > today {
            return Err(CorpusError::DateInFuture {
                line,
                id: self.id.clone(),
                date: self.date_revised,
                today,
            });
        }
        Ok(())
    }
}

/// Immutable, id-indexed article collection.
#[derive(Debug, Clone)]
pub struct Corpus {
    articles: Vec<Article>,
    by_id: HashMap<String, usize>,
    today: NaiveDate,
}

impl Corpus {
    /// Builds a corpus from already-parsed articles; positions are reported
    /// as 1-based line numbers.
    pub fn from_articles(articles: Vec<Article>, today: NaiveDate) -> Result<Self, CorpusError> {
        let lines: Vec<usize> = (1..=articles.len()).collect();
        Self::from_numbered(articles, &lines, today)
    }

    fn from_numbered(
        articles: Vec<Article>,
        lines: &[usize],
        today: NaiveDate,
    ) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(articles.len());
        for (pos, article) in articles.iter().enumerate() {
            article.validate(lines[pos], today)?;
            if let Some(prev) = by_id.insert(article.id.clone(), pos) {
                return Err(CorpusError::DuplicateId {
                    id: article.id.clone(),
                    first_line: lines[prev],
                    second_line: lines[pos],
                });
            }
        }
        Ok(Corpus {
            articles,
            by_id,
            today,
        })
    }

    pub fn parse(text: &str, today: NaiveDate) -> Result<Self, CorpusError> {
        let mut articles = Vec::new();
        let mut lines = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let article: Article = serde_json::from_str(raw).map_err(|e| CorpusError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            articles.push(article);
            lines.push(idx + 1);
        }
        Self::from_numbered(articles, &lines, today)
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn get(&self, id: &str) -> Option<&Article> {
        self.by_id.get(id).map(|&i| &self.articles[i])
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn today(&self) -> NaiveDate {
        self.today
    }

    pub fn to_jsonl(&self) -> String {
        to_jsonl(&self.articles)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        fs::write(path, self.to_jsonl()).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })
    }
}

/// Loads a line-delimited corpus file.
pub fn load_corpus(path: &Path, today: NaiveDate) -> Result<Corpus, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    Corpus::parse(&text, today)
}

/// A `given_evidence` entry as it appears on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EvidenceEntry {
    Ref {
        #[serde(rename = "ref")]
        id: String,
    },
    Inline(Article),
}

/// A RAG-output record as it appears on disk, before reference resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RagRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub question: String,
    pub response_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_answer: Option<String>,
    #[serde(default)]
    pub given_evidence: Vec<EvidenceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<bool>,
}

/// One upstream RAG answer with its supplied evidence fully resolved.
///
/// `gold_label` is `true` when the response is known to be correct.
#[derive(Debug, Clone, PartialEq)]
pub struct RagOutput {
    pub id: Option<String>,
    pub question: String,
    pub response_text: String,
    pub chosen_answer: Option<String>,
    pub given_evidence: Vec<Article>,
    pub gold_label: Option<bool>,
}

impl RagOutput {
    pub fn given_ids(&self) -> Vec<&str> {
        self.given_evidence.iter().map(|a| a.id.as_str()).collect()
    }
}

impl RagRecord {
    fn check_schema(&self, line: usize) -> Result<(), CorpusError> {
        if self.question.trim().is_empty() {
            return Err(CorpusError::Schema {
                line,
                message: "question is empty".into(),
            });
        }
        if self.response_text.trim().is_empty() {
            return Err(CorpusError::Schema {
                line,
                message: "response_text is empty".into(),
            });
        }
        Ok(())
    }

    /// Resolves every `{"ref": ..}` entry against `corpus`.
    pub fn resolve(self, line: usize, corpus: &Corpus) -> Result<RagOutput, CorpusError> {
        self.check_schema(line)?;
        let mut given = Vec::with_capacity(self.given_evidence.len());
        for entry in self.given_evidence {
            match entry {
                EvidenceEntry::Ref { id } => match corpus.get(&id) {
                    Some(a) => given.push(a.clone()),
                    None => return Err(CorpusError::UnresolvedReference { line, id }),
                },
                EvidenceEntry::Inline(article) => {
                    article.validate(line, corpus.today())?;
                    given.push(article);
                }
            }
        }
        Ok(RagOutput {
            id: self.id,
            question: self.question,
            response_text: self.response_text,
            chosen_answer: self.chosen_answer,
            given_evidence: given,
            gold_label: self.gold_label,
        })
    }
}

/// Parses RAG-output records and resolves references once every record has
/// been read.
pub fn parse_rag_outputs(text: &str, corpus: &Corpus) -> Result<Vec<RagOutput>, CorpusError> {
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let record: RagRecord = serde_json::from_str(raw).map_err(|e| CorpusError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push((idx + 1, record));
    }
    records
        .into_iter()
        .map(|(line, r)| r.resolve(line, corpus))
        .collect()
}

pub fn load_rag_outputs(path: &Path, corpus: &Corpus) -> Result<Vec<RagOutput>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_rag_outputs(&text, corpus)
}

/// Serializes records one per line.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("records serialize to JSON");
        out.push(b'\n');
    }
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(contents)
}
