//! Stance of an evidence article toward a claim: support (+1), contradict
//! (−1) or neither (0).
//!
//! Providers are interchangeable behind [`StanceProvider`]. Two are bundled
//! here: [`LexicalBaseline`], a deterministic overlap-and-negation rule, and
//! [`PlantedStances`], an oracle that replays ground-truth stances recorded by
//! the synthetic benchmark. An HTTP provider lives in `provider` behind the
//! `http` feature.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::Claim;
use crate::corpus::Article;
use crate::error::ProviderError;
use crate::par::{self, Execution};
use crate::text::{content_tokens, is_stopword, tokenize};

/// Provider tag recorded on verdicts that fell back to neutral.
pub const ERROR_TAG: &str = "error";

#[derive(Debug, Error)]
pub enum StanceError {
    #[error("stance request for claim {claim_id:?} / article {article_id:?}: {what} is empty")]
    EmptyInput {
        claim_id: String,
        article_id: String,
        what: &'static str,
    },
    #[error("stance batch is empty")]
    EmptyBatch,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("planted stance file line {line}: {message}")]
    PlantedFile { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Stance {
    Contradict,
    Neutral,
    Support,
}

impl Stance {
    pub fn value(self) -> i8 {
        match self {
            Stance::Contradict => -1,
            Stance::Neutral => 0,
            Stance::Support => 1,
        }
    }

    /// Parses the wire vocabulary (`support`, `contradict`, `neutral`).
    pub fn from_label(label: &str) -> Option<Self> {
        match label.trim().to_ascii_lowercase().as_str() {
            "support" | "supports" => Some(Stance::Support),
            "contradict" | "contradicts" => Some(Stance::Contradict),
            "neutral" => Some(Stance::Neutral),
            _ => None,
        }
    }
}

impl From<Stance> for i8 {
    fn from(s: Stance) -> i8 {
        s.value()
    }
}

impl TryFrom<i8> for Stance {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Stance::Contradict),
            0 => Ok(Stance::Neutral),
            1 => Ok(Stance::Support),
            other => Err(format!("stance must be -1, 0 or 1, got {other}")),
        }
    }
}

pub trait StanceProvider: Send + Sync {
    fn tag(&self) -> &str;

    fn judge(&self, claim: &str, article: &Article) -> Result<Stance, ProviderError>;

    /// Identity used in configuration fingerprints.
    fn describe(&self) -> String {
        self.tag().to_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceVerdict {
    pub claim_id: String,
    pub article_id: String,
    pub value: Stance,
    pub provider: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

fn check_pair(claim: &Claim, article: &Article) -> Result<(), StanceError> {
    let empty = |what| StanceError::EmptyInput {
        claim_id: claim.id.clone(),
        article_id: article.id.clone(),
        what,
    };
    if claim.text.trim().is_empty() {
        return Err(empty("claim text"));
    }
    if article.title.trim().is_empty() && article.abstract_text.trim().is_empty() {
        return Err(empty("article text"));
    }
    Ok(())
}

/// Judges one pair. Provider failures are returned to the caller.
pub fn judge(
    provider: &dyn StanceProvider,
    claim: &Claim,
    article: &Article,
) -> Result<StanceVerdict, StanceError> {
    check_pair(claim, article)?;
    let value = provider.judge(&claim.text, article)?;
    Ok(StanceVerdict {
        claim_id: claim.id.clone(),
        article_id: article.id.clone(),
        value,
        provider: provider.tag().to_owned(),
        rationale: None,
    })
}

/// Judges every pair, preserving input order. All pairs are validated before
/// any is dispatched; a failing pair degrades to a neutral verdict tagged
/// [`ERROR_TAG`].
pub fn judge_batch(
    provider: &dyn StanceProvider,
    pairs: &[(&Claim, &Article)],
    exec: Execution,
) -> Result<Vec<StanceVerdict>, StanceError> {
    if pairs.is_empty() {
        return Err(StanceError::EmptyBatch);
    }
    for (claim, article) in pairs {
        check_pair(claim, article)?;
    }
    Ok(par::map(exec, pairs, |(claim, article)| {
        match provider.judge(&claim.text, article) {
            Ok(value) => StanceVerdict {
                claim_id: claim.id.clone(),
                article_id: article.id.clone(),
                value,
                provider: provider.tag().to_owned(),
                rationale: None,
            },
            Err(e) => {
                log::warn!(
                    "stance provider {} failed on claim {} / article {}: {e}",
                    provider.tag(),
                    claim.id,
                    article.id
                );
                StanceVerdict {
                    claim_id: claim.id.clone(),
                    article_id: article.id.clone(),
                    value: Stance::Neutral,
                    provider: ERROR_TAG.to_owned(),
                    rationale: Some(e.to_string()),
                }
            }
        }
    }))
}

const NEGATIONS: &[&str] = &["not", "no", "without"];

/// Deterministic lexical stance rule.
///
/// Support when at least `threshold` of the claim's content tokens occur in
/// the article's title or abstract; contradict instead when a negation
/// marker (`not`, `no`, `without`, `failed to`) sits within `window` tokens
/// of an overlapping content token; neutral otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexicalBaseline {
    pub threshold: f64,
    pub window: usize,
}

impl Default for LexicalBaseline {
    fn default() -> Self {
        LexicalBaseline {
            threshold: 0.35,
            window: 3,
        }
    }
}

impl LexicalBaseline {
    pub fn stance(&self, claim: &str, article: &Article) -> Stance {
        let claim_terms = content_tokens(claim);
        if claim_terms.is_empty() {
            return Stance::Neutral;
        }
        let tokens: Vec<String> = tokenize(&format!("{}. {}", article.title, article.abstract_text));
        let article_terms: BTreeSet<&str> = tokens
            .iter()
            .map(String::as_str)
            .filter(|t| !is_stopword(t))
            .collect();
        let shared = claim_terms
            .iter()
            .filter(|t| article_terms.contains(t.as_str()))
            .count();
        if (shared as f64) < self.threshold * claim_terms.len() as f64 {
            return Stance::Neutral;
        }
        let is_negation = |i: usize| {
            NEGATIONS.contains(&tokens[i].as_str())
                || (tokens[i] == "failed" && tokens.get(i + 1).is_some_and(|n| n == "to"))
        };
        let overlapping: Vec<usize> = (0..tokens.len())
            .filter(|&i| claim_terms.contains(&tokens[i]))
            .collect();
        let negated = (0..tokens.len())
            .filter(|&i| is_negation(i))
            .any(|n| overlapping.iter().any(|&o| o.abs_diff(n) <= self.window));
        if negated {
            Stance::Contradict
        } else {
            Stance::Support
        }
    }
}

impl StanceProvider for LexicalBaseline {
    fn tag(&self) -> &str {
        "lexical"
    }

    fn judge(&self, claim: &str, article: &Article) -> Result<Stance, ProviderError> {
        Ok(self.stance(claim, article))
    }

    fn describe(&self) -> String {
        format!("lexical(threshold={},window={})", self.threshold, self.window)
    }
}

/// One ground-truth stance of an article toward every claim about a topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedStance {
    pub topic: String,
    pub article_id: String,
    pub stance: Stance,
}

/// Oracle provider. A claim's topic is the first of its tokens that names a
/// known topic; pairs without a planted stance are neutral.
#[derive(Debug, Clone, Default)]
pub struct PlantedStances {
    topics: HashSet<String>,
    table: HashMap<(String, String), Stance>,
}

impl PlantedStances {
    pub fn new(entries: impl IntoIterator<Item = PlantedStance>) -> Self {
        let mut out = PlantedStances::default();
        for e in entries {
            let topic = e.topic.to_lowercase();
            out.topics.insert(topic.clone());
            out.table.insert((topic, e.article_id), e.stance);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, StanceError> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let e: PlantedStance =
                serde_json::from_str(raw).map_err(|e| StanceError::PlantedFile {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            entries.push(e);
        }
        Ok(Self::new(entries))
    }

    pub fn load(path: &Path) -> Result<Self, crate::Error> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Ok(Self::parse(&text)?)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn topic_of(&self, claim: &str) -> Option<String> {
        tokenize(claim).into_iter().find(|t| self.topics.contains(t))
    }
}

impl StanceProvider for PlantedStances {
    fn tag(&self) -> &str {
        "planted"
    }

    fn judge(&self, claim: &str, article: &Article) -> Result<Stance, ProviderError> {
        Ok(self
            .topic_of(claim)
            .and_then(|topic| self.table.get(&(topic, article.id.clone())).copied())
            .unwrap_or(Stance::Neutral))
    }
}

/// Counting semaphore bounding in-flight provider calls.
#[derive(Debug)]
pub struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.permits.lock().unwrap_or_else(|p| p.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|p| p.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.permits.lock().unwrap_or_else(|p| p.into_inner());
        *n += 1;
        self.0.freed.notify_one();
    }
}
