//! Rule-based reliability score on a 0–7 scale.
//!
//! Three components are summed: recency of the last revision (0–3 points),
//! the strongest matching publication-type class (0–3 points) and whether a
//! MeSH heading shares a token with the claim (0–1 point). The recency bands
//! and type classes come from a [`Rubric`], loadable from TOML:
//!
//! ```toml
//! [[recency]]
//! within_years = 2
//! points = 3
//!
//! [[publication_types]]
//! points = 3
//! types = ["Meta-Analysis", "Systematic Review"]
//! ```

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Article;
use crate::retrieval::ScoredArticle;
use crate::text::tokenize;

pub const MAX_RECENCY_POINTS: u8 = 3;
pub const MAX_TYPE_POINTS: u8 = 3;
pub const MAX_MESH_POINTS: u8 = 1;
pub const MAX_RELIABILITY: u8 = MAX_RECENCY_POINTS + MAX_TYPE_POINTS + MAX_MESH_POINTS;

#[derive(Debug, Error)]
pub enum RubricError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid rubric: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecencyBand {
    pub within_years: u32,
    pub points: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeClass {
    pub points: u8,
    pub types: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    pub recency: Vec<RecencyBand>,
    pub publication_types: Vec<TypeClass>,
}

impl Default for Rubric {
    fn default() -> Self {
        let class = |points, types: &[&str]| TypeClass {
            points,
            types: types.iter().map(|s| s.to_string()).collect(),
        };
        Rubric {
            recency: vec![
                RecencyBand { within_years: 2, points: 3 },
                RecencyBand { within_years: 5, points: 2 },
                RecencyBand { within_years: 10, points: 1 },
            ],
            publication_types: vec![
                class(3, &["Meta-Analysis", "Systematic Review"]),
                class(2, &["Randomized Controlled Trial"]),
                class(
                    1,
                    &[
                        "Clinical Trial",
                        "Clinical Trial, Phase I",
                        "Clinical Trial, Phase II",
                        "Clinical Trial, Phase III",
                        "Clinical Trial, Phase IV",
                        "Controlled Clinical Trial",
                        "Review",
                    ],
                ),
            ],
        }
    }
}

impl Rubric {
    pub fn from_toml_str(text: &str) -> Result<Self, RubricError> {
        let rubric: Rubric =
            toml::from_str(text).map_err(|e| RubricError::Invalid(e.to_string()))?;
        rubric.validate()?;
        Ok(rubric)
    }

    pub fn load(path: &Path) -> Result<Self, RubricError> {
        let text = std::fs::read_to_string(path).map_err(|source| RubricError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), RubricError> {
        let mut prev: Option<&RecencyBand> = None;
        for band in &self.recency {
            if band.points > MAX_RECENCY_POINTS {
                return Err(RubricError::Invalid(format!(
                    "recency band {} years awards {} points (max {MAX_RECENCY_POINTS})",
                    band.within_years, band.points
                )));
            }
            if let Some(p) = prev {
                if band.within_years <= p.within_years || band.points > p.points {
                    return Err(RubricError::Invalid(
                        "recency bands must have increasing years and non-increasing points"
                            .into(),
                    ));
                }
            }
            prev = Some(band);
        }
        if let Some(c) = self
            .publication_types
            .iter()
            .find(|c| c.points > MAX_TYPE_POINTS)
        {
            return Err(RubricError::Invalid(format!(
                "publication-type class {:?} awards {} points (max {MAX_TYPE_POINTS})",
                c.types, c.points
            )));
        }
        Ok(())
    }

    pub fn recency_points(&self, revised: NaiveDate, today: NaiveDate) -> u8 {
        self.recency
            .iter()
            .find(|band| {
                today
                    .checked_sub_months(Months::new(band.within_years.saturating_mul(12)))
                    .is_none_or(|cutoff| revised >= cutoff)
            })
            .map_or(0, |band| band.points)
    }

    pub fn type_points(&self, publication_types: &[String]) -> u8 {
        self.publication_types
            .iter()
            .filter(|class| {
                class.types.iter().any(|t| {
                    publication_types
                        .iter()
                        .any(|p| p.trim().eq_ignore_ascii_case(t.trim()))
                })
            })
            .map(|class| class.points)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Components {
    pub recency_points: u8,
    pub type_points: u8,
    pub mesh_points: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReliabilityScore {
    pub value: u8,
    pub components: Components,
}

impl ReliabilityScore {
    pub fn from_components(components: Components) -> Self {
        ReliabilityScore {
            value: components.recency_points + components.type_points + components.mesh_points,
            components,
        }
    }

    /// A score with the given total, split greedily into recency, type and
    /// MeSH points. Used where scores are assigned rather than computed.
    pub fn from_value(value: u8) -> Self {
        let value = value.min(MAX_RELIABILITY);
        let recency_points = value.min(MAX_RECENCY_POINTS);
        let type_points = (value - recency_points).min(MAX_TYPE_POINTS);
        let mesh_points = value - recency_points - type_points;
        Self::from_components(Components {
            recency_points,
            type_points,
            mesh_points,
        })
    }

    pub fn is_consistent(&self) -> bool {
        let c = self.components;
        c.recency_points <= MAX_RECENCY_POINTS
            && c.type_points <= MAX_TYPE_POINTS
            && c.mesh_points <= MAX_MESH_POINTS
            && self.value == c.recency_points + c.type_points + c.mesh_points
    }
}

/// Scores one article against the content tokens of a claim.
pub fn score_article(
    rubric: &Rubric,
    article: &Article,
    query_tokens: &BTreeSet<String>,
    today: NaiveDate,
) -> ReliabilityScore {
    let mesh_hit = article
        .mesh_headings
        .iter()
        .flat_map(|h| tokenize(h))
        .any(|t| query_tokens.contains(&t));
    ReliabilityScore::from_components(Components {
        recency_points: rubric.recency_points(article.date_revised, today),
        type_points: rubric.type_points(&article.publication_types),
        mesh_points: u8::from(mesh_hit),
    })
}

/// Orders candidates by reliability, then BM25 score, then id, and keeps the
/// first `m`.
pub fn rerank_by_reliability(
    mut candidates: Vec<(ScoredArticle, ReliabilityScore)>,
    m: usize,
) -> Vec<(ScoredArticle, ReliabilityScore)> {
    candidates.sort_by(|(a, ra), (b, rb)| {
        rb.value
            .cmp(&ra.value)
            .then_with(|| b.bm25_score.total_cmp(&a.bm25_score))
            .then_with(|| a.article.id.cmp(&b.article.id))
    });
    candidates.truncate(m);
    candidates
}

/// Convenience wrapper over [`rerank_by_reliability`] for callers holding a
/// score map. Candidates without a score are ranked as reliability 0.
pub fn rerank_with_map(
    candidates: Vec<ScoredArticle>,
    scores: &HashMap<String, ReliabilityScore>,
    m: usize,
) -> Vec<Article> {
    let paired = candidates
        .into_iter()
        .map(|c| {
            let s = scores
                .get(&c.article.id)
                .copied()
                .unwrap_or(ReliabilityScore::from_value(0));
            (c, s)
        })
        .collect();
    rerank_by_reliability(paired, m)
        .into_iter()
        .map(|(c, _)| c.article)
        .collect()
}
