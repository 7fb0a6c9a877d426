//! Grading of the evidence the upstream system supplied.
//!
//! Each given article is compared, claim by claim, with the final claim
//! label. An article that mostly agrees with the outcome is supportive, one
//! that mostly votes for the other side is misleading, and one that mostly
//! abstains is irrelevant.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::heterogeneity::{verdict_from_labels, ClaimAdjudication, ClaimLabel, Origin, ResponseLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    Aligned,
    Opposed,
    Irrelevant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceClass {
    Supportive,
    Misleading,
    Irrelevant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceAudit {
    pub article_id: String,
    pub per_claim_alignment: Vec<Alignment>,
    pub classification: EvidenceClass,
    /// Highest reliability the article received across claims.
    pub reliability: u8,
    pub removed_by_filter: bool,
}

pub fn alignment(y: i8, label: ClaimLabel) -> Alignment {
    let s = label.sign();
    if y == 0 || s == 0 {
        Alignment::Irrelevant
    } else if y == s {
        Alignment::Aligned
    } else {
        Alignment::Opposed
    }
}

/// Strict majority over claims.
pub fn classify(alignments: &[Alignment]) -> EvidenceClass {
    let aligned = alignments.iter().filter(|&&a| a == Alignment::Aligned).count();
    let opposed = alignments.iter().filter(|&&a| a == Alignment::Opposed).count();
    if opposed > aligned {
        EvidenceClass::Misleading
    } else if aligned > opposed {
        EvidenceClass::Supportive
    } else {
        EvidenceClass::Irrelevant
    }
}

/// One audit per given article, in the order of `given_ids`.
pub fn audit_given_evidence(adjudications: &[ClaimAdjudication], given_ids: &[&str]) -> Vec<EvidenceAudit> {
    given_ids
        .iter()
        .map(|&id| {
            let mut per_claim_alignment = Vec::with_capacity(adjudications.len());
            let mut reliability = 0;
            let mut removed_by_filter = false;
            for adj in adjudications {
                let kept = adj.studies.iter().find(|s| s.article_id == id);
                let removed = adj.removed_studies.iter().find(|s| s.article_id == id);
                removed_by_filter |= removed.is_some();
                match kept.or(removed) {
                    Some(study) => {
                        reliability = reliability.max(study.reliability);
                        per_claim_alignment.push(alignment(study.y.value(), adj.label));
                    }
                    None => per_claim_alignment.push(Alignment::Irrelevant),
                }
            }
            EvidenceAudit {
                article_id: id.to_owned(),
                classification: classify(&per_claim_alignment),
                per_claim_alignment,
                reliability,
                removed_by_filter,
            }
        })
        .collect()
}

/// The response label the given evidence would produce on its own: for each
/// claim, the sign of the reliability-weighted vote of the given studies that
/// survived filtering, then the usual any-refuted rule. `None` when there is
/// no given evidence.
pub fn given_evidence_label(adjudications: &[ClaimAdjudication]) -> Option<ResponseLabel> {
    let has_given = adjudications.iter().any(|a| {
        a.studies
            .iter()
            .chain(&a.removed_studies)
            .any(|s| s.origin == Origin::Given)
    });
    if !has_given {
        return None;
    }
    Some(verdict_from_labels(adjudications.iter().map(|a| {
        let m: i64 = a
            .studies
            .iter()
            .filter(|s| s.origin == Origin::Given)
            .map(|s| s.vote())
            .sum();
        ClaimLabel::from_score(m as f64)
    })))
}

/// Share of queries whose given evidence agrees with the final label.
/// Queries without given evidence (`None`) are skipped; `None` overall when
/// no query had any.
pub fn contribution_ratio(aligned: &[Option<bool>]) -> Option<f64> {
    let counted: Vec<bool> = aligned.iter().flatten().copied().collect();
    if counted.is_empty() {
        return None;
    }
    Some(counted.iter().filter(|&&a| a).count() as f64 / counted.len() as f64)
}

/// `extra_count,contribution_ratio` rows; an absent ratio is left blank.
pub fn contribution_csv(rows: &[(usize, Option<f64>)]) -> String {
    let mut out = String::from("extra_count,contribution_ratio\n");
    for (m, ratio) in rows {
        match ratio {
            Some(r) => writeln!(out, "{m},{r:.6}").unwrap(),
            None => writeln!(out, "{m},").unwrap(),
        }
    }
    out
}

/// Article ids of given evidence removed by the filter for any claim.
pub fn removed_given(audits: &[EvidenceAudit]) -> HashSet<&str> {
    audits
        .iter()
        .filter(|a| a.removed_by_filter)
        .map(|a| a.article_id.as_str())
        .collect()
}
