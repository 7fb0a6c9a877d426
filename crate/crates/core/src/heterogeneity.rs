//! Simplified DerSimonian–Laird heterogeneity analysis over stance votes.
//!
//! Every evidence article is a "study" whose effect is its stance
//! `y ∈ {−1, 0, +1}`. Sampling variances are unavailable, so each study gets
//! a constant variance `v` and weight `w = reliability / v` (or `w_floor` for
//! reliability 0). Cochran's Q and τ² describe how much the votes disagree;
//! the most discordant studies are dropped greedily, and the claim is
//! labelled by the sign of the reliability-weighted vote of what remains:
//!
//! ```text
//! ȳ   = Σ wᵢ yᵢ / Σ wᵢ
//! qᵢ  = wᵢ (yᵢ − ȳ)²,   Q = Σ qᵢ
//! τ²  = max((Q − (k − 1)) / (Σ wᵢ − Σ wᵢ² / Σ wᵢ), 0)
//! M   = Σ_given y·r + Σ_extra y·r
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::Claim;
use crate::stance::Stance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeterogeneityError {
    #[error("no study carries positive weight")]
    ZeroWeight,
    #[error("degenerate τ² denominator {0}: all weight sits in one study")]
    DegenerateDenominator(f64),
    #[error("invalid heterogeneity settings: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Given,
    Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedStudy {
    pub article_id: String,
    pub y: Stance,
    pub reliability: u8,
    pub v: f64,
    pub w: f64,
    pub origin: Origin,
}

impl WeightedStudy {
    pub fn new(
        article_id: impl Into<String>,
        y: Stance,
        reliability: u8,
        origin: Origin,
        v: f64,
        w_floor: f64,
    ) -> Self {
        let w = if reliability > 0 {
            f64::from(reliability) / v
        } else {
            w_floor
        };
        WeightedStudy {
            article_id: article_id.into(),
            y,
            reliability,
            v,
            w,
            origin,
        }
    }

    fn effect(&self) -> f64 {
        f64::from(self.y.value())
    }

    /// This study's term of the heterogeneity score.
    pub fn vote(&self) -> i64 {
        i64::from(self.y.value()) * i64::from(self.reliability)
    }
}

/// Output of [`cochran_q`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CochranQ {
    pub weighted_mean: f64,
    pub per_study_q: Vec<f64>,
    pub q_total: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityStats {
    pub q_total: f64,
    pub per_study_q: Vec<f64>,
    pub tau_squared: f64,
    pub k: usize,
    pub weighted_mean: f64,
    /// τ² was forced to 0 because its denominator vanished.
    pub tau_degenerate: bool,
}

pub fn cochran_q(studies: &[WeightedStudy]) -> Result<CochranQ, HeterogeneityError> {
    let sum_w: f64 = studies.iter().map(|s| s.w).sum();
    if sum_w.is_nan() || sum_w <= 0.0 || studies.iter().any(|s| s.w.is_nan() || s.w < 0.0) {
        return Err(HeterogeneityError::ZeroWeight);
    }
    let weighted_mean = studies.iter().map(|s| s.w * s.effect()).sum::<f64>() / sum_w;
    let per_study_q: Vec<f64> = studies
        .iter()
        .map(|s| s.w * (s.effect() - weighted_mean).powi(2))
        .collect();
    Ok(CochranQ {
        weighted_mean,
        q_total: per_study_q.iter().sum(),
        per_study_q,
        k: studies.len(),
    })
}

pub fn tau_squared_dl(q: &CochranQ, studies: &[WeightedStudy]) -> Result<f64, HeterogeneityError> {
    let sum_w: f64 = studies.iter().map(|s| s.w).sum();
    let sum_w2: f64 = studies.iter().map(|s| s.w * s.w).sum();
    let denom = sum_w - sum_w2 / sum_w;
    if denom.is_nan() || denom <= 1e-12 * sum_w {
        return Err(HeterogeneityError::DegenerateDenominator(denom));
    }
    Ok(((q.q_total - (q.k as f64 - 1.0)) / denom).max(0.0))
}

/// Q and τ², with τ² reported as 0 (and flagged) when degenerate.
pub fn heterogeneity_stats(studies: &[WeightedStudy]) -> Result<HeterogeneityStats, HeterogeneityError> {
    let q = cochran_q(studies)?;
    let (tau_squared, tau_degenerate) = match tau_squared_dl(&q, studies) {
        Ok(t) => (t, false),
        Err(HeterogeneityError::DegenerateDenominator(_)) => (0.0, true),
        Err(e) => return Err(e),
    };
    Ok(HeterogeneityStats {
        q_total: q.q_total,
        per_study_q: q.per_study_q,
        tau_squared,
        k: q.k,
        weighted_mean: q.weighted_mean,
        tau_degenerate,
    })
}

/// Threshold on Q above which the filter keeps removing studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum QThreshold {
    /// `k − 1` for the current study count, the expectation of Q under
    /// homogeneity.
    DegreesOfFreedom,
    Fixed(f64),
}

impl QThreshold {
    pub fn at(self, k: usize) -> f64 {
        match self {
            QThreshold::DegreesOfFreedom => k as f64 - 1.0,
            QThreshold::Fixed(x) => x,
        }
    }
}

/// Which statistic drives study removal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum FilterStatistic {
    CochranQ(QThreshold),
    /// Remove while τ² exceeds the given value.
    TauSquared(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterRule {
    pub statistic: FilterStatistic,
    pub min_k: usize,
}

impl Default for FilterRule {
    fn default() -> Self {
        FilterRule {
            statistic: FilterStatistic::CochranQ(QThreshold::DegreesOfFreedom),
            min_k: 3,
        }
    }
}

impl FilterRule {
    pub fn q(q_threshold: f64, min_k: usize) -> Self {
        FilterRule {
            statistic: FilterStatistic::CochranQ(QThreshold::Fixed(q_threshold)),
            min_k,
        }
    }

    /// A rule that never removes anything.
    pub fn disabled() -> Self {
        FilterRule {
            statistic: FilterStatistic::CochranQ(QThreshold::DegreesOfFreedom),
            min_k: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<WeightedStudy>,
    /// Removed studies in removal order.
    pub removed: Vec<WeightedStudy>,
}

fn should_remove(rule: &FilterRule, kept: &[WeightedStudy], stats: &CochranQ) -> bool {
    if kept.len() <= rule.min_k || stats.q_total <= 0.0 {
        return false;
    }
    match rule.statistic {
        FilterStatistic::CochranQ(t) => stats.q_total > t.at(kept.len()),
        FilterStatistic::TauSquared(limit) => {
            tau_squared_dl(stats, kept).is_ok_and(|tau| tau > limit)
        }
    }
}

/// Index of the study with the largest q; near-ties go to the lower
/// reliability, then the higher article id.
fn most_discordant(kept: &[WeightedStudy], per_study_q: &[f64]) -> usize {
    let top = per_study_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * top.abs().max(1.0);
    (0..kept.len())
        .filter(|&i| top - per_study_q[i] <= tol)
        .min_by(|&a, &b| {
            kept[a]
                .reliability
                .cmp(&kept[b].reliability)
                .then_with(|| kept[b].article_id.cmp(&kept[a].article_id))
        })
        .expect("at least one study attains the maximum")
}

/// Greedy removal of the largest Q contributor while the rule's statistic
/// exceeds its threshold and more than `min_k` studies remain.
pub fn filter_studies(
    studies: Vec<WeightedStudy>,
    rule: &FilterRule,
) -> Result<FilterOutcome, HeterogeneityError> {
    let mut kept = studies;
    let mut removed = Vec::new();
    loop {
        let stats = cochran_q(&kept)?;
        if !should_remove(rule, &kept, &stats) {
            break;
        }
        let idx = most_discordant(&kept, &stats.per_study_q);
        removed.push(kept.remove(idx));
    }
    Ok(FilterOutcome { kept, removed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimLabel {
    Supported,
    Refuted,
    Unverifiable,
}

impl ClaimLabel {
    pub fn from_score(m: f64) -> Self {
        if m > 0.0 {
            ClaimLabel::Supported
        } else if m < 0.0 {
            ClaimLabel::Refuted
        } else {
            ClaimLabel::Unverifiable
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            ClaimLabel::Supported => 1,
            ClaimLabel::Refuted => -1,
            ClaimLabel::Unverifiable => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseLabel {
    Correct,
    Incorrect,
}

/// How study votes become a claim label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Filter discordant studies, then take the sign of Σ y·r.
    #[default]
    HeterogeneityScore,
    /// No filtering or weighting: refuted as soon as any study contradicts.
    AnyNegation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterogeneityConfig {
    pub v_constant: f64,
    pub w_floor: f64,
    pub filter: FilterRule,
    pub aggregation: Aggregation,
}

impl Default for HeterogeneityConfig {
    fn default() -> Self {
        HeterogeneityConfig {
            v_constant: 1.0,
            w_floor: 0.5,
            filter: FilterRule::default(),
            aggregation: Aggregation::HeterogeneityScore,
        }
    }
}

impl HeterogeneityConfig {
    pub fn validate(&self) -> Result<(), HeterogeneityError> {
        if !(self.v_constant > 0.0 && self.v_constant.is_finite()) {
            return Err(HeterogeneityError::InvalidConfig(format!(
                "v_constant must be positive, got {}",
                self.v_constant
            )));
        }
        if !(self.w_floor > 0.0 && self.w_floor.is_finite()) {
            return Err(HeterogeneityError::InvalidConfig(format!(
                "w_floor must be positive, got {}",
                self.w_floor
            )));
        }
        Ok(())
    }

    pub fn study(&self, article_id: &str, y: Stance, reliability: u8, origin: Origin) -> WeightedStudy {
        WeightedStudy::new(article_id, y, reliability, origin, self.v_constant, self.w_floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimAdjudication {
    pub claim: Claim,
    /// Studies that survived filtering.
    pub studies: Vec<WeightedStudy>,
    /// Statistics over the surviving studies; absent when there was no
    /// evidence at all.
    pub stats: Option<HeterogeneityStats>,
    pub removed_ids: Vec<String>,
    pub removed_studies: Vec<WeightedStudy>,
    pub m_score: f64,
    pub label: ClaimLabel,
    pub aggregation: Aggregation,
}

/// Pools given and extra evidence for one claim.
pub fn adjudicate(
    claim: &Claim,
    given: Vec<WeightedStudy>,
    extra: Vec<WeightedStudy>,
    config: &HeterogeneityConfig,
) -> Result<ClaimAdjudication, HeterogeneityError> {
    let all: Vec<WeightedStudy> = given.into_iter().chain(extra).collect();
    if all.is_empty() {
        return Ok(ClaimAdjudication {
            claim: claim.clone(),
            studies: Vec::new(),
            stats: None,
            removed_ids: Vec::new(),
            removed_studies: Vec::new(),
            m_score: 0.0,
            label: ClaimLabel::Unverifiable,
            aggregation: config.aggregation,
        });
    }
    let (kept, removed, label_override) = match config.aggregation {
        Aggregation::HeterogeneityScore => {
            let out = filter_studies(all, &config.filter)?;
            (out.kept, out.removed, None)
        }
        Aggregation::AnyNegation => {
            let label = if all.iter().any(|s| s.y == Stance::Contradict) {
                ClaimLabel::Refuted
            } else if all.iter().any(|s| s.y == Stance::Support) {
                ClaimLabel::Supported
            } else {
                ClaimLabel::Unverifiable
            };
            (all, Vec::new(), Some(label))
        }
    };
    let stats = heterogeneity_stats(&kept)?;
    let m_score = kept.iter().map(WeightedStudy::vote).sum::<i64>() as f64;
    Ok(ClaimAdjudication {
        claim: claim.clone(),
        label: label_override.unwrap_or_else(|| ClaimLabel::from_score(m_score)),
        removed_ids: removed.iter().map(|s| s.article_id.clone()).collect(),
        removed_studies: removed,
        studies: kept,
        stats: Some(stats),
        m_score,
        aggregation: config.aggregation,
    })
}

/// A response is incorrect iff at least one claim is refuted. Unverifiable
/// claims do not count against it.
pub fn verdict(adjudications: &[ClaimAdjudication]) -> ResponseLabel {
    verdict_from_labels(adjudications.iter().map(|a| a.label))
}

pub fn verdict_from_labels(labels: impl IntoIterator<Item = ClaimLabel>) -> ResponseLabel {
    if labels.into_iter().any(|l| l == ClaimLabel::Refuted) {
        ResponseLabel::Incorrect
    } else {
        ResponseLabel::Correct
    }
}
