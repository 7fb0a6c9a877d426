//! End-to-end verification of one RAG output.
//!
//! claims → retrieval → reliability → stance → heterogeneity → verdict → audit

use std::collections::{BTreeSet, HashSet};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audit::{audit_given_evidence, given_evidence_label, EvidenceAudit};
use crate::claims::{extract_claims, Claim, RuleSegmenter, Segmenter, SimilarityProvider, TfCosine};
use crate::corpus::{to_jsonl, write_file, Article, Corpus, RagOutput};
use crate::error::{Error, Result};
use crate::heterogeneity::{
    adjudicate, verdict, ClaimAdjudication, HeterogeneityConfig, HeterogeneityError, Origin, ResponseLabel,
};
use crate::par::{self, Execution};
use crate::reliability::{rerank_by_reliability, score_article, ReliabilityScore, Rubric, RubricError};
use crate::retrieval::{Index, ScoredArticle};
use crate::stance::{judge_batch, StanceProvider, StanceVerdict, ERROR_TAG};
use crate::text::content_tokens;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("need retrieval_k >= extra_m >= 1, got retrieval_k={retrieval_k}, extra_m={extra_m}")]
    Bounds { retrieval_k: usize, extra_m: usize },
    #[error(transparent)]
    Heterogeneity(#[from] HeterogeneityError),
    #[error(transparent)]
    Rubric(#[from] RubricError),
    #[error("{0}")]
    Invalid(String),
}

/// Where extra evidence queries come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalScope {
    /// One query per claim, using the claim text.
    #[default]
    PerClaim,
    /// One query per response, using the response text; the candidates are
    /// still reranked per claim.
    PerResponse,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReliabilityMode {
    #[default]
    Rubric,
    /// Uniform 0–7 per article, drawn from `(seed, article id)`.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub today: NaiveDate,
    pub retrieval_k: usize,
    pub extra_m: usize,
    /// When false no corpus retrieval happens and claims are judged on the
    /// given evidence alone.
    pub use_extra_evidence: bool,
    pub retrieval_scope: RetrievalScope,
    pub heterogeneity: HeterogeneityConfig,
    pub rubric: Rubric,
    pub reliability_mode: ReliabilityMode,
    /// Scheduling only; never affects results, so it is not fingerprinted.
    #[serde(skip)]
    pub execution: Execution,
}

impl PipelineConfig {
    pub fn new(today: NaiveDate) -> Self {
        PipelineConfig {
            today,
            retrieval_k: 15,
            extra_m: 9,
            use_extra_evidence: true,
            retrieval_scope: RetrievalScope::PerClaim,
            heterogeneity: HeterogeneityConfig::default(),
            rubric: Rubric::default(),
            reliability_mode: ReliabilityMode::Rubric,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.extra_m < 1 || self.retrieval_k < self.extra_m {
            return Err(ConfigError::Bounds {
                retrieval_k: self.retrieval_k,
                extra_m: self.extra_m,
            });
        }
        self.heterogeneity.validate()?;
        self.rubric.validate()?;
        Ok(())
    }
}

/// Seeded stand-in reliability, identical for an article across claims.
pub fn random_reliability(seed: u64, article_id: &str) -> ReliabilityScore {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(article_id.as_bytes())
        .finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(key);
    ReliabilityScore::from_value(rng.random_range(0..=7))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraEvidence {
    pub claim_id: String,
    pub article_id: String,
    pub reliability: u8,
    pub bm25_score: f64,
}

/// Wall-clock seconds per stage, summed over claims.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub claims: f64,
    pub retrieval: f64,
    pub reliability: f64,
    pub stance: f64,
    pub heterogeneity: f64,
    pub audit: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub report_version: u32,
    pub query_id: String,
    pub response_label: ResponseLabel,
    /// Some stance calls failed and were counted as neutral.
    pub degraded: bool,
    pub provider_errors: usize,
    pub claim_adjudications: Vec<ClaimAdjudication>,
    pub stance_verdicts: Vec<StanceVerdict>,
    pub evidence_audits: Vec<EvidenceAudit>,
    /// Label the given evidence would produce on its own.
    pub given_evidence_label: Option<ResponseLabel>,
    pub given_evidence_aligned: Option<bool>,
    pub extra_evidence_used: Vec<ExtraEvidence>,
    pub config_fingerprint: String,
    pub timings: Timings,
}

impl VerificationReport {
    pub fn without_timings(mut self) -> Self {
        self.timings = Timings::default();
        self
    }
}

pub fn write_reports(path: &Path, reports: &[VerificationReport]) -> Result<()> {
    write_file(path, to_jsonl(reports).as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_reports(path: &Path) -> Result<Vec<VerificationReport>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_reports(&text).map_err(|(line, message)| Error::Format {
        path: path.to_owned(),
        line,
        message,
    })
}

pub fn parse_reports(text: &str) -> std::result::Result<Vec<VerificationReport>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let report: VerificationReport = serde_json::from_str(line).map_err(|e| (i + 1, e.to_string()))?;
        if report.report_version != REPORT_VERSION {
            return Err((i + 1, format!("unsupported report_version {}", report.report_version)));
        }
        out.push(report);
    }
    Ok(out)
}

struct ClaimRun {
    adjudication: ClaimAdjudication,
    verdicts: Vec<StanceVerdict>,
    extra: Vec<ExtraEvidence>,
    retrieval: Duration,
    reliability: Duration,
    stance: Duration,
    heterogeneity: Duration,
}

pub struct Verifier<'a> {
    corpus: &'a Corpus,
    index: &'a Index,
    config: PipelineConfig,
    stance: Arc<dyn StanceProvider>,
    similarity: Arc<dyn SimilarityProvider>,
    segmenter: Arc<dyn Segmenter>,
    fingerprint: String,
}

impl<'a> Verifier<'a> {
    pub fn new(
        corpus: &'a Corpus,
        index: &'a Index,
        config: PipelineConfig,
        stance: Arc<dyn StanceProvider>,
    ) -> Result<Self> {
        config.validate()?;
        index.check_corpus(corpus)?;
        let mut v = Verifier {
            corpus,
            index,
            config,
            stance,
            similarity: Arc::new(TfCosine),
            segmenter: Arc::new(RuleSegmenter::default()),
            fingerprint: String::new(),
        };
        v.fingerprint = v.compute_fingerprint();
        Ok(v)
    }

    pub fn with_similarity(mut self, similarity: Arc<dyn SimilarityProvider>) -> Self {
        self.similarity = similarity;
        self.fingerprint = self.compute_fingerprint();
        self
    }

    pub fn with_segmenter(mut self, segmenter: Arc<dyn Segmenter>) -> Self {
        self.segmenter = segmenter;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn config_fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn compute_fingerprint(&self) -> String {
        let config = serde_json::to_string(&self.config).expect("config serializes");
        let digest = Sha256::new()
            .chain_update(config.as_bytes())
            .chain_update(b"\0stance=")
            .chain_update(self.stance.describe().as_bytes())
            .chain_update(b"\0similarity=")
            .chain_update(self.similarity.describe().as_bytes())
            .finalize();
        hex::encode(digest)
    }

    fn reliability(&self, article: &Article, tokens: &BTreeSet<String>) -> ReliabilityScore {
        match self.config.reliability_mode {
            ReliabilityMode::Rubric => score_article(&self.config.rubric, article, tokens, self.config.today),
            ReliabilityMode::Random { seed } => random_reliability(seed, &article.id),
        }
    }

    fn retrieve(&self, text: &str, exclude: &HashSet<String>) -> Result<Vec<ScoredArticle>> {
        Ok(self
            .index
            .query_articles(self.corpus, text, self.config.retrieval_k, exclude)?)
    }

    fn run_claim(
        &self,
        claim: &Claim,
        given: &[Article],
        exclude: &HashSet<String>,
        shared_candidates: Option<&[ScoredArticle]>,
    ) -> Result<ClaimRun> {
        let tokens = content_tokens(&claim.text);

        let t = Instant::now();
        let candidates = match (self.config.use_extra_evidence, shared_candidates) {
            (false, _) => Vec::new(),
            (true, Some(shared)) => shared.to_vec(),
            (true, None) => self.retrieve(&claim.text, exclude)?,
        };
        let retrieval = t.elapsed();

        let t = Instant::now();
        let given_scores: Vec<ReliabilityScore> = given.iter().map(|a| self.reliability(a, &tokens)).collect();
        let scored: Vec<(ScoredArticle, ReliabilityScore)> = candidates
            .into_iter()
            .map(|c| {
                let r = self.reliability(&c.article, &tokens);
                (c, r)
            })
            .collect();
        let extra = rerank_by_reliability(scored, self.config.extra_m);
        let reliability = t.elapsed();

        let t = Instant::now();
        let pairs: Vec<(&Claim, &Article)> = given
            .iter()
            .chain(extra.iter().map(|(c, _)| &c.article))
            .map(|a| (claim, a))
            .collect();
        let verdicts = if pairs.is_empty() {
            Vec::new()
        } else {
            judge_batch(self.stance.as_ref(), &pairs, self.config.execution)?
        };
        let stance = t.elapsed();

        let t = Instant::now();
        let h = &self.config.heterogeneity;
        let given_studies = given
            .iter()
            .zip(&given_scores)
            .zip(&verdicts)
            .map(|((a, r), v)| h.study(&a.id, v.value, r.value, Origin::Given))
            .collect();
        let extra_studies = extra
            .iter()
            .zip(&verdicts[given.len()..])
            .map(|((c, r), v)| h.study(&c.article.id, v.value, r.value, Origin::Extra))
            .collect();
        let adjudication = adjudicate(claim, given_studies, extra_studies, h)?;
        let heterogeneity = t.elapsed();

        Ok(ClaimRun {
            adjudication,
            verdicts,
            extra: extra
                .iter()
                .map(|(c, r)| ExtraEvidence {
                    claim_id: claim.id.clone(),
                    article_id: c.article.id.clone(),
                    reliability: r.value,
                    bm25_score: c.bm25_score,
                })
                .collect(),
            retrieval,
            reliability,
            stance,
            heterogeneity,
        })
    }

    /// Verifies one output. Errors carry the query id.
    pub fn verify(&self, query_id: &str, output: &RagOutput) -> Result<VerificationReport> {
        self.verify_inner(query_id, output).map_err(|e| Error::Query {
            query_id: query_id.to_owned(),
            source: Box::new(e),
        })
    }

    fn verify_inner(&self, query_id: &str, output: &RagOutput) -> Result<VerificationReport> {
        let started = Instant::now();
        let claims = extract_claims(output, self.segmenter.as_ref(), self.similarity.as_ref());
        let claims_time = started.elapsed();

        let exclude: HashSet<String> = output.given_evidence.iter().map(|a| a.id.clone()).collect();
        let t = Instant::now();
        let shared = match self.config.retrieval_scope {
            RetrievalScope::PerResponse if self.config.use_extra_evidence => {
                Some(self.retrieve(&output.response_text, &exclude)?)
            }
            _ => None,
        };
        let shared_retrieval = t.elapsed();

        let runs = par::try_map(self.config.execution, &claims, |claim| {
            self.run_claim(claim, &output.given_evidence, &exclude, shared.as_deref())
        })?;

        let t = Instant::now();
        let adjudications: Vec<ClaimAdjudication> = runs.iter().map(|r| r.adjudication.clone()).collect();
        let response_label = verdict(&adjudications);
        let given_ids = output.given_ids();
        let evidence_audits = audit_given_evidence(&adjudications, &given_ids);
        let given_label = given_evidence_label(&adjudications);
        let audit = t.elapsed();

        let stance_verdicts: Vec<StanceVerdict> = runs.iter().flat_map(|r| r.verdicts.iter().cloned()).collect();
        let provider_errors = stance_verdicts.iter().filter(|v| v.provider == ERROR_TAG).count();
        let sum = |f: fn(&ClaimRun) -> Duration| runs.iter().map(f).sum::<Duration>().as_secs_f64();
        let timings = Timings {
            claims: claims_time.as_secs_f64(),
            retrieval: shared_retrieval.as_secs_f64() + sum(|r| r.retrieval),
            reliability: sum(|r| r.reliability),
            stance: sum(|r| r.stance),
            heterogeneity: sum(|r| r.heterogeneity),
            audit: audit.as_secs_f64(),
            total: started.elapsed().as_secs_f64(),
        };

        Ok(VerificationReport {
            report_version: REPORT_VERSION,
            query_id: query_id.to_owned(),
            response_label,
            degraded: provider_errors > 0,
            provider_errors,
            extra_evidence_used: runs.iter().flat_map(|r| r.extra.iter().cloned()).collect(),
            claim_adjudications: adjudications,
            stance_verdicts,
            evidence_audits,
            given_evidence_aligned: given_label.map(|l| l == response_label),
            given_evidence_label: given_label,
            config_fingerprint: self.fingerprint.clone(),
            timings,
        })
    }
}

/// Query id for the `i`-th output when the record carries none.
pub fn query_id(output: &RagOutput, i: usize) -> String {
    output.id.clone().unwrap_or_else(|| format!("q{i:05}"))
}
