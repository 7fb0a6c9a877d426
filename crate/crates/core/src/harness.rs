//! Experimental protocol: metrics, extra-evidence sweeps, ablations and
//! evidence-group construction.
//!
//! The positive class throughout is "the response is incorrect", so recall
//! is the share of wrong responses caught and specificity the share of right
//! ones left alone.

use std::fmt;
use std::ops::Add;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::contribution_ratio;
use crate::corpus::{load_corpus, load_rag_outputs, Article, Corpus, RagOutput};
use crate::error::Result;
use crate::heterogeneity::{Aggregation, ResponseLabel};
use crate::par;
use crate::pipeline::{query_id, PipelineConfig, ReliabilityMode, VerificationReport, Verifier};
use crate::reliability::{rerank_by_reliability, score_article, ReliabilityScore};
use crate::retrieval::{build_index, Index, ScoredArticle};
use crate::stance::StanceProvider;
use crate::text::content_tokens;

pub const GROUP_SIZE: usize = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("query {query_id} has no gold label")]
    MissingGold { query_id: String },
    #[error("{reports} reports but {gold} gold labels")]
    LengthMismatch { reports: usize, gold: usize },
    #[error("need at least {need} candidates, got {got}")]
    TooFewCandidates { got: usize, need: usize },
    #[error("unknown ablation {0:?} (expected a-reli, a-hete or a-retr)")]
    UnknownAblation(String),
    #[error("dataset is empty")]
    EmptyDataset,
}

/// A corpus, its index and the RAG outputs to verify against it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub corpus: Corpus,
    pub index: Index,
    pub outputs: Vec<RagOutput>,
}

impl Dataset {
    pub fn new(corpus: Corpus, outputs: Vec<RagOutput>) -> Result<Self> {
        let index = build_index(&corpus)?;
        Ok(Dataset { corpus, index, outputs })
    }

    /// Loads corpus and outputs; a cached index is used when given and
    /// checked against the corpus, otherwise one is built.
    pub fn load(
        corpus_path: &Path,
        outputs_path: &Path,
        index_path: Option<&Path>,
        today: chrono::NaiveDate,
    ) -> Result<Self> {
        let corpus = load_corpus(corpus_path, today)?;
        let outputs = load_rag_outputs(outputs_path, &corpus)?;
        let index = match index_path {
            Some(p) => {
                let index = Index::load(p)?;
                index.check_corpus(&corpus)?;
                index
            }
            None => build_index(&corpus)?,
        };
        Ok(Dataset { corpus, index, outputs })
    }

    pub fn gold(&self) -> Vec<Option<bool>> {
        self.outputs.iter().map(|o| o.gold_label).collect()
    }

    pub fn with_outputs(&self, outputs: Vec<RagOutput>) -> Self {
        Dataset {
            corpus: self.corpus.clone(),
            index: self.index.clone(),
            outputs,
        }
    }
}

/// Verifies every output, in parallel when the config allows.
pub fn run_dataset(
    dataset: &Dataset,
    config: &PipelineConfig,
    stance: Arc<dyn StanceProvider>,
) -> Result<Vec<VerificationReport>> {
    let verifier = Verifier::new(&dataset.corpus, &dataset.index, config.clone(), stance)?;
    let indexed: Vec<(usize, &RagOutput)> = dataset.outputs.iter().enumerate().collect();
    par::try_map(config.execution, &indexed, |&(i, output)| {
        verifier.verify(&query_id(output, i), output)
    })
}

/// Whether a gold label counts as positive: the response is wrong.
pub fn gold_positive(gold_correct: bool) -> bool {
    !gold_correct
}

pub fn predicted_positive(label: ResponseLabel) -> bool {
    label == ResponseLabel::Incorrect
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn single(gold_correct: bool, predicted: ResponseLabel) -> Self {
        let mut c = Confusion::default();
        match (gold_positive(gold_correct), predicted_positive(predicted)) {
            (true, true) => c.tp = 1,
            (true, false) => c.fn_ = 1,
            (false, true) => c.fp = 1,
            (false, false) => c.tn = 1,
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl Add for Confusion {
    type Output = Confusion;

    fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub counts: Confusion,
}

impl EvalMetrics {
    pub fn from_counts(counts: Confusion) -> Self {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        EvalMetrics {
            accuracy: ratio(counts.tp + counts.tn, counts.total()).unwrap_or(f64::NAN),
            recall: ratio(counts.tp, counts.tp + counts.fn_),
            specificity: ratio(counts.tn, counts.tn + counts.fp),
            counts,
        }
    }
}

pub fn evaluate_labels(predicted: &[ResponseLabel], gold: &[bool]) -> EvalMetrics {
    let counts = predicted
        .iter()
        .zip(gold)
        .map(|(&p, &g)| Confusion::single(g, p))
        .fold(Confusion::default(), Add::add);
    EvalMetrics::from_counts(counts)
}

/// Metrics for reports against gold labels given in the same order.
pub fn evaluate(reports: &[VerificationReport], gold: &[Option<bool>]) -> Result<EvalMetrics, HarnessError> {
    if reports.len() != gold.len() {
        return Err(HarnessError::LengthMismatch {
            reports: reports.len(),
            gold: gold.len(),
        });
    }
    if reports.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    let mut labels = Vec::with_capacity(gold.len());
    for (r, g) in reports.iter().zip(gold) {
        labels.push(g.ok_or_else(|| HarnessError::MissingGold {
            query_id: r.query_id.clone(),
        })?);
    }
    let predicted: Vec<ResponseLabel> = reports.iter().map(|r| r.response_label).collect();
    Ok(evaluate_labels(&predicted, &labels))
}

fn require_gold(dataset: &Dataset) -> Result<Vec<Option<bool>>, HarnessError> {
    if dataset.outputs.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    for (i, o) in dataset.outputs.iter().enumerate() {
        if o.gold_label.is_none() {
            return Err(HarnessError::MissingGold {
                query_id: query_id(o, i),
            });
        }
    }
    Ok(dataset.gold())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub extra_m: usize,
    pub metrics: EvalMetrics,
    pub contribution_ratio: Option<f64>,
    /// Reports with at least one failed provider call.
    pub degraded: usize,
}

/// Config for a sweep point; 0 means no extra evidence at all.
pub fn config_for_m(base: &PipelineConfig, m: usize) -> PipelineConfig {
    let mut c = base.clone();
    if m == 0 {
        c.use_extra_evidence = false;
    } else {
        c.use_extra_evidence = true;
        c.extra_m = m;
        c.retrieval_k = c.retrieval_k.max(m);
    }
    c
}

pub fn evaluate_run(
    dataset: &Dataset,
    config: &PipelineConfig,
    stance: Arc<dyn StanceProvider>,
) -> Result<(EvalMetrics, Vec<VerificationReport>)> {
    let gold = require_gold(dataset)?;
    let reports = run_dataset(dataset, config, stance)?;
    let metrics = evaluate(&reports, &gold)?;
    Ok((metrics, reports))
}

pub fn sweep_extra_evidence(
    dataset: &Dataset,
    base: &PipelineConfig,
    stance: Arc<dyn StanceProvider>,
    m_values: &[usize],
) -> Result<Vec<SweepRow>> {
    m_values
        .iter()
        .map(|&m| {
            let (metrics, reports) = evaluate_run(dataset, &config_for_m(base, m), stance.clone())?;
            let aligned: Vec<Option<bool>> = reports.iter().map(|r| r.given_evidence_aligned).collect();
            Ok(SweepRow {
                extra_m: m,
                metrics,
                contribution_ratio: contribution_ratio(&aligned),
                degraded: reports.iter().filter(|r| r.degraded).count(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ablation {
    /// Seeded random reliability in 0–7.
    AReli,
    /// Any contradicting study refutes the claim.
    AHete,
    /// No extra evidence.
    ARetr,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [Ablation::AReli, Ablation::AHete, Ablation::ARetr];

    pub fn apply(self, base: &PipelineConfig, seed: u64) -> PipelineConfig {
        let mut c = base.clone();
        match self {
            Ablation::AReli => c.reliability_mode = ReliabilityMode::Random { seed },
            Ablation::AHete => c.heterogeneity.aggregation = Aggregation::AnyNegation,
            Ablation::ARetr => c = config_for_m(base, 0),
        }
        c
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::AReli => "a-reli",
            Ablation::AHete => "a-hete",
            Ablation::ARetr => "a-retr",
        })
    }
}

impl FromStr for Ablation {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "a-reli" | "reli" => Ok(Ablation::AReli),
            "a-hete" | "hete" => Ok(Ablation::AHete),
            "a-retr" | "retr" => Ok(Ablation::ARetr),
            _ => Err(HarnessError::UnknownAblation(s.to_owned())),
        }
    }
}

pub fn run_ablation(
    kind: Ablation,
    dataset: &Dataset,
    base: &PipelineConfig,
    stance: Arc<dyn StanceProvider>,
    seed: u64,
) -> Result<(EvalMetrics, Vec<VerificationReport>)> {
    evaluate_run(dataset, &kind.apply(base, seed), stance)
}

/// Pool the Random group is drawn from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomPool {
    /// All candidates, Finer picks included.
    #[default]
    All,
    /// Only the candidates Finer did not take.
    BottomTwelve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Groups {
    pub finer: Vec<Article>,
    pub random: Vec<Article>,
}

/// Finer takes the top three by (reliability, relevance); Random draws three
/// uniformly with the seed, reported in candidate order.
pub fn build_groups(
    candidates: &[(ScoredArticle, ReliabilityScore)],
    seed: u64,
    pool: RandomPool,
) -> Result<Groups, HarnessError> {
    if candidates.len() < GROUP_SIZE {
        return Err(HarnessError::TooFewCandidates {
            got: candidates.len(),
            need: GROUP_SIZE,
        });
    }
    let finer: Vec<Article> = rerank_by_reliability(candidates.to_vec(), GROUP_SIZE)
        .into_iter()
        .map(|(c, _)| c.article)
        .collect();
    let pool_items: Vec<&Article> = match pool {
        RandomPool::All => candidates.iter().map(|(c, _)| &c.article).collect(),
        RandomPool::BottomTwelve => candidates
            .iter()
            .map(|(c, _)| &c.article)
            .filter(|a| !finer.iter().any(|f| f.id == a.id))
            .collect(),
    };
    if pool_items.len() < GROUP_SIZE {
        return Err(HarnessError::TooFewCandidates {
            got: candidates.len(),
            need: 2 * GROUP_SIZE,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample(&mut rng, pool_items.len(), GROUP_SIZE).into_vec();
    picks.sort_unstable();
    Ok(Groups {
        finer,
        random: picks.into_iter().map(|i| pool_items[i].clone()).collect(),
    })
}

/// Rebuilds each output's given evidence from the question's top
/// `retrieval_k` candidates, returning the Finer and Random variants. Query
/// `i` uses seed `seed + i`.
pub fn regroup(
    dataset: &Dataset,
    config: &PipelineConfig,
    seed: u64,
    pool: RandomPool,
) -> Result<(Vec<RagOutput>, Vec<RagOutput>)> {
    let none = Default::default();
    let indexed: Vec<(usize, &RagOutput)> = dataset.outputs.iter().enumerate().collect();
    let pairs = par::try_map(config.execution, &indexed, |&(i, output)| -> Result<Groups> {
        let tokens = content_tokens(&output.question);
        let candidates: Vec<(ScoredArticle, ReliabilityScore)> = dataset
            .index
            .query_articles(&dataset.corpus, &output.question, config.retrieval_k, &none)?
            .into_iter()
            .map(|c| {
                let r = score_article(&config.rubric, &c.article, &tokens, config.today);
                (c, r)
            })
            .collect();
        Ok(build_groups(&candidates, seed.wrapping_add(i as u64), pool)?)
    })?;
    let with = |pick: fn(&Groups) -> &Vec<Article>| {
        dataset
            .outputs
            .iter()
            .zip(&pairs)
            .map(|(o, g)| RagOutput {
                given_evidence: pick(g).clone(),
                ..o.clone()
            })
            .collect()
    };
    Ok((with(|g| &g.finer), with(|g| &g.random)))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_owned(), |v| format!("{v:.4}"))
}

fn header_lines(seed: Option<u64>, fingerprint: &str) -> String {
    let mut out = String::new();
    if let Some(s) = seed {
        out.push_str(&format!("# seed={s}\n"));
    }
    out.push_str(&format!("# config_fingerprint={fingerprint}\n"));
    out.push_str("# positive_class=response_incorrect\n");
    out
}

fn tsv(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn metric_cells(m: &EvalMetrics) -> Vec<String> {
    vec![
        format!("{:.4}", m.accuracy),
        fmt_opt(m.recall),
        fmt_opt(m.specificity),
        m.counts.tp.to_string(),
        m.counts.fp.to_string(),
        m.counts.tn.to_string(),
        m.counts.fn_.to_string(),
    ]
}

/// One row per named run (method, group or ablation).
pub fn metrics_table(rows: &[(String, EvalMetrics)], seed: Option<u64>, fingerprint: &str) -> String {
    let body = tsv(
        &["run", "accuracy", "recall", "specificity", "tp", "fp", "tn", "fn"],
        rows.iter()
            .map(|(name, m)| std::iter::once(name.clone()).chain(metric_cells(m)).collect())
            .collect(),
    );
    header_lines(seed, fingerprint) + &body
}

pub fn sweep_table(rows: &[SweepRow], seed: Option<u64>, fingerprint: &str) -> String {
    let body = tsv(
        &["extra_m", "accuracy", "recall", "specificity", "tp", "fp", "tn", "fn", "contribution_ratio"],
        rows.iter()
            .map(|r| {
                std::iter::once(r.extra_m.to_string())
                    .chain(metric_cells(&r.metrics))
                    .chain(std::iter::once(fmt_opt(r.contribution_ratio)))
                    .collect()
            })
            .collect(),
    );
    header_lines(seed, fingerprint) + &body
}

/// Comma-separated `(extra_count, contribution_ratio)` for plotting.
pub fn contribution_curve(rows: &[SweepRow], seed: Option<u64>, fingerprint: &str) -> String {
    let pairs: Vec<(usize, Option<f64>)> = rows.iter().map(|r| (r.extra_m, r.contribution_ratio)).collect();
    header_lines(seed, fingerprint) + &crate::audit::contribution_csv(&pairs)
}

/// Fingerprint of a run without verifying anything.
pub fn fingerprint(dataset: &Dataset, config: &PipelineConfig, stance: Arc<dyn StanceProvider>) -> Result<String> {
    Ok(Verifier::new(&dataset.corpus, &dataset.index, config.clone(), stance)?
        .config_fingerprint()
        .to_owned())
}
