//! Evidence-aggregating verifier for retrieval-augmented medical QA.
//!
//! A response from an upstream RAG system is decomposed into claims, each
//! claim is checked against the evidence the system supplied plus extra
//! articles retrieved from a local corpus, and per-article stance verdicts
//! are pooled with a reliability-weighted heterogeneity analysis. The result
//! is a correct/incorrect label for the response and an audit of how the
//! supplied evidence contributed to it.
//!
//! Module map:
//!
//! - [`corpus`]: article and RAG-output records, line-delimited JSON I/O
//! - [`retrieval`]: BM25 index over title, abstract and MeSH headings
//! - [`reliability`]: 0–7 rubric from revision date, publication type, MeSH
//! - [`claims`]: sentence segmentation, similarity ranking, claim extraction
//! - [`stance`]: stance providers (lexical baseline, planted oracle, HTTP)
//! - [`heterogeneity`]: Cochran's Q, DerSimonian–Laird τ², study filtering,
//!   claim adjudication and the response verdict
//! - [`audit`]: grading of the supplied evidence
//! - [`pipeline`]: end-to-end verification and the report format
//! - [`harness`]: metrics, extra-evidence sweeps, ablations, evidence groups
//! - [`synth`]: seeded synthetic benchmark with planted stances

pub mod audit;
pub mod claims;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod heterogeneity;
pub mod par;
pub mod pipeline;
#[cfg(feature = "http")]
pub mod provider;
pub mod reliability;
pub mod retrieval;
pub mod stance;
pub mod synth;
pub mod text;

pub use crate::corpus::{Article, Corpus, RagOutput};
pub use crate::error::{Error, ErrorKind, ProviderError, Result};
pub use crate::heterogeneity::{ClaimLabel, ResponseLabel};
pub use crate::par::Execution;
pub use crate::pipeline::{PipelineConfig, VerificationReport, Verifier};
