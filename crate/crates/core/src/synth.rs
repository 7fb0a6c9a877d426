//! Seeded synthetic benchmark with planted stances and known gold labels.
//!
//! Every query gets its own topic (`drugNNNN` / `condNNNN`). Articles about a
//! topic mention both tokens; questions and responses mention them too but
//! otherwise draw from a vocabulary disjoint from the article text, so BM25
//! retrieval for a claim returns exactly that topic's articles. Reliability
//! is controlled through revision date, publication type and MeSH headings.
//!
//! Query kinds:
//!
//! - `Correct`: given and pool evidence all support.
//! - `CorrectNoisy`: as above plus one reliability-1 contradictor in the pool.
//! - `Incorrect`: everything contradicts.
//! - `Injected`: the response is wrong, its given evidence supports it with
//!   low reliability (1–3), and the pool holds 3–9 contradictors of
//!   reliability 4–7. Extra evidence flips the verdict once at most three
//!   contradictors are admitted.

use std::path::{Path, PathBuf};

use chrono::{Months, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{to_jsonl, write_file, Article, Corpus, EvidenceEntry, RagOutput, RagRecord};
use crate::error::{Error, Result};
use crate::reliability::ReliabilityScore;
use crate::stance::{PlantedStance, PlantedStances, Stance};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const OUTPUTS_FILE: &str = "rag_outputs.jsonl";
pub const STANCES_FILE: &str = "stances.jsonl";

const ARTICLE_WORDS: &[&str] = &[
    "cohort", "placebo", "randomized", "baseline", "endpoint", "incidence", "mortality", "adverse",
    "dose", "participants", "hazard", "interval", "enrolled", "measured", "assessed", "arm", "sample",
    "pooled", "registry", "outcome",
];

const RESPONSE_TEMPLATES: &[&str] = &[
    "Treatment with {d} improves {c} overall.",
    "Clinicians often recommend {d} for {c}.",
    "The evidence suggests {d} shows benefit.",
    "People taking {d} generally do better.",
    "Therapy using {d} is considered helpful.",
    "Overall {d} remains the preferred answer.",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub queries: usize,
    pub seed: u64,
    /// Share of gold-incorrect queries built as [`QueryKind::Injected`].
    pub injection_rate: f64,
    /// Share of gold-correct queries built as [`QueryKind::CorrectNoisy`].
    pub noise_rate: f64,
    /// Articles unrelated to any query.
    pub distractors: usize,
    pub today: NaiveDate,
}

impl SynthConfig {
    pub fn clean(seed: u64, today: NaiveDate) -> Self {
        SynthConfig {
            queries: 200,
            seed,
            injection_rate: 0.0,
            noise_rate: 0.0,
            distractors: 50,
            today,
        }
    }

    /// The contradiction-injection variant.
    pub fn injected(seed: u64, today: NaiveDate) -> Self {
        SynthConfig {
            injection_rate: 0.2,
            noise_rate: 0.2,
            ..Self::clean(seed, today)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Correct,
    CorrectNoisy,
    Incorrect,
    Injected,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub corpus: Corpus,
    pub records: Vec<RagRecord>,
    pub outputs: Vec<RagOutput>,
    pub stances: Vec<PlantedStance>,
    pub kinds: Vec<QueryKind>,
}

impl SynthDataset {
    pub fn oracle(&self) -> PlantedStances {
        PlantedStances::new(self.stances.iter().cloned())
    }

    /// Writes the corpus, RAG outputs and planted stances into `dir`.
    pub fn write(&self, dir: &Path) -> Result<[PathBuf; 3]> {
        let paths = [dir.join(CORPUS_FILE), dir.join(OUTPUTS_FILE), dir.join(STANCES_FILE)];
        let contents = [
            self.corpus.to_jsonl(),
            to_jsonl(&self.records),
            to_jsonl(&self.stances),
        ];
        for (path, text) in paths.iter().zip(contents) {
            write_file(path, text.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        Ok(paths)
    }
}

/// Article fields that yield the requested rubric score under the default
/// rubric: (years back, publication type, MeSH headings).
fn reliability_fields(r: u8, drug: &str, cond: &str) -> (u32, &'static str, Vec<String>) {
    let c = ReliabilityScore::from_value(r).components;
    let years = [20, 8, 4, 1][c.recency_points as usize];
    let ptype = ["Letter", "Clinical Trial", "Randomized Controlled Trial", "Meta-Analysis"][c.type_points as usize];
    let mesh = if c.mesh_points > 0 {
        vec![capitalize(drug), capitalize(cond)]
    } else {
        vec!["Humans".to_owned()]
    };
    (years, ptype, mesh)
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

struct Builder {
    rng: ChaCha8Rng,
    today: NaiveDate,
    articles: Vec<Article>,
    stances: Vec<PlantedStance>,
}

impl Builder {
    fn filler(&mut self, n: usize) -> String {
        (0..n)
            .map(|_| *ARTICLE_WORDS.choose(&mut self.rng).unwrap())
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn revised(&mut self, years: u32) -> NaiveDate {
        let back = self.today - Months::new(12 * years);
        back - chrono::Days::new(self.rng.random_range(0..30))
    }

    fn article(&mut self, topic: usize, n: usize, stance: Stance, r: u8) -> String {
        let drug = format!("drug{topic:04}");
        let cond = format!("cond{topic:04}");
        let id = format!("syn{topic:04}-{n:02}");
        let (years, ptype, mesh) = reliability_fields(r, &drug, &cond);
        let title = format!("{} in {}: {}", capitalize(&drug), cond, self.filler(3));
        let abstract_text = format!(
            "{} {} {} {}. {}.",
            capitalize(&self.filler(4)),
            drug,
            self.filler(3),
            cond,
            capitalize(&self.filler(6))
        );
        let date_revised = self.revised(years);
        self.articles.push(Article {
            id: id.clone(),
            title,
            abstract_text,
            mesh_headings: mesh,
            publication_types: vec![ptype.to_owned()],
            date_revised,
        });
        self.stances.push(PlantedStance {
            topic: drug,
            article_id: id.clone(),
            stance,
        });
        id
    }

    fn distractor(&mut self, n: usize) {
        let title = capitalize(&self.filler(4));
        let abstract_text = format!("{}.", capitalize(&self.filler(12)));
        let years = [1, 4, 8, 20][n % 4];
        let date_revised = self.revised(years);
        self.articles.push(Article {
            id: format!("dis{n:04}"),
            title,
            abstract_text,
            mesh_headings: vec!["Humans".into()],
            publication_types: vec!["Review".into()],
            date_revised,
        });
    }
}

/// Builds the dataset. Identical configs give identical datasets.
pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        today: config.today,
        articles: Vec::new(),
        stances: Vec::new(),
    };
    let mut records = Vec::with_capacity(config.queries);
    let mut kinds = Vec::with_capacity(config.queries);

    for q in 0..config.queries {
        let gold_correct = b.rng.random_bool(0.5);
        let kind = if gold_correct {
            if b.rng.random_bool(config.noise_rate) {
                QueryKind::CorrectNoisy
            } else {
                QueryKind::Correct
            }
        } else if b.rng.random_bool(config.injection_rate) {
            QueryKind::Injected
        } else {
            QueryKind::Incorrect
        };

        let mut n = 0;
        let mut next = |b: &mut Builder, stance, r| {
            n += 1;
            b.article(q, n, stance, r)
        };
        let mut given = Vec::new();
        match kind {
            QueryKind::Correct | QueryKind::CorrectNoisy => {
                for _ in 0..3 {
                    let r = b.rng.random_range(4..=7);
                    given.push(next(&mut b, Stance::Support, r));
                }
                for _ in 0..5 {
                    let r = b.rng.random_range(2..=7);
                    next(&mut b, Stance::Support, r);
                }
                if kind == QueryKind::CorrectNoisy {
                    next(&mut b, Stance::Contradict, 1);
                }
            }
            QueryKind::Incorrect => {
                for _ in 0..3 {
                    let r = b.rng.random_range(1..=7);
                    given.push(next(&mut b, Stance::Contradict, r));
                }
                for _ in 0..6 {
                    let r = b.rng.random_range(1..=7);
                    next(&mut b, Stance::Contradict, r);
                }
            }
            QueryKind::Injected => {
                let g = b.rng.random_range(1..=3);
                let rg = b.rng.random_range(1..=3);
                let c = b.rng.random_range(3..=9);
                let rc = b.rng.random_range(4..=7);
                for _ in 0..g {
                    given.push(next(&mut b, Stance::Support, rg));
                }
                for _ in 0..c {
                    next(&mut b, Stance::Contradict, rc);
                }
            }
        }

        let drug = format!("drug{q:04}");
        let cond = format!("cond{q:04}");
        let sentences = b.rng.random_range(4..=RESPONSE_TEMPLATES.len());
        let mut templates: Vec<&str> = RESPONSE_TEMPLATES.to_vec();
        templates.sort_by_key(|_| b.rng.random::<u32>());
        let response_text = templates[..sentences]
            .iter()
            .map(|t| t.replace("{d}", &drug).replace("{c}", &cond))
            .collect::<Vec<_>>()
            .join(" ");
        records.push(RagRecord {
            id: Some(format!("q{q:05}")),
            question: format!("Does {drug} help patients with {cond}?"),
            response_text,
            chosen_answer: Some("yes".into()),
            given_evidence: given.into_iter().map(|id| EvidenceEntry::Ref { id }).collect(),
            gold_label: Some(gold_correct),
        });
        kinds.push(kind);
    }
    for n in 0..config.distractors {
        b.distractor(n);
    }

    let corpus = Corpus::from_articles(b.articles, config.today)?;
    let outputs = records
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, r)| r.resolve(i + 1, &corpus))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(SynthDataset {
        corpus,
        records,
        outputs,
        stances: b.stances,
        kinds,
    })
}
