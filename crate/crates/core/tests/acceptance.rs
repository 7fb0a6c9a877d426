//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.

use std::collections::{BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{Months, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ragaudit_core::claims::{extract_claims, tf_cosine, ClaimKind, RuleSegmenter, Segmenter, TfCosine};
use ragaudit_core::corpus::{Article, Corpus, RagOutput};
use ragaudit_core::harness::{run_ablation, sweep_extra_evidence, Ablation, Dataset, EvalMetrics};
use ragaudit_core::heterogeneity::{
    adjudicate, cochran_q, tau_squared_dl, verdict, ClaimLabel, FilterRule, HeterogeneityConfig,
    HeterogeneityError, Origin, ResponseLabel, WeightedStudy,
};
use ragaudit_core::claims::Claim;
use ragaudit_core::reliability::{score_article, Rubric};
use ragaudit_core::retrieval::{Bm25Params, FieldWeights, Index};
use ragaudit_core::stance::{LexicalBaseline, Stance, StanceProvider};
use ragaudit_core::synth::{generate, SynthConfig, SynthDataset};
use ragaudit_core::text::content_tokens;
use ragaudit_core::PipelineConfig;

type Check = Result<String, String>;

fn today() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 3, 15).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn stance(y: i8) -> Stance {
    Stance::try_from(y).unwrap()
}

fn claim(id: &str) -> Claim {
    Claim {
        id: id.into(),
        text: format!("claim {id}"),
        kind: ClaimKind::Ranked,
        rank_score: None,
        source_span: None,
    }
}

/// Every (y, r) assignment with 1 ≤ k ≤ 4, y ∈ {−1,0,1}, r ∈ {1..7}.
fn grid(mut f: impl FnMut(&[i8], &[u8])) -> usize {
    let mut n = 0;
    for k in 1..=4u32 {
        for ycode in 0..3usize.pow(k) {
            let ys: Vec<i8> = (0..k).map(|i| (ycode / 3usize.pow(i) % 3) as i8 - 1).collect();
            for rcode in 0..7usize.pow(k) {
                let rs: Vec<u8> = (0..k).map(|i| (rcode / 7usize.pow(i) % 7) as u8 + 1).collect();
                f(&ys, &rs);
                n += 1;
            }
        }
    }
    n
}

fn studies(ys: &[i8], rs: &[u8], cfg: &HeterogeneityConfig) -> Vec<WeightedStudy> {
    ys.iter()
        .zip(rs)
        .enumerate()
        .map(|(i, (&y, &r))| cfg.study(&format!("s{i}"), stance(y), r, Origin::Extra))
        .collect()
}

/// Brute-force Q and τ² straight from sums of raw weights; `None` τ² when the
/// denominator vanishes.
fn brute_q_tau(ys: &[i8], rs: &[u8]) -> (f64, f64, Option<f64>) {
    let w: Vec<f64> = rs.iter().map(|&r| r as f64).collect();
    let y: Vec<f64> = ys.iter().map(|&v| v as f64).collect();
    let s0: f64 = w.iter().sum();
    let s1: f64 = w.iter().zip(&y).map(|(w, y)| w * y).sum();
    let s2: f64 = w.iter().zip(&y).map(|(w, y)| w * y * y).sum();
    let sw2: f64 = w.iter().map(|w| w * w).sum();
    let mean = s1 / s0;
    let q = s2 - s1 * s1 / s0;
    let c = s0 - sw2 / s0;
    let k = ys.len() as f64;
    let tau = (c > 1e-9).then(|| ((q - (k - 1.0)) / c).max(0.0));
    (mean, q.max(0.0), tau)
}

fn c1_q_tau_oracle() -> Check {
    let start = Instant::now();
    let cfg = HeterogeneityConfig::default();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let n = grid(|ys, rs| {
        let s = studies(ys, rs, &cfg);
        let (mean, q, tau) = brute_q_tau(ys, rs);
        let got = cochran_q(&s).unwrap();
        let dq = (got.q_total - q).abs().max((got.weighted_mean - mean).abs());
        worst = worst.max(dq);
        let tau_ok = match (tau_squared_dl(&got, &s), tau) {
            (Ok(t), Some(e)) => {
                worst = worst.max((t - e).abs());
                (t - e).abs() <= 1e-9
            }
            (Err(HeterogeneityError::DegenerateDenominator(_)), None) => true,
            _ => false,
        };
        if dq > 1e-9 || !tau_ok {
            failures.push(format!("{ys:?} {rs:?}"));
        }
    });
    let elapsed = start.elapsed();
    ensure(failures.is_empty(), || format!("{} mismatches, first {}", failures.len(), failures[0]))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{n} cases, max abs diff {worst:.2e}, {elapsed:.2?}"))
}

fn c2_sign_rule() -> Check {
    let base = HeterogeneityConfig::default();
    let unfiltered = HeterogeneityConfig {
        filter: FilterRule::disabled(),
        ..base.clone()
    };
    let sign = |m: i64| match m.signum() {
        1 => ClaimLabel::Supported,
        -1 => ClaimLabel::Refuted,
        _ => ClaimLabel::Unverifiable,
    };
    let c = claim("c0");
    let mut mismatches_all = 0usize;
    let mut mismatches_kept = 0usize;
    let n = grid(|ys, rs| {
        let literal: i64 = ys.iter().zip(rs).map(|(&y, &r)| y as i64 * r as i64).sum();
        let a = adjudicate(&c, vec![], studies(ys, rs, &unfiltered), &unfiltered).unwrap();
        if a.label != sign(literal) {
            mismatches_all += 1;
        }
        let a = adjudicate(&c, vec![], studies(ys, rs, &base), &base).unwrap();
        let kept: i64 = a.studies.iter().map(|s| s.y.value() as i64 * s.reliability as i64).sum();
        if a.label != sign(kept) {
            mismatches_kept += 1;
        }
    });
    ensure(mismatches_all == 0 && mismatches_kept == 0, || {
        format!("unfiltered mismatches {mismatches_all}, filtered mismatches {mismatches_kept}")
    })?;
    Ok(format!("{n} cases, 0 mismatches unfiltered and over filtered survivors"))
}

fn c3_worked_values() -> Check {
    let s: Vec<WeightedStudy> = [(1i8, 2.0), (1, 2.0), (-1, 1.0)]
        .iter()
        .enumerate()
        .map(|(i, &(y, w))| WeightedStudy {
            article_id: format!("s{i}"),
            y: stance(y),
            reliability: w as u8,
            v: 1.0,
            w,
            origin: Origin::Extra,
        })
        .collect();
    let q = cochran_q(&s).unwrap();
    let tau = tau_squared_dl(&q, &s).unwrap();
    let got = (q.weighted_mean, q.q_total, tau);
    let ok = (got.0 - 0.6).abs() < 1e-12 && (got.1 - 3.2).abs() < 1e-12 && (got.2 - 0.375).abs() < 1e-12;
    ensure(ok, || format!("got {got:?}"))?;
    Ok(format!("mean={:.12} Q={:.12} tau2={:.12}", got.0, got.1, got.2))
}

fn c4_verdict_rule() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = HeterogeneityConfig::default();
    let mut refuted_seen = 0;
    for trial in 0..10_000 {
        let n_claims = rng.random_range(1..=5);
        let adjs: Vec<_> = (0..n_claims)
            .map(|i| {
                let k = rng.random_range(0..=6);
                let ys: Vec<i8> = (0..k).map(|_| rng.random_range(-1..=1)).collect();
                let rs: Vec<u8> = (0..k).map(|_| rng.random_range(0..=7)).collect();
                adjudicate(&claim(&format!("c{i}")), vec![], studies(&ys, &rs, &cfg), &cfg).unwrap()
            })
            .collect();
        let any_refuted = adjs.iter().any(|a| a.label == ClaimLabel::Refuted);
        refuted_seen += usize::from(any_refuted);
        let expected = if any_refuted {
            ResponseLabel::Incorrect
        } else {
            ResponseLabel::Correct
        };
        ensure(verdict(&adjs) == expected, || format!("trial {trial} violated"))?;
    }
    Ok(format!("10000 trials, 0 violations ({refuted_seen} with a refuted claim)"))
}

fn art(id: &str, title: &str, abs: &str) -> Article {
    Article {
        id: id.into(),
        title: title.into(),
        abstract_text: abs.into(),
        mesh_headings: vec![],
        publication_types: vec![],
        date_revised: today(),
    }
}

fn c5_retrieval() -> Check {
    let start = Instant::now();
    // hand example: "statin" 3× in A's abstract, once in B's, never in C's
    let docs = vec![
        art("A", "Lipid care", "statin dose; statin adherence; statin safety"),
        art("B", "Lipid care", "statin use among adults with diabetes"),
        art("C", "Lipid care", "blood pressure among adults with diabetes"),
    ];
    let idx = Index::build(&docs, Bm25Params::default(), FieldWeights::default()).unwrap();
    let hits = idx.query("statin", 15, &HashSet::new());
    let ids: Vec<&str> = hits.iter().map(|h| h.id.as_str()).collect();
    ensure(ids == ["A", "B"], || format!("ranking {ids:?}"))?;
    // lengths: title 2 tokens ×2 = 4, abstract 6 tokens → 10 for every doc
    let (k1, b, n, df, avgdl, dl) = (1.2f64, 0.75f64, 3.0f64, 2.0f64, 10.0f64, 10.0f64);
    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
    let hand = |tf: f64| idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
    ensure((hits[0].score - hand(3.0)).abs() < 1e-12, || format!("A {} vs {}", hits[0].score, hand(3.0)))?;
    ensure((hits[1].score - hand(1.0)).abs() < 1e-12, || format!("B {} vs {}", hits[1].score, hand(1.0)))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vocab: Vec<String> = (0..300).map(|i| format!("w{i:03}")).collect();
    let text = |rng: &mut ChaCha8Rng, n: usize| {
        (0..n).map(|_| vocab.choose(rng).unwrap().as_str()).collect::<Vec<_>>().join(" ")
    };
    let articles: Vec<Article> = (0..500)
        .map(|i| {
            let title = text(&mut rng, 4);
            let abs = text(&mut rng, 40);
            art(&format!("d{i:03}"), &title, &abs)
        })
        .collect();
    let corpus = Corpus::from_articles(articles, today()).map_err(|e| e.to_string())?;
    let a = Index::build(corpus.articles(), Bm25Params::default(), FieldWeights::default()).unwrap();
    let b = Index::build(corpus.articles(), Bm25Params::default(), FieldWeights::default()).unwrap();
    ensure(a.to_bytes() == b.to_bytes(), || "rebuilt index cache differs".into())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = a.save_dir(dir.path()).map_err(|e| e.to_string())?;
    let loaded = Index::load(&path).map_err(|e| e.to_string())?;
    ensure(loaded.to_bytes() == a.to_bytes(), || "loaded index differs".into())?;

    let none = HashSet::new();
    for q in 0..1000 {
        let n = rng.random_range(1..=6);
        let query = text(&mut rng, n);
        let top5 = a.query(&query, 5, &none);
        let top15 = a.query(&query, 15, &none);
        ensure(top5.len() == top15.len().min(5) && top5[..] == top15[..top5.len()], || {
            format!("query {q} {query:?} not a prefix")
        })?;
        ensure(top15.windows(2).all(|w| w[0].score >= w[1].score), || format!("query {q} unsorted"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("ranking [A, B] with hand scores, identical rebuilds, 1000 prefix queries, {elapsed:.2?}"))
}

fn dataset(d: &SynthDataset) -> Dataset {
    Dataset::new(d.corpus.clone(), d.outputs.clone()).unwrap()
}

fn c6_end_to_end(clean: &SynthDataset, injected: &SynthDataset) -> Check {
    let start = Instant::now();
    let cfg = PipelineConfig::new(today());
    let (m_clean, _) = run_ablation_free(clean, &cfg)?;
    ensure(m_clean.accuracy == 1.0, || format!("clean accuracy {:.4}", m_clean.accuracy))?;
    let (m_inj, _) = run_ablation_free(injected, &cfg)?;
    let recall = m_inj.recall.unwrap_or(0.0);
    ensure(recall >= 0.95, || format!("recall {recall:.4}"))?;
    ensure(m_inj.specificity == Some(1.0), || format!("specificity {:?}", m_inj.specificity))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "clean accuracy {:.3}; injected recall {recall:.3}, specificity {:.3} ({} injected); {elapsed:.2?}",
        m_clean.accuracy,
        m_inj.specificity.unwrap(),
        injected.kinds.iter().filter(|k| **k == ragaudit_core::synth::QueryKind::Injected).count()
    ))
}

fn run_ablation_free(d: &SynthDataset, cfg: &PipelineConfig) -> Result<(EvalMetrics, usize), String> {
    let ds = dataset(d);
    let (m, reports) = ragaudit_core::harness::evaluate_run(&ds, cfg, Arc::new(d.oracle())).map_err(|e| e.to_string())?;
    Ok((m, reports.len()))
}

fn c7_left_edge(clean: &SynthDataset, injected: &SynthDataset) -> Check {
    let cfg = PipelineConfig::new(today());
    let lexical: Arc<dyn StanceProvider> = Arc::new(LexicalBaseline::default());
    for (name, d) in [("clean", clean), ("injected", injected)] {
        for (pname, p) in [("oracle", Arc::new(d.oracle()) as Arc<dyn StanceProvider>), ("lexical", lexical.clone())] {
            let rows = sweep_extra_evidence(&dataset(d), &cfg, p, &[0]).map_err(|e| e.to_string())?;
            ensure(rows[0].contribution_ratio == Some(1.0), || {
                format!("{name}/{pname}: m=0 ratio {:?}", rows[0].contribution_ratio)
            })?;
        }
    }
    let ms = [0, 1, 2, 3, 4, 5, 9];
    let rows = sweep_extra_evidence(&dataset(injected), &cfg, Arc::new(injected.oracle()), &ms)
        .map_err(|e| e.to_string())?;
    let curve: Vec<f64> = rows.iter().map(|r| r.contribution_ratio.unwrap()).collect();
    ensure(curve.windows(2).all(|w| w[1] <= w[0]), || format!("curve {curve:?}"))?;
    ensure(curve.first() > curve.last(), || format!("flat curve {curve:?}"))?;
    let shown: Vec<String> = ms.iter().zip(&curve).map(|(m, c)| format!("{m}:{c:.3}")).collect();
    Ok(format!("m=0 ratio 1.0 on 4 dataset/provider pairs; curve {}", shown.join(" ")))
}

fn c8_ablations(injected: &SynthDataset) -> Check {
    let ds = dataset(injected);
    let cfg = PipelineConfig::new(today());
    let oracle: Arc<dyn StanceProvider> = Arc::new(injected.oracle());
    let run = |kind: Option<Ablation>, seed: u64| -> Result<EvalMetrics, String> {
        match kind {
            None => ragaudit_core::harness::evaluate_run(&ds, &cfg, oracle.clone()).map(|r| r.0),
            Some(k) => run_ablation(k, &ds, &cfg, oracle.clone(), seed).map(|r| r.0),
        }
        .map_err(|e| e.to_string())
    };
    let full = run(None, 0)?;
    let hete = run(Some(Ablation::AHete), 0)?;
    ensure(hete.specificity < full.specificity, || {
        format!("a-hete specificity {:?} vs full {:?}", hete.specificity, full.specificity)
    })?;
    let mut reli = Vec::new();
    for seed in 0..50 {
        reli.push(run(Some(Ablation::AReli), seed)?.accuracy);
    }
    let reli_mean = reli.iter().sum::<f64>() / reli.len() as f64;
    ensure(reli_mean < full.accuracy, || format!("a-reli mean {reli_mean} vs full {}", full.accuracy))?;
    let retr = run(Some(Ablation::ARetr), 0)?;
    let m0 = sweep_extra_evidence(&ds, &cfg, oracle.clone(), &[0]).map_err(|e| e.to_string())?[0].metrics;
    let bits = |m: &EvalMetrics| {
        (
            m.accuracy.to_bits(),
            m.recall.map(f64::to_bits),
            m.specificity.map(f64::to_bits),
            m.counts,
        )
    };
    ensure(bits(&retr) == bits(&m0), || format!("a-retr {retr:?} vs m=0 {m0:?}"))?;
    Ok(format!(
        "specificity full {:.3} > a-hete {:.3}; accuracy full {:.3} > a-reli mean {reli_mean:.3} (50 seeds); a-retr == m=0 bitwise",
        full.specificity.unwrap(),
        hete.specificity.unwrap(),
        full.accuracy
    ))
}

fn c9_rubric() -> Check {
    let rubric = Rubric::default();
    let t = today();
    let tokens = content_tokens("aspirin reduces stroke risk");
    let mk = |years: u32, ptype: &str, mesh: &[&str]| Article {
        id: "x".into(),
        title: "t".into(),
        abstract_text: "a".into(),
        mesh_headings: mesh.iter().map(|s| s.to_string()).collect(),
        publication_types: vec![ptype.into()],
        date_revised: t - Months::new(12 * years),
    };
    let examples = [
        (mk(1, "Meta-Analysis", &["Stroke"]), 7),
        (mk(30, "Letter", &["Humans"]), 0),
        (mk(4, "Randomized Controlled Trial", &["Aspirin"]), 5),
    ];
    for (a, want) in &examples {
        let got = score_article(&rubric, a, &tokens, t);
        ensure(got.value == *want && got.is_consistent(), || format!("expected {want}, got {got:?}"))?;
    }
    let types = ["Meta-Analysis", "Randomized Controlled Trial", "Review", "Letter", "Clinical Trial"];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..1000 {
        let mesh: &[&str] = if rng.random_bool(0.5) { &["Stroke"] } else { &["Humans"] };
        let ptype = *types.choose(&mut rng).unwrap();
        let older = rng.random_range(0..=12000u64);
        let newer = rng.random_range(0..=older);
        let mut a = mk(0, ptype, mesh);
        a.date_revised = t - chrono::Days::new(older);
        let s_old = score_article(&rubric, &a, &tokens, t);
        a.date_revised = t - chrono::Days::new(newer);
        let s_new = score_article(&rubric, &a, &tokens, t);
        ensure(s_new.value >= s_old.value, || format!("pair {i}: newer scored lower"))?;
        ensure(s_new.is_consistent() && s_old.is_consistent(), || format!("pair {i}: component sum broken"))?;
    }
    Ok("examples 7/0/5 exact; 1000 recency pairs monotone; component sums hold".into())
}

fn c10_claims() -> Check {
    let words = [
        "aspirin", "stroke", "risk", "reduces", "patients", "trial", "dose", "daily", "heart", "adults",
        "lowers", "bleeding", "benefit", "older", "evidence",
    ];
    let seg = RuleSegmenter::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut max_claims = 0;
    for case in 0..500 {
        let n_sent = rng.random_range(1..=8);
        let sentences: Vec<String> = (0..n_sent)
            .map(|_| {
                let n = rng.random_range(2..=7);
                let body: Vec<&str> = (0..n).map(|_| *words.choose(&mut rng).unwrap()).collect();
                let mut s = body.join(" ");
                s[..1].make_ascii_uppercase();
                s + "."
            })
            .collect();
        let response = sentences.join(" ");
        let question = format!(
            "Does {} {} {}?",
            words.choose(&mut rng).unwrap(),
            words.choose(&mut rng).unwrap(),
            words.choose(&mut rng).unwrap()
        );
        let answer = rng.random_bool(0.5).then(|| sentences.choose(&mut rng).unwrap().clone());
        let out = RagOutput {
            id: None,
            question: question.clone(),
            response_text: response.clone(),
            chosen_answer: answer.clone(),
            given_evidence: vec![],
            gold_label: None,
        };
        let claims = extract_claims(&out, &seg, &TfCosine);
        max_claims = max_claims.max(claims.len());
        ensure(claims.len() <= 5, || format!("case {case}: {} claims", claims.len()))?;
        ensure(seg.segment(&response).len() == n_sent, || format!("case {case}: segmentation"))?;

        // brute force: score every sentence, order by (score desc, position asc)
        let mut scored: Vec<(usize, f64)> =
            sentences.iter().enumerate().map(|(i, s)| (i, tf_cosine(s, &question))).collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let main_source = match &answer {
            Some(a) => a.clone(),
            None => sentences[scored[0].0].clone(),
        };
        let expected: Vec<(String, f64)> = scored
            .iter()
            .filter(|(i, _)| sentences[*i] != main_source)
            .take(4)
            .map(|&(i, s)| (sentences[i].clone(), s))
            .collect();
        let got: Vec<(String, f64)> = claims
            .iter()
            .filter(|c| c.kind == ClaimKind::Ranked)
            .map(|c| (c.text.clone(), c.rank_score.unwrap()))
            .collect();
        ensure(got == expected, || format!("case {case}: {got:?} vs {expected:?}"))?;
        for c in claims.iter().filter(|c| c.kind == ClaimKind::Ranked) {
            let span = c.source_span.unwrap();
            ensure(span.slice(&response) == c.text, || format!("case {case}: span mismatch"))?;
        }
        let main: BTreeSet<_> = claims.iter().filter(|c| c.kind == ClaimKind::Main).map(|c| &c.id).collect();
        ensure(main.len() == 1, || format!("case {case}: {} main claims", main.len()))?;
    }
    Ok(format!("500 responses match brute-force top-4; max {max_claims} claims"))
}

type Criterion<'a> = Box<dyn Fn() -> Check + 'a>;

fn main() {
    let clean = generate(&SynthConfig::clean(2024, today())).expect("clean synthetic set");
    let injected = generate(&SynthConfig::injected(2024, today())).expect("injected synthetic set");

    let criteria: Vec<(&str, Criterion<'_>)> = vec![
        ("Q and tau-squared match brute force", Box::new(c1_q_tau_oracle)),
        ("claim label is the sign of the weighted vote", Box::new(c2_sign_rule)),
        ("worked heterogeneity values", Box::new(c3_worked_values)),
        ("response verdict rule", Box::new(c4_verdict_rule)),
        ("BM25 correctness and determinism", Box::new(c5_retrieval)),
        ("hermetic end-to-end", Box::new(|| c6_end_to_end(&clean, &injected))),
        ("given-evidence contribution curve", Box::new(|| c7_left_edge(&clean, &injected))),
        ("ablation contracts", Box::new(|| c8_ablations(&injected))),
        ("reliability rubric", Box::new(c9_rubric)),
        ("claim extraction", Box::new(c10_claims)),
    ];

    let total = criteria.len();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("acceptance {:>2}/{total} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("acceptance {:>2}/{total} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", total - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
