//! Claim extraction from a RAG response.
//!
//! The response is segmented into sentences, sentences are ranked by
//! similarity to the question, and up to four of them become `Ranked` claims.
//! A `Main` claim joins the question with the chosen answer (or, for
//! free-form answers, with the top-ranked sentence).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::RagOutput;
use crate::error::ProviderError;
use crate::text::tokenize;

/// Number of `Ranked` claims taken from the response.
pub const RANKED_CLAIMS: usize = 4;

/// Half-open UTF-8 byte range into the response text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    Main,
    Ranked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub text: String,
    pub kind: ClaimKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_span: Option<Span>,
}

pub trait Segmenter: Send + Sync {
    /// Ordered, non-overlapping sentence spans.
    fn segment(&self, text: &str) -> Vec<Span>;
}

pub trait SimilarityProvider: Send + Sync {
    fn tag(&self) -> &str;

    /// Similarity in `[0, 1]`.
    fn similarity(&self, a: &str, b: &str) -> Result<f64, ProviderError>;

    /// Identity used in configuration fingerprints.
    fn describe(&self) -> String {
        self.tag().to_owned()
    }
}

/// Splits after `.`, `!` or `?` when the next non-space character is an
/// uppercase letter, unless the period ends a known abbreviation or a
/// single-letter initial.
#[derive(Debug, Clone)]
pub struct RuleSegmenter {
    abbreviations: Vec<String>,
}

const ABBREVIATIONS: &[&str] = &[
    "e.g", "i.e", "dr", "drs", "fig", "figs", "al", "vs", "mr", "mrs", "ms", "prof", "no", "approx",
    "ca", "cf", "st", "jr", "sr", "inc", "ltd", "dept", "eq", "vol", "ref", "refs", "resp",
];

impl Default for RuleSegmenter {
    fn default() -> Self {
        RuleSegmenter {
            abbreviations: ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl RuleSegmenter {
    fn is_abbreviation(&self, text: &str, dot: usize) -> bool {
        let word_start = text[..dot]
            .rfind(|c: char| c.is_whitespace() || c == '(' || c == '[')
            .map_or(0, |i| i + text[i..].chars().next().map_or(1, char::len_utf8));
        let word = &text[word_start..dot];
        if word.is_empty() {
            return false;
        }
        let mut chars = word.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if c.is_uppercase() {
                return true;
            }
        }
        let lower = word.to_lowercase();
        self.abbreviations.contains(&lower)
    }
}

fn push_trimmed(text: &str, start: usize, end: usize, out: &mut Vec<Span>) {
    let piece = &text[start..end];
    let lead = piece.len() - piece.trim_start().len();
    let trimmed = piece.trim();
    if !trimmed.is_empty() {
        out.push(Span {
            start: start + lead,
            end: start + lead + trimmed.len(),
        });
    }
}

impl Segmenter for RuleSegmenter {
    fn segment(&self, text: &str) -> Vec<Span> {
        let mut spans = Vec::new();
        let mut start = 0;
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (pos, c) = chars[i];
            if matches!(c, '.' | '!' | '?') {
                let mut j = i + 1;
                while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?' | '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}') {
                    j += 1;
                }
                let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
                let mut k = j;
                while k < chars.len() && chars[k].1.is_whitespace() {
                    k += 1;
                }
                let boundary = k > j
                    && k < chars.len()
                    && chars[k].1.is_uppercase()
                    && !(c == '.' && j == i + 1 && self.is_abbreviation(text, pos));
                if boundary {
                    push_trimmed(text, start, end, &mut spans);
                    start = chars[k].0;
                    i = k;
                    continue;
                }
                i = j;
                continue;
            }
            i += 1;
        }
        push_trimmed(text, start, text.len(), &mut spans);
        spans
    }
}

/// Cosine similarity between raw term-frequency vectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct TfCosine;

pub fn tf_cosine(a: &str, b: &str) -> f64 {
    let tf = |s: &str| {
        let mut m: HashMap<String, f64> = HashMap::new();
        for t in tokenize(s) {
            *m.entry(t).or_insert(0.0) += 1.0;
        }
        m
    };
    let (ta, tb) = (tf(a), tf(b));
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let mut terms: Vec<&String> = ta.keys().filter(|k| tb.contains_key(*k)).collect();
    terms.sort();
    let dot: f64 = terms.iter().map(|t| ta[*t] * tb[*t]).sum();
    let norm = |m: &HashMap<String, f64>| {
        let mut v: Vec<f64> = m.values().copied().collect();
        v.sort_by(f64::total_cmp);
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    dot / (norm(&ta) * norm(&tb))
}

impl SimilarityProvider for TfCosine {
    fn tag(&self) -> &str {
        "tf-cosine"
    }

    fn similarity(&self, a: &str, b: &str) -> Result<f64, ProviderError> {
        Ok(tf_cosine(a, b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedSentence {
    pub span: Span,
    pub score: f64,
}

/// Scores every sentence against the question and sorts descending; equal
/// scores keep the earlier sentence first. A provider failure scores 0.
pub fn rank_sentences(
    text: &str,
    spans: &[Span],
    question: &str,
    provider: &dyn SimilarityProvider,
) -> Vec<RankedSentence> {
    let mut ranked: Vec<RankedSentence> = spans
        .iter()
        .map(|&span| {
            let score = match provider.similarity(span.slice(text), question) {
                Ok(s) if s.is_finite() => s.clamp(0.0, 1.0),
                Ok(s) => {
                    log::warn!("similarity provider {} returned {s}; using 0", provider.tag());
                    0.0
                }
                Err(e) => {
                    log::warn!("similarity provider {} failed: {e}; using 0", provider.tag());
                    0.0
                }
            };
            RankedSentence { span, score }
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.span.cmp(&b.span)));
    ranked
}

/// Main claim first (id `c0`), then up to four ranked claims (`c1`..).
pub fn extract_claims(
    output: &RagOutput,
    segmenter: &dyn Segmenter,
    similarity: &dyn SimilarityProvider,
) -> Vec<Claim> {
    let text = output.response_text.as_str();
    let spans = segmenter.segment(text);
    let ranked = rank_sentences(text, &spans, &output.question, similarity);
    let question = output.question.trim();

    let main_source = match output.chosen_answer.as_deref().map(str::trim) {
        Some(answer) if !answer.is_empty() => answer.to_owned(),
        _ => ranked
            .first()
            .map(|r| r.span.slice(text).to_owned())
            .unwrap_or_default(),
    };
    let main_text = if main_source.is_empty() {
        question.to_owned()
    } else {
        format!("{question} {main_source}")
    };

    let mut claims = vec![Claim {
        id: "c0".into(),
        text: main_text,
        kind: ClaimKind::Main,
        rank_score: None,
        source_span: None,
    }];
    claims.extend(
        ranked
            .iter()
            .filter(|r| r.span.slice(text) != main_source)
            .take(RANKED_CLAIMS)
            .enumerate()
            .map(|(i, r)| Claim {
                id: format!("c{}", i + 1),
                text: r.span.slice(text).to_owned(),
                kind: ClaimKind::Ranked,
                rank_score: Some(r.score),
                source_span: Some(r.span),
            }),
    );
    claims
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg(text: &str) -> Vec<&str> {
        RuleSegmenter::default()
            .segment(text)
            .iter()
            .map(|s| s.slice(text))
            .collect()
    }

    #[test]
    fn two_sentences() {
        assert_eq!(seg("A is true. B is false."), vec!["A is true.", "B is false."]);
    }

    #[test]
    fn decimal_is_protected() {
        assert_eq!(seg("Dosage is 2.5 mg daily."), vec!["Dosage is 2.5 mg daily."]);
    }

    #[test]
    fn no_terminator_is_one_span() {
        let text = "No terminator here";
        let spans = RuleSegmenter::default().segment(text);
        assert_eq!(spans, vec![Span { start: 0, end: text.len() }]);
    }

    #[test]
    fn abbreviations_and_initials_do_not_split() {
        assert_eq!(
            seg("See Fig. 2 for details. Dr. Smith agreed, e.g. Aspirin works. J. Doe disagreed."),
            vec![
                "See Fig. 2 for details.",
                "Dr. Smith agreed, e.g. Aspirin works.",
                "J. Doe disagreed."
            ]
        );
    }

    #[test]
    fn question_and_exclamation_marks_split() {
        assert_eq!(
            seg("Is it safe? Yes! Consult \"your doctor.\" Then rest."),
            vec!["Is it safe?", "Yes!", "Consult \"your doctor.\"", "Then rest."]
        );
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(seg("Levels rose. then fell."), vec!["Levels rose. then fell."]);
    }

    #[test]
    fn leading_and_trailing_whitespace_trimmed() {
        let text = "  First one.   Second one.  ";
        let spans = RuleSegmenter::default().segment(text);
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[0].slice(text), "First one.");
        assert_eq!(spans[1].slice(text), "Second one.");
    }

    /// Cosine over token counts, computed independently of `tf_cosine`.
    fn cosine_oracle(a: &str, b: &str) -> f64 {
        let ta = tokenize(a);
        let tb = tokenize(b);
        let mut vocab: Vec<String> = ta.iter().chain(tb.iter()).cloned().collect();
        vocab.sort();
        vocab.dedup();
        let va: Vec<f64> = vocab.iter().map(|w| ta.iter().filter(|t| *t == w).count() as f64).collect();
        let vb: Vec<f64> = vocab.iter().map(|w| tb.iter().filter(|t| *t == w).count() as f64).collect();
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 { 0.0 } else { dot / (na * nb) }
    }

    #[test]
    fn ranking_prefers_question_overlap() {
        let question = "Does aspirin reduce stroke risk?";
        let text = "The weather was recorded. Aspirin reduces stroke risk in adults.";
        let spans = RuleSegmenter::default().segment(text);
        let ranked = rank_sentences(text, &spans, question, &TfCosine);
        assert_eq!(ranked[0].span.slice(text), "Aspirin reduces stroke risk in adults.");
        let expected = cosine_oracle("Aspirin reduces stroke risk in adults.", question);
        // shared tokens: aspirin, stroke, risk -> 3 / (sqrt(6) * sqrt(5))
        assert!((expected - 3.0 / (6f64.sqrt() * 5f64.sqrt())).abs() < 1e-12);
        assert!((ranked[0].score - expected).abs() < 1e-12);
        assert_eq!(ranked[1].score, 0.0);
    }

    #[test]
    fn identical_sentences_keep_position_order() {
        let text = "Aspirin helps. Aspirin helps.";
        let spans = RuleSegmenter::default().segment(text);
        let ranked = rank_sentences(text, &spans, "aspirin", &TfCosine);
        assert_eq!(ranked[0].score, ranked[1].score);
        assert!(ranked[0].span.start < ranked[1].span.start);
    }

    #[test]
    fn single_sentence_ranking() {
        let text = "Only one sentence.";
        let spans = RuleSegmenter::default().segment(text);
        let ranked = rank_sentences(text, &spans, "one", &TfCosine);
        assert_eq!(ranked.len(), 1);
        assert!(ranked[0].score > 0.0);
    }

    struct Failing;
    impl SimilarityProvider for Failing {
        fn tag(&self) -> &str {
            "failing"
        }
        fn similarity(&self, _: &str, _: &str) -> Result<f64, ProviderError> {
            Err(ProviderError::Unavailable("down".into()))
        }
    }

    #[test]
    fn provider_failure_scores_zero() {
        let text = "B first. A second.";
        let spans = RuleSegmenter::default().segment(text);
        let ranked = rank_sentences(text, &spans, "q", &Failing);
        assert!(ranked.iter().all(|r| r.score == 0.0));
        assert_eq!(ranked[0].span.start, 0);
    }

    fn output(question: &str, response: &str, answer: Option<&str>) -> RagOutput {
        RagOutput {
            id: None,
            question: question.into(),
            response_text: response.into(),
            chosen_answer: answer.map(str::to_owned),
            given_evidence: vec![],
            gold_label: None,
        }
    }

    #[test]
    fn six_sentences_with_answer_give_five_claims() {
        let o = output(
            "Does aspirin reduce stroke risk?",
            "Aspirin reduces stroke risk. Stroke risk is lower with aspirin. Aspirin is cheap. \
             Bleeding may occur. Consult a doctor. Weather is fine.",
            Some("B) yes"),
        );
        let claims = extract_claims(&o, &RuleSegmenter::default(), &TfCosine);
        assert_eq!(claims.len(), 5);
        assert_eq!(claims[0].kind, ClaimKind::Main);
        assert_eq!(claims[0].text, "Does aspirin reduce stroke risk? B) yes");
        assert!(claims[1..].iter().all(|c| c.kind == ClaimKind::Ranked));
        for c in &claims[1..] {
            assert_eq!(c.source_span.unwrap().slice(&o.response_text), c.text);
        }
    }

    #[test]
    fn short_response_without_answer() {
        let o = output(
            "Does aspirin reduce stroke risk?",
            "Aspirin reduces stroke risk. It is cheap.",
            None,
        );
        let claims = extract_claims(&o, &RuleSegmenter::default(), &TfCosine);
        assert_eq!(
            claims[0].text,
            "Does aspirin reduce stroke risk? Aspirin reduces stroke risk."
        );
        // top sentence is the main-claim source, so only one ranked claim remains
        assert_eq!(claims.len(), 2);
        assert_eq!(claims[1].text, "It is cheap.");
    }

    #[test]
    fn sentence_equal_to_answer_is_not_ranked() {
        let o = output(
            "Does aspirin reduce stroke risk?",
            "Aspirin reduces stroke risk. It is cheap. Ask first.",
            Some("Aspirin reduces stroke risk."),
        );
        let claims = extract_claims(&o, &RuleSegmenter::default(), &TfCosine);
        assert!(claims[1..].iter().all(|c| c.text != "Aspirin reduces stroke risk."));
        assert_eq!(claims.len(), 3);
    }

    proptest! {
        #[test]
        fn spans_are_ordered_disjoint_and_trimmed(words in prop::collection::vec("[A-Za-z]{1,6}[.!?]? ?", 1..30)) {
            let text = words.concat();
            prop_assume!(!text.trim().is_empty());
            let spans = RuleSegmenter::default().segment(&text);
            prop_assert!(!spans.is_empty());
            for w in spans.windows(2) {
                prop_assert!(w[0].end <= w[1].start);
            }
            for s in &spans {
                let piece = s.slice(&text);
                prop_assert_eq!(piece, piece.trim());
                prop_assert!(!piece.is_empty());
            }
            let covered: String = spans.iter().map(|s| s.slice(&text)).collect::<Vec<_>>().join("");
            let nonspace = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
            prop_assert_eq!(nonspace(&covered), nonspace(&text));
        }

        #[test]
        fn tf_cosine_matches_oracle(a in "[a-d ]{0,30}", b in "[a-d ]{0,30}") {
            prop_assert!((tf_cosine(&a, &b) - cosine_oracle(&a, &b)).abs() < 1e-12);
        }
    }
}
