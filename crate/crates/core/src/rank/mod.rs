//! Syntactic re-ranking of retrieved candidates.

mod metrics;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{
    bleu, bleu_tokens, flow_cosine, lcs_len, rouge_l, type_overlap, FLOW_KEYWORDS, MAX_NGRAM,
};
pub(crate) use metrics::{brevity_penalty, clipped_matches};

use crate::embedding::{embed_diff_query, embed_function, BowVector, EmbedError, NormalizedTokens};
use crate::ir::{declared_types, lex_lossy, FunctionRecord, Token, TokenKind};

/// Everything the score needs from one side of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeFeatures {
    pub tokens: NormalizedTokens,
    pub bow: BowVector,
    pub types: BTreeSet<String>,
    /// Control-flow keyword counts. Taken from the tokens rather than the
    /// bag of words, whose stoplist drops `return`.
    pub flow: BowVector,
}

impl CodeFeatures {
    pub fn of_function(record: &FunctionRecord) -> Self {
        let (tokens, bow) = embed_function(record);
        Self {
            flow: flow_vector(&tokens),
            tokens,
            bow,
            types: record.type_set.clone(),
        }
    }

    /// Features of the before side of a diff. Types are whatever the
    /// declarations on those lines name.
    pub fn of_diff(diff_text: &str) -> Result<Self, EmbedError> {
        let (tokens, bow) = embed_diff_query(diff_text, &crate::embedding::default_stoplist())?;
        let text = crate::embedding::diff_before_text(diff_text)?;
        Ok(Self {
            flow: flow_vector(&tokens),
            tokens,
            bow,
            types: types_of_text(&text),
        })
    }
}

/// Counts of the control-flow keywords among normalized tokens.
pub fn flow_vector(tokens: &NormalizedTokens) -> BowVector {
    let mut counts = std::collections::BTreeMap::new();
    for t in tokens.tokens.iter().filter(|t| FLOW_KEYWORDS.contains(&t.as_str())) {
        *counts.entry(t.clone()).or_insert(0) += 1;
    }
    BowVector::from_counts(counts)
}

/// Declared types of loose source text.
pub fn types_of_text(text: &str) -> BTreeSet<String> {
    let raw = lex_lossy(text);
    let code: Vec<&Token> = raw.iter().filter(|t| t.kind != TokenKind::Comment).collect();
    declared_types(&code)
}

/// The four components and their mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParts {
    pub b: f64,
    pub r: f64,
    pub t: f64,
    pub f: f64,
    pub s: f64,
}

pub fn syntactic_score(q: &CodeFeatures, c: &CodeFeatures) -> ScoreParts {
    let b = bleu(&q.tokens, &c.tokens);
    let r = rouge_l(&q.tokens, &c.tokens);
    let t = type_overlap(&q.types, &c.types);
    let f = flow_cosine(&q.flow, &c.flow);
    ScoreParts {
        b,
        r,
        t,
        f,
        s: (b + r + t + f) / 4.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub id: String,
    pub ann_distance: f64,
    pub b: f64,
    pub r: f64,
    pub t: f64,
    pub f: f64,
    pub s: f64,
}

/// A retrieved candidate awaiting scoring.
pub struct Candidate<'a> {
    pub id: &'a str,
    pub ann_distance: f64,
    pub features: &'a CodeFeatures,
}

/// Scores every candidate and sorts by score descending, then ANN distance
/// ascending, then id.
pub fn rank(query: &CodeFeatures, candidates: &[Candidate<'_>]) -> Vec<RankedCandidate> {
    let mut out: Vec<RankedCandidate> = candidates
        .par_iter()
        .map(|c| {
            let p = syntactic_score(query, c.features);
            RankedCandidate {
                id: c.id.to_string(),
                ann_distance: c.ann_distance,
                b: p.b,
                r: p.r,
                t: p.t,
                f: p.f,
                s: p.s,
            }
        })
        .collect();
    out.sort_by(|x, y| {
        y.s.total_cmp(&x.s)
            .then(x.ann_distance.total_cmp(&y.ann_distance))
            .then_with(|| x.id.cmp(&y.id))
    });
    out
}

/// Features for a whole corpus, keyed by function id.
pub fn corpus_features(
    records: &[FunctionRecord],
) -> std::collections::HashMap<String, CodeFeatures> {
    records
        .par_iter()
        .map(|r| (r.id.clone(), CodeFeatures::of_function(r)))
        .collect()
}

pub fn looks_like_diff(text: &str) -> bool {
    text.lines().any(|l| l.starts_with("@@"))
}
