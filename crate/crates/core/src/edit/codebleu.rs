//! Code-aware similarity between an original function and its edit.
//!
//! Four equally weighted parts: token BLEU, keyword-weighted BLEU, a
//! token-kind sequence match standing in for syntax-tree matching, and a
//! def-use pair overlap standing in for data-flow matching.

use std::collections::{BTreeSet, HashMap};

use crate::ir::lexer::is_keyword;
use crate::ir::{lex, Token, TokenKind};
use crate::rank::{bleu_tokens, brevity_penalty, clipped_matches, lcs_len, MAX_NGRAM};

pub const KEYWORD_WEIGHT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CodeBleuParts {
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub syntax: f64,
    /// `None` when neither side has any def-use pair.
    pub dataflow: Option<f64>,
    pub score: f64,
}

fn code_tokens(source: &str) -> Option<Vec<Token>> {
    let toks = lex(source).ok()?;
    Some(toks.into_iter().filter(|t| t.kind != TokenKind::Comment).collect())
}

fn weight(token: &str) -> f64 {
    if is_keyword(token) {
        KEYWORD_WEIGHT
    } else {
        1.0
    }
}

/// BLEU whose unigram precision counts keyword matches five times.
pub fn weighted_bleu(reference: &[&str], candidate: &[&str]) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *ref_counts.entry(t).or_default() += 1;
    }
    let mut cand_counts: HashMap<&str, usize> = HashMap::new();
    for t in candidate {
        *cand_counts.entry(t).or_default() += 1;
    }
    let (mut hit, mut total) = (0.0, 0.0);
    for (t, &c) in &cand_counts {
        let w = weight(t);
        hit += w * c.min(ref_counts.get(t).copied().unwrap_or(0)) as f64;
        total += w * c as f64;
    }
    let mut log_sum = ((hit + 1.0) / (total + 1.0)).ln();
    for n in 2..=MAX_NGRAM {
        let (m, t) = clipped_matches(reference, candidate, n);
        log_sum += ((m as f64 + 1.0) / (t as f64 + 1.0)).ln();
    }
    brevity_penalty(reference.len(), candidate.len()) * (log_sum / MAX_NGRAM as f64).exp()
}

fn kind_match(a: &[Token], b: &[Token]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let ka: Vec<TokenKind> = a.iter().map(|t| t.kind).collect();
    let kb: Vec<TokenKind> = b.iter().map(|t| t.kind).collect();
    lcs_len(&ka, &kb) as f64 / ka.len().max(kb.len()) as f64
}

const ASSIGN_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<=", ">>=",
];

fn is_name(t: &Token) -> bool {
    matches!(t.kind, TokenKind::Identifier | TokenKind::TypeName) && !is_keyword(&t.text)
}

/// (defined, used) identifier pairs from assignments, initializations and
/// range-for headers.
pub fn def_use_pairs(tokens: &[Token]) -> BTreeSet<(String, String)> {
    let mut pairs = BTreeSet::new();
    for i in 0..tokens.len().saturating_sub(1) {
        let def = &tokens[i];
        if def.kind != TokenKind::Identifier || is_keyword(&def.text) {
            continue;
        }
        let op = tokens[i + 1].text.as_str();
        let range_for = op == ":" && i >= 1 && matches!(tokens[i - 1].text.as_str(), "&" | "&&" | "auto" | "*")
            || op == ":" && i >= 1 && is_name(&tokens[i - 1]);
        if !ASSIGN_OPS.contains(&op) && !range_for {
            continue;
        }
        let mut depth = 0i32;
        for t in &tokens[i + 2..] {
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" if depth == 0 => break,
                ")" | "]" | "}" => depth -= 1,
                ";" => break,
                "," if depth == 0 => break,
                _ => {}
            }
            if t.kind == TokenKind::Identifier && !is_keyword(&t.text) {
                pairs.insert((def.text.clone(), t.text.clone()));
            }
        }
    }
    pairs
}

fn dice(a: &BTreeSet<(String, String)>, b: &BTreeSet<(String, String)>) -> Option<f64> {
    if a.is_empty() && b.is_empty() {
        return None;
    }
    Some(2.0 * a.intersection(b).count() as f64 / (a.len() + b.len()) as f64)
}

/// Component breakdown; `None` when either side fails to lex.
pub fn codebleu_parts(original: &str, edited: &str) -> Option<CodeBleuParts> {
    let a = code_tokens(original)?;
    let b = code_tokens(edited)?;
    let ta: Vec<&str> = a.iter().map(|t| t.text.as_str()).collect();
    let tb: Vec<&str> = b.iter().map(|t| t.text.as_str()).collect();
    let (ngram, weighted_ngram) = if ta.is_empty() && tb.is_empty() {
        (1.0, 1.0)
    } else {
        (bleu_tokens(&ta, &tb), weighted_bleu(&ta, &tb))
    };
    let syntax = kind_match(&a, &b);
    let dataflow = dice(&def_use_pairs(&a), &def_use_pairs(&b));
    let score = match dataflow {
        Some(d) => (ngram + weighted_ngram + syntax + d) / 4.0,
        None => (ngram + weighted_ngram + syntax) / 3.0,
    };
    Some(CodeBleuParts {
        ngram,
        weighted_ngram,
        syntax,
        dataflow,
        score,
    })
}

/// Similarity of `edited` to `original` in [0, 1]; 0 when either fails to
/// lex. Identical inputs score exactly 1.
pub fn codebleu(original: &str, edited: &str) -> f64 {
    codebleu_parts(original, edited).map_or(0.0, |p| p.score.clamp(0.0, 1.0))
}
