use std::collections::{BTreeSet, HashMap};

use crate::embedding::{BowVector, NormalizedTokens};

pub const MAX_NGRAM: usize = 4;

/// Control-flow keywords compared by [`flow_cosine`].
pub const FLOW_KEYWORDS: &[&str] = &[
    "for", "while", "do", "if", "else", "switch", "case", "break", "continue", "goto", "return",
    "try", "catch",
];

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut out = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *out.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    out
}

/// Clipped n-gram matches and candidate n-gram total.
pub(crate) fn clipped_matches<T: AsRef<str>>(reference: &[T], candidate: &[T], n: usize) -> (usize, usize) {
    let r = ngram_counts(reference, n);
    let c = ngram_counts(candidate, n);
    let matches = c
        .iter()
        .map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, candidate.len().saturating_sub(n - 1))
}

pub(crate) fn brevity_penalty(ref_len: usize, cand_len: usize) -> f64 {
    if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

/// BLEU of `candidate` against `reference` over 1..=4-grams with add-one
/// smoothing on every precision and the standard brevity penalty. An empty
/// candidate scores 0.
pub fn bleu_tokens<T: AsRef<str>>(reference: &[T], candidate: &[T]) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let log_sum: f64 = (1..=MAX_NGRAM)
        .map(|n| {
            let (m, total) = clipped_matches(reference, candidate, n);
            ((m as f64 + 1.0) / (total as f64 + 1.0)).ln()
        })
        .sum();
    brevity_penalty(reference.len(), candidate.len()) * (log_sum / MAX_NGRAM as f64).exp()
}

/// The query is the reference side.
pub fn bleu(q: &NormalizedTokens, c: &NormalizedTokens) -> f64 {
    bleu_tokens(q.as_slice(), c.as_slice())
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F1. Both empty is a perfect match; one empty scores 0.
pub fn rouge_l(q: &NormalizedTokens, c: &NormalizedTokens) -> f64 {
    match (q.is_empty(), c.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let lcs = lcs_len(q.as_slice(), c.as_slice()) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let precision = lcs / c.len() as f64;
    let recall = lcs / q.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Intersection over union of the type sets, guarded so that two empty
/// sets score 0.
pub fn type_overlap(tq: &BTreeSet<String>, tc: &BTreeSet<String>) -> f64 {
    let inter = tq.intersection(tc).count();
    let union = tq.union(tc).count();
    inter as f64 / union.max(1) as f64
}

/// Cosine similarity of the control-flow keyword sub-vectors; 0 when either
/// side has no control flow.
pub fn flow_cosine(q: &BowVector, c: &BowVector) -> f64 {
    let qf = q.restrict(FLOW_KEYWORDS.iter().copied());
    let cf = c.restrict(FLOW_KEYWORDS.iter().copied());
    if qf.is_zero() || cf.is_zero() {
        return 0.0;
    }
    qf.cosine(&cf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toks(s: &str) -> NormalizedTokens {
        s.split_whitespace().collect()
    }

    fn bow(pairs: &[(&str, u32)]) -> BowVector {
        BowVector::from_counts(pairs.iter().map(|(t, c)| (t.to_string(), *c)).collect())
    }

    #[test]
    fn bleu_identity_and_empty() {
        let q = toks("a b c d e");
        assert_eq!(bleu(&q, &q), 1.0);
        assert_eq!(bleu(&q, &toks("")), 0.0);
    }

    #[test]
    fn bleu_abcd_vs_abce() {
        // Frozen from an independent Python evaluation of the same
        // definition: (4/5 * 3/4 * 2/3 * 1/2) ** 0.25 = 0.2 ** 0.25.
        let v = bleu(&toks("a b c d"), &toks("a b c e"));
        assert_abs_diff_eq!(v, 0.668_740_304_976_422, epsilon = 1e-6);
    }

    #[test]
    fn rouge_cases() {
        let q = toks("a b c d");
        assert_eq!(rouge_l(&q, &q), 1.0);
        assert_eq!(rouge_l(&q, &toks("x y z")), 0.0);
        assert_abs_diff_eq!(rouge_l(&q, &toks("a c d")), 6.0 / 7.0, epsilon = 1e-12);
        assert_eq!(rouge_l(&toks(""), &toks("")), 1.0);
        assert_eq!(rouge_l(&toks(""), &q), 0.0);
    }

    #[test]
    fn type_overlap_cases() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(type_overlap(&s(&["vector", "string"]), &s(&["vector"])), 0.5);
        assert_eq!(type_overlap(&s(&["a", "b"]), &s(&["a", "b"])), 1.0);
        assert_eq!(type_overlap(&s(&[]), &s(&[])), 0.0);
    }

    #[test]
    fn flow_cases() {
        let q = bow(&[("for", 2), ("if", 1), ("id0", 7)]);
        assert_eq!(flow_cosine(&q, &bow(&[("for", 2), ("if", 1)])), 1.0);
        assert_eq!(flow_cosine(&bow(&[("for", 1)]), &bow(&[("while", 1)])), 0.0);
        assert_abs_diff_eq!(
            flow_cosine(&bow(&[("for", 1), ("if", 1)]), &bow(&[("for", 1)])),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        assert_eq!(flow_cosine(&bow(&[("id0", 1)]), &bow(&[("for", 1)])), 0.0);
    }

    #[test]
    fn lcs_small() {
        assert_eq!(lcs_len(&[1, 2, 3, 4], &[1, 3, 4]), 3);
        assert_eq!(lcs_len::<u8>(&[], &[1]), 0);
    }
}
