//! Normalized token streams, bag-of-words vectors and the ANN index.

mod bow;
mod index;
mod normalize;

use std::collections::BTreeSet;

use thiserror::Error;

pub use bow::{default_stoplist, embed_bow, is_punctuation, BowVector, DEFAULT_STOPLIST};
pub use index::{build_index, Hit, IndexConfig, IndexEntry, Partition, VectorIndex};
pub use normalize::{normalize, NormalizedTokens, NUMBER_PLACEHOLDER, STRING_PLACEHOLDER};

use crate::edit::diff::parse_diff;
use crate::ir::{lex_lossy, FunctionRecord};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("index has no entry with a non-zero vector")]
    EmptyIndex,
    #[error("duplicate entry id {0}")]
    DuplicateId(String),
    #[error("query vector is zero")]
    ZeroQueryVector,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("diff has no non-whitespace changes")]
    EmptyDiff,
    #[error("index io on {0}: {1}")]
    Io(String, std::io::Error),
    #[error("index json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Normalized tokens and default-stoplist BOW vector of a function.
pub fn embed_function(record: &FunctionRecord) -> (NormalizedTokens, BowVector) {
    let norm = normalize(&record.tokens);
    let bow = embed_bow(&norm, &default_stoplist());
    (norm, bow)
}

/// The lines a diff query is about: context and removed lines of every
/// hunk that changes something beyond whitespace.
pub fn diff_before_text(diff_text: &str) -> Result<String, EmbedError> {
    let squash = |s: &str| s.split_whitespace().collect::<String>();
    let mut text = String::new();
    for h in parse_diff(diff_text) {
        let removed: Vec<String> = h.removed().map(squash).filter(|s| !s.is_empty()).collect();
        let added: Vec<String> = h.added().map(squash).filter(|s| !s.is_empty()).collect();
        if removed == added {
            continue;
        }
        for line in h.old_lines() {
            text.push_str(line);
            text.push('\n');
        }
    }
    if text.trim().is_empty() {
        return Err(EmbedError::EmptyDiff);
    }
    Ok(text)
}

/// Bag of words over the normalized before side of a diff's changed hunks.
pub fn embed_diff_query(
    diff_text: &str,
    stoplist: &BTreeSet<String>,
) -> Result<(NormalizedTokens, BowVector), EmbedError> {
    let text = diff_before_text(diff_text)?;
    let norm = normalize(&lex_lossy(&text));
    let bow = embed_bow(&norm, stoplist);
    Ok((norm, bow))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edit::diff::unified_diff;

    #[test]
    fn diff_query_support_is_local() {
        let mut before: Vec<String> = (0..50).map(|i| format!("  int v{i} = f{i}(x);")).collect();
        before.insert(0, "void F() {".into());
        before.push("}".into());
        let before_text = before.join("\n") + "\n";
        let mut after = before.clone();
        after[25] = "  int v24 = g(x);".into();
        after[26] = "  int v25 = g(y);".into();
        let after_text = after.join("\n") + "\n";
        let d = unified_diff(&before_text, &after_text, None);
        let (_, q) = embed_diff_query(&d, &default_stoplist()).unwrap();

        // Allowed support: tokens of the two edited lines plus three lines
        // of context on each side.
        let window = before[22..=29].join("\n");
        let (_, allowed) = {
            let n = normalize(&lex_lossy(&window));
            (n.clone(), embed_bow(&n, &default_stoplist()))
        };
        for term in q.counts.keys() {
            assert!(allowed.get(term) > 0, "{term} outside the hunk window");
        }
        assert!(q.l2_norm > 0.0);
    }

    #[test]
    fn whitespace_only_diff_is_empty() {
        let d = unified_diff("int x = 1;\n", "int  x =  1;\n", None);
        assert!(matches!(
            embed_diff_query(&d, &default_stoplist()),
            Err(EmbedError::EmptyDiff)
        ));
        assert!(matches!(
            embed_diff_query("no diff here", &default_stoplist()),
            Err(EmbedError::EmptyDiff)
        ));
    }

    #[test]
    fn alpha_renamed_functions_embed_identically() {
        let a = crate::ir::extract_annotated(
            "int Count(const std::vector<int>& xs, int t) { int n = 0; for (int x : xs) if (x == t) ++n; return n; }",
            "a.cc",
        )
        .unwrap();
        let b = crate::ir::extract_annotated(
            "int Tally(const std::vector<int>& items, int want) { int hits = 0; for (int it : items) if (it == want) ++hits; return hits; }",
            "b.cc",
        )
        .unwrap();
        assert_eq!(embed_function(&a[0]).1, embed_function(&b[0]).1);
    }
}
