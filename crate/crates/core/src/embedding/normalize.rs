use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::ir::{Token, TokenKind};

pub const STRING_PLACEHOLDER: &str = "<str>";
pub const NUMBER_PLACEHOLDER: &str = "<num>";

/// Code tokens with project-specific names, literal payloads and comments
/// removed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalizedTokens {
    pub tokens: Vec<String>,
}

impl NormalizedTokens {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.tokens
    }
}

impl<S: Into<String>> FromIterator<S> for NormalizedTokens {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self {
            tokens: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// Standard-library member names. They are not custom names, so they keep
/// their spelling when used as `x.reserve(...)`, `p->find(...)` or
/// `std::move(...)`.
const LIBRARY_MEMBERS: &[&str] = &[
    "append", "assign", "at", "back", "begin", "c_str", "capacity", "cbegin", "cend", "clear",
    "contains", "count", "data", "emplace", "emplace_back", "emplace_hint", "empty", "end",
    "erase", "find", "first", "front", "get", "insert", "insert_or_assign", "lower_bound",
    "pop_back", "push_back", "rbegin", "release", "rend", "reserve", "reset", "resize", "second",
    "shrink_to_fit", "size", "substr", "swap", "try_emplace", "upper_bound", "value",
];

fn library_members() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| LIBRARY_MEMBERS.iter().copied().collect())
}

/// Drops comments, replaces string and numeric literals by placeholders and
/// renames custom identifiers to `id0`, `id1`, ... in order of first
/// occurrence. Keywords, type names and punctuation are kept. Identifiers
/// in the `std::` namespace and standard member calls keep their name.
pub fn normalize<'a>(tokens: impl IntoIterator<Item = &'a Token>) -> NormalizedTokens {
    let code: Vec<&Token> = tokens
        .into_iter()
        .filter(|t| t.kind != TokenKind::Comment)
        .collect();
    let mut names: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::with_capacity(code.len());
    for (i, t) in code.iter().enumerate() {
        let prev = i.checked_sub(1).map(|j| code[j].text.as_str());
        let next = code.get(i + 1).map(|t| t.text.as_str());
        let text = match t.kind {
            TokenKind::Comment => continue,
            TokenKind::LiteralString => STRING_PLACEHOLDER.to_string(),
            TokenKind::LiteralNumber => NUMBER_PLACEHOLDER.to_string(),
            TokenKind::Identifier => {
                let std_qualified = i >= 2 && prev == Some("::") && code[i - 2].is("std");
                let member_call = matches!(prev, Some("." | "->"))
                    && library_members().contains(t.text.as_str());
                if (t.is("std") && next == Some("::")) || std_qualified || member_call {
                    t.text.clone()
                } else {
                    let n = names.len();
                    let idx = *names.entry(t.text.as_str()).or_insert(n);
                    format!("id{idx}")
                }
            }
            _ => t.text.clone(),
        };
        out.push(text);
    }
    NormalizedTokens { tokens: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::lex;

    fn norm(src: &str) -> Vec<String> {
        normalize(&lex(src).unwrap()).tokens
    }

    #[test]
    fn literals_and_identifiers() {
        assert_eq!(norm("int count = 0;"), ["int", "id0", "=", "<num>", ";"]);
    }

    #[test]
    fn alpha_renaming_invariance() {
        let a = "int Sum(const std::vector<int>& xs) { int s = 0; for (int x : xs) s += x; return s; }";
        let b = "int Total(const std::vector<int>& vals) { int acc = 0; for (int v : vals) acc += v; return acc; }";
        assert_eq!(norm(a), norm(b));
    }

    #[test]
    fn comments_and_strings_removed() {
        let got = norm("/* why */ log(\"secret payload\"); // trailing");
        assert_eq!(got, ["id0", "(", "<str>", ")", ";"]);
        assert!(got.iter().all(|t| !t.contains("secret") && !t.contains("why")));
    }

    #[test]
    fn library_names_survive() {
        assert_eq!(
            norm("out.reserve(n); out.push_back(std::move(x)); reserve(n);"),
            [
                "id0", ".", "reserve", "(", "id1", ")", ";", "id0", ".", "push_back", "(", "std",
                "::", "move", "(", "id2", ")", ")", ";", "id3", "(", "id1", ")", ";"
            ]
        );
    }
}
