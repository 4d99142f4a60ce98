use regex::Regex;

use super::{Category, MineError};

/// Message keywords used when no rule file is given.
pub const DEFAULT_KEYWORDS: &[&str] = &[
    "speedup",
    "faster",
    "optimiz",
    "reduce cpu",
    "cpu cost",
    "memory reduction",
    "benchmark",
    "perf",
    "allocation",
];

#[derive(Debug, Clone)]
pub enum KeywordRule {
    /// Case-insensitive substring; stored lowercase.
    Substring(String),
    Regex(Regex),
}

impl KeywordRule {
    pub fn label(&self) -> String {
        match self {
            Self::Substring(s) => s.clone(),
            Self::Regex(r) => format!("re:{}", r.as_str()),
        }
    }

    pub fn matches(&self, message: &str) -> bool {
        match self {
            Self::Substring(s) => message.to_lowercase().contains(s.as_str()),
            Self::Regex(r) => r.is_match(message),
        }
    }
}

pub fn default_rules() -> Vec<KeywordRule> {
    DEFAULT_KEYWORDS
        .iter()
        .map(|k| KeywordRule::Substring(k.to_string()))
        .collect()
}

/// One rule per line. `re:` introduces a regular expression (matched
/// case-insensitively), `#` starts a comment line, blank lines are skipped.
pub fn parse_rules(text: &str) -> Result<Vec<KeywordRule>, MineError> {
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rule = match line.strip_prefix("re:") {
            Some(pat) => KeywordRule::Regex(
                Regex::new(&format!("(?i){}", pat.trim())).map_err(|e| MineError::RuleParse {
                    line: i + 1,
                    reason: e.to_string(),
                })?,
            ),
            None => KeywordRule::Substring(line.to_lowercase()),
        };
        rules.push(rule);
    }
    Ok(rules)
}

/// Labels of the rules matching a commit message.
pub fn matched_keywords(rules: &[KeywordRule], message: &str) -> Vec<String> {
    rules
        .iter()
        .filter(|r| r.matches(message))
        .map(KeywordRule::label)
        .collect()
}

/// What a category rule inspects in the changed lines of a diff.
#[derive(Debug, Clone)]
pub enum DiffCue {
    Added(Regex),
    Removed(Regex),
    /// Removed lines match the first pattern and added lines the second.
    Replaced(Regex, Regex),
}

impl DiffCue {
    fn holds(&self, removed: &str, added: &str) -> bool {
        match self {
            Self::Added(r) => r.is_match(added),
            Self::Removed(r) => r.is_match(removed),
            Self::Replaced(a, b) => a.is_match(removed) && b.is_match(added),
        }
    }
}

/// Ordered (category, cue) table; the first cue that holds wins.
pub fn category_table() -> Vec<(Category, DiffCue)> {
    let re = |p: &str| Regex::new(p).expect("static pattern");
    vec![
        (Category::Vector, DiffCue::Added(re(r"\.reserve\s*\("))),
        (Category::Move, DiffCue::Added(re(r"std::move\s*\("))),
        (Category::Map, DiffCue::Added(re(r"\btry_emplace\s*\("))),
        (Category::Map, DiffCue::Replaced(re(r"\.(count|contains)\s*\("), re(r"\.find\s*\("))),
        (Category::Map, DiffCue::Replaced(re(r"\w\s*\[[^\]]+\]"), re(r"\.find\s*\("))),
        (Category::Sort, DiffCue::Added(re(r"\b(partial_sort|nth_element)\s*\("))),
        (Category::Alloc, DiffCue::Added(re(r"\bstring_view\b"))),
        (Category::Alloc, DiffCue::Removed(re(r"\bnew\s+[A-Za-z_]"))),
        (
            Category::Args,
            DiffCue::Replaced(
                re(r"\w\s*\(([^()]*,)?\s*(std::)?\w+(<[^()]*>)?\s+\w+\s*[,)]"),
                re(r"\(([^()]*,)?\s*const\s+[\w:<>, ]+&\s*\w+\s*[,)]"),
            ),
        ),
        (Category::Copy, DiffCue::Added(re(r"\bconst\s+auto\s*&|\bauto\s*&"))),
        (Category::Copy, DiffCue::Added(re(r"\bconst\s+[\w:<>]+\s*&\s*\w+\s*="))),
    ]
}

/// Category of a unified diff from its changed lines, or `Other`.
pub fn categorize_diff(diff: &str, table: &[(Category, DiffCue)]) -> Category {
    let mut removed = String::new();
    let mut added = String::new();
    for line in diff.lines() {
        if line.starts_with("---") || line.starts_with("+++") {
            continue;
        }
        if let Some(r) = line.strip_prefix('-') {
            removed.push_str(r);
            removed.push('\n');
        } else if let Some(a) = line.strip_prefix('+') {
            added.push_str(a);
            added.push('\n');
        }
    }
    table
        .iter()
        .find(|(_, cue)| cue.holds(&removed, &added))
        .map_or(Category::Other, |(c, _)| *c)
}
