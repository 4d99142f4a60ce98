//! Mining performance fixes out of git history into before/after examples.

mod git;
pub mod rules;

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use git::{ingest_curated, parse_feed, scan_commits};

use crate::edit::diff::{apply_hunks, parse_diff, unified_diff};
use crate::edit::prompt::Shot;
use crate::ir::{extract_annotated, span_text, Diagnostic, FunctionRecord};

#[derive(Debug, Error)]
pub enum MineError {
    #[error("{0} is not a git repository")]
    NotAGitRepo(String),
    #[error("rule {line}: {reason}")]
    RuleParse { line: usize, reason: String },
    #[error("{0}")]
    Git(String),
    #[error("example database {0}: {1}")]
    Io(String, std::io::Error),
    #[error("example database line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Alloc,
    Args,
    Copy,
    Map,
    Move,
    Sort,
    Vector,
    Other,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Self::Alloc,
        Self::Args,
        Self::Copy,
        Self::Map,
        Self::Move,
        Self::Sort,
        Self::Vector,
        Self::Other,
    ];

    /// Case-insensitive name; anything unrecognised is `Other`.
    pub fn from_tag(tag: &str) -> Self {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(tag.trim()))
            .unwrap_or(Self::Other)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Alloc => "Alloc",
            Self::Args => "Args",
            Self::Copy => "Copy",
            Self::Map => "Map",
            Self::Move => "Move",
            Self::Sort => "Sort",
            Self::Vector => "Vector",
            Self::Other => "Other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitHit {
    pub commit_id: String,
    pub message: String,
    pub matched_keywords: Vec<String>,
    pub files: Vec<FileChange>,
    /// Category given by a curated feed, overriding the rule table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_hint: Option<Category>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntiPatternExample {
    pub id: String,
    pub category: Category,
    pub before_fn: FunctionRecord,
    pub after_fn: FunctionRecord,
    /// Source lines of the function before and after the commit.
    pub before_source: String,
    pub after_source: String,
    pub diff: String,
    pub commit_id: String,
}

impl AntiPatternExample {
    /// Applying the stored diff to the before source gives the after source.
    pub fn round_trips(&self) -> bool {
        let out = apply_hunks(&self.before_source, &parse_diff(&self.diff));
        out.failed == 0 && out.text == self.after_source
    }

    pub fn to_shot(&self) -> Shot {
        Shot {
            before: self.before_source.clone(),
            diff: self.diff.clone(),
        }
    }
}

fn content_id(commit: &str, file: &str, name: &str, diff: &str) -> String {
    let mut h = Sha256::new();
    for part in [commit, file, name, diff] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex::encode(&h.finalize()[..8])
}

fn with_text(src: &str, recs: Vec<FunctionRecord>) -> Vec<(FunctionRecord, String)> {
    recs.into_iter()
        .map(|r| {
            let mut text = span_text(src, r.span);
            if !text.ends_with('\n') {
                text.push('\n');
            }
            (r, text)
        })
        .collect()
}

/// Pairs functions of each changed file by qualified name (and overload
/// position) and emits one example per function whose text changed.
pub fn build_examples(
    hits: &[CommitHit],
    table: &[(Category, rules::DiffCue)],
) -> (Vec<AntiPatternExample>, Vec<Diagnostic>) {
    let mut out = Vec::new();
    let mut diags = Vec::new();
    for hit in hits {
        for change in &hit.files {
            let diag = |msg: String| Diagnostic {
                file: format!("{}@{}", change.path, hit.commit_id),
                message: msg,
            };
            let (before, after) = match (
                extract_annotated(&change.before, &change.path),
                extract_annotated(&change.after, &change.path),
            ) {
                (Ok(b), Ok(a)) => (with_text(&change.before, b), with_text(&change.after, a)),
                (Err(e), _) | (_, Err(e)) => {
                    diags.push(diag(e.to_string()));
                    continue;
                }
            };
            let mut after_by_key: HashMap<(String, usize), (FunctionRecord, String)> = HashMap::new();
            let mut seen: HashMap<String, usize> = HashMap::new();
            for (r, t) in after {
                let n = seen.entry(r.name.clone()).or_default();
                after_by_key.insert((r.name.clone(), *n), (r, t));
                *n += 1;
            }
            seen.clear();
            for (b, btext) in before {
                let n = seen.entry(b.name.clone()).or_default();
                let key = (b.name.clone(), *n);
                *n += 1;
                let Some((a, atext)) = after_by_key.remove(&key) else {
                    diags.push(diag(format!("{} has no counterpart after the commit", b.name)));
                    continue;
                };
                if btext == atext {
                    continue;
                }
                let diff = unified_diff(&btext, &atext, Some(&change.path));
                let category = hit
                    .category_hint
                    .unwrap_or_else(|| rules::categorize_diff(&diff, table));
                let ex = AntiPatternExample {
                    id: content_id(&hit.commit_id, &change.path, &b.name, &diff),
                    category,
                    before_fn: b,
                    after_fn: a,
                    before_source: btext,
                    after_source: atext,
                    diff,
                    commit_id: hit.commit_id.clone(),
                };
                if ex.round_trips() {
                    out.push(ex);
                } else {
                    diags.push(diag(format!("{} diff does not round-trip", ex.before_fn.name)));
                }
            }
            let mut added: Vec<_> = after_by_key.into_keys().collect();
            added.sort();
            for (name, _) in added {
                diags.push(diag(format!("{name} is new in this commit")));
            }
        }
    }
    (out, diags)
}

pub fn save_examples(path: &Path, examples: &[AntiPatternExample]) -> Result<(), MineError> {
    let io = |e| MineError::Io(path.display().to_string(), e);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for ex in examples {
        let line = serde_json::to_string(ex).map_err(|source| MineError::Json { line: 0, source })?;
        writeln!(f, "{line}").map_err(io)?;
    }
    f.flush().map_err(io)
}

pub fn load_examples(path: &Path) -> Result<Vec<AntiPatternExample>, MineError> {
    let io = |e| MineError::Io(path.display().to_string(), e);
    let f = std::io::BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| MineError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hit(before: &str, after: &str, hint: Option<Category>) -> CommitHit {
        CommitHit {
            commit_id: "c0ffee".into(),
            message: "speedup".into(),
            matched_keywords: vec!["speedup".into()],
            files: vec![FileChange {
                path: "lib/a.cc".into(),
                before: before.into(),
                after: after.into(),
            }],
            category_hint: hint,
        }
    }

    const BEFORE: &str = "int Keep() { return 1; }\n\nvoid Fill(std::vector<int>& v, int n) {\n  for (int i = 0; i < n; ++i) v.push_back(i);\n}\n";

    #[test]
    fn reserve_commit_becomes_vector_example() {
        let after = BEFORE.replace("{\n  for", "{\n  v.reserve(n);\n  for");
        let (ex, diags) = build_examples(&[hit(BEFORE, &after, None)], &rules::category_table());
        assert!(diags.is_empty(), "{diags:?}");
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].category, Category::Vector);
        assert_eq!(ex[0].before_fn.name, "Fill");
        assert!(ex[0].round_trips());
        let again = build_examples(&[hit(BEFORE, &after, None)], &rules::category_table()).0;
        assert_eq!(again[0].id, ex[0].id);
    }

    #[test]
    fn hint_overrides_table_and_new_functions_are_reported() {
        let after = BEFORE.replace("return 1;", "return 2;") + "int Extra() { return 3; }\n";
        let (ex, diags) = build_examples(&[hit(BEFORE, &after, Some(Category::Sort))], &rules::category_table());
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].category, Category::Sort);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("Extra"));
    }

    #[test]
    fn jsonl_round_trip() {
        let after = BEFORE.replace("v.push_back(i)", "v.push_back(std::move(i))");
        let (ex, _) = build_examples(&[hit(BEFORE, &after, None)], &rules::category_table());
        assert_eq!(ex[0].category, Category::Move);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("db.jsonl");
        save_examples(&p, &ex).unwrap();
        assert_eq!(load_examples(&p).unwrap(), ex);
    }

    #[test]
    fn tags() {
        assert_eq!(Category::from_tag("map"), Category::Map);
        assert_eq!(Category::from_tag("weird"), Category::Other);
        assert_eq!(
            parse_feed("# feed\nabc123 Vector\ndef456\n"),
            vec![("abc123".to_string(), Some(Category::Vector)), ("def456".to_string(), None)]
        );
    }
}
