//! Unified-diff hunks: lenient parsing of model output, fuzzy application,
//! and generation.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "text", rename_all = "lowercase")]
pub enum HunkLine {
    Context(String),
    Removed(String),
    Added(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffHunk {
    /// 1-based first line of the old range; 0 when the header carried no
    /// position (the hunk is then matched anywhere) or for insertions at
    /// the top of the file.
    pub old_start: usize,
    pub new_start: usize,
    pub lines: Vec<HunkLine>,
    /// `\ No newline at end of file` after the last old-side line.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub old_no_eol: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub new_no_eol: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub position_unknown: bool,
}

impl DiffHunk {
    /// Context and removed lines, in order: what must match the target.
    pub fn old_lines(&self) -> Vec<&str> {
        self.lines
            .iter()
            .filter_map(|l| match l {
                HunkLine::Context(s) | HunkLine::Removed(s) => Some(s.as_str()),
                HunkLine::Added(_) => None,
            })
            .collect()
    }

    pub fn new_lines(&self) -> Vec<&str> {
        self.lines
            .iter()
            .filter_map(|l| match l {
                HunkLine::Context(s) | HunkLine::Added(s) => Some(s.as_str()),
                HunkLine::Removed(_) => None,
            })
            .collect()
    }

    pub fn removed(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().filter_map(|l| match l {
            HunkLine::Removed(s) => Some(s.as_str()),
            _ => None,
        })
    }

    pub fn added(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().filter_map(|l| match l {
            HunkLine::Added(s) => Some(s.as_str()),
            _ => None,
        })
    }

    pub fn has_changes(&self) -> bool {
        self.lines.iter().any(|l| !matches!(l, HunkLine::Context(_)))
    }

    /// Added, removed and changed lines. A run of `r` removals next to `a`
    /// additions counts `min(r, a)` changed lines plus the excess, i.e.
    /// `max(r, a)` in total.
    pub fn modified_lines(&self) -> usize {
        let mut total = 0;
        let (mut r, mut a) = (0, 0);
        for l in &self.lines {
            match l {
                HunkLine::Removed(_) => r += 1,
                HunkLine::Added(_) => a += 1,
                HunkLine::Context(_) => {
                    total += r.max(a);
                    r = 0;
                    a = 0;
                }
            }
        }
        total + r.max(a)
    }

    /// Renders the hunk in unified format, header included.
    pub fn render(&self) -> String {
        let old = self.old_lines().len();
        let new = self.new_lines().len();
        let mut out = format!("@@ -{},{} +{},{} @@\n", self.old_start, old, self.new_start, new);
        let last_old = self
            .lines
            .iter()
            .rposition(|l| !matches!(l, HunkLine::Added(_)));
        let last_new = self
            .lines
            .iter()
            .rposition(|l| !matches!(l, HunkLine::Removed(_)));
        for (i, l) in self.lines.iter().enumerate() {
            let (prefix, text) = match l {
                HunkLine::Context(s) => (' ', s),
                HunkLine::Removed(s) => ('-', s),
                HunkLine::Added(s) => ('+', s),
            };
            out.push(prefix);
            out.push_str(text);
            out.push('\n');
            let marks_old = self.old_no_eol && Some(i) == last_old;
            let marks_new = self.new_no_eol && Some(i) == last_new;
            if marks_old || marks_new {
                out.push_str("\\ No newline at end of file\n");
            }
        }
        out
    }
}

pub fn modified_lines(hunks: &[DiffHunk]) -> usize {
    hunks.iter().map(DiffHunk::modified_lines).sum()
}

pub fn render_hunks(hunks: &[DiffHunk]) -> String {
    hunks.iter().map(DiffHunk::render).collect()
}

fn hunk_header() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@").expect("valid regex")
    })
}

/// Extracts hunks from free-form text. Prose, code fences, and file headers
/// around the hunks are ignored; text with no hunk headers yields nothing.
pub fn parse_diff(text: &str) -> Vec<DiffHunk> {
    let lines: Vec<&str> = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    let mut hunks = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if !line.starts_with("@@") {
            i += 1;
            continue;
        }
        let (mut hunk, mut old_rem, mut new_rem) = match hunk_header().captures(line) {
            Some(c) => {
                let num = |k: usize, default: usize| {
                    c.get(k)
                        .map_or(default, |m| m.as_str().parse().unwrap_or(default))
                };
                (
                    DiffHunk {
                        old_start: num(1, 0),
                        new_start: num(3, 0),
                        lines: Vec::new(),
                        old_no_eol: false,
                        new_no_eol: false,
                        position_unknown: false,
                    },
                    num(2, 1) as i64,
                    num(4, 1) as i64,
                )
            }
            // `@@ ... @@` without positions, common in model output.
            None if line.len() >= 4 && line[2..].contains("@@") || line.trim() == "@@" => (
                DiffHunk {
                    old_start: 0,
                    new_start: 0,
                    lines: Vec::new(),
                    old_no_eol: false,
                    new_no_eol: false,
                    position_unknown: true,
                },
                i64::MAX,
                i64::MAX,
            ),
            None => {
                i += 1;
                continue;
            }
        };
        i += 1;
        while i < lines.len() {
            let l = lines[i];
            if l.starts_with("```") || l.starts_with("@@") || l.starts_with("diff --git") {
                break;
            }
            if l.starts_with("--- ") && lines.get(i + 1).is_some_and(|n| n.starts_with("+++ ")) {
                break;
            }
            match l.chars().next() {
                Some(' ') => {
                    hunk.lines.push(HunkLine::Context(l[1..].to_string()));
                    old_rem -= 1;
                    new_rem -= 1;
                }
                Some('-') => {
                    hunk.lines.push(HunkLine::Removed(l[1..].to_string()));
                    old_rem -= 1;
                }
                Some('+') => {
                    hunk.lines.push(HunkLine::Added(l[1..].to_string()));
                    new_rem -= 1;
                }
                Some('\\') => match hunk.lines.last() {
                    Some(HunkLine::Removed(_)) => hunk.old_no_eol = true,
                    Some(HunkLine::Added(_)) => hunk.new_no_eol = true,
                    Some(HunkLine::Context(_)) => {
                        hunk.old_no_eol = true;
                        hunk.new_no_eol = true;
                    }
                    None => {}
                },
                // Editors and models often strip the space of blank context lines.
                None if old_rem > 0 && new_rem > 0 && !hunk.position_unknown => {
                    hunk.lines.push(HunkLine::Context(String::new()));
                    old_rem -= 1;
                    new_rem -= 1;
                }
                _ => break,
            }
            i += 1;
        }
        if !hunk.lines.is_empty() {
            hunks.push(hunk);
        }
    }
    hunks
}

/// Source split into lines plus whether it ended with a newline.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Lines {
    lines: Vec<String>,
    trailing_newline: bool,
}

impl Lines {
    fn split(source: &str) -> Self {
        if source.is_empty() {
            return Self {
                lines: Vec::new(),
                trailing_newline: true,
            };
        }
        let trailing_newline = source.ends_with('\n');
        let body = source.strip_suffix('\n').unwrap_or(source);
        Self {
            lines: body.split('\n').map(str::to_string).collect(),
            trailing_newline,
        }
    }

    fn join(&self) -> String {
        if self.lines.is_empty() {
            return String::new();
        }
        let mut out = self.lines.join("\n");
        if self.trailing_newline {
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApplyOutcome {
    pub text: String,
    pub applied: usize,
    pub failed: usize,
    /// Per input hunk, whether it applied.
    pub hunk_applied: Vec<bool>,
}

/// Maximum distance in lines between a hunk's stated and actual position.
pub const FUZZ_LINES: usize = 3;

/// Applies each hunk independently. A hunk applies when its context and
/// removed lines match exactly within `FUZZ_LINES` of the expected position
/// (shifted by earlier hunks); otherwise it is skipped and counted failed.
pub fn apply_hunks(source: &str, hunks: &[DiffHunk]) -> ApplyOutcome {
    let mut doc = Lines::split(source);
    let mut offset: i64 = 0;
    let mut applied = 0;
    let mut hunk_applied = Vec::with_capacity(hunks.len());
    for h in hunks {
        match locate(&doc, h, offset) {
            Some(pos) => {
                let old = h.old_lines();
                let new: Vec<String> = h.new_lines().into_iter().map(str::to_string).collect();
                let touches_end = pos + old.len() == doc.lines.len();
                offset += new.len() as i64 - old.len() as i64;
                doc.lines.splice(pos..pos + old.len(), new);
                if touches_end {
                    doc.trailing_newline = !h.new_no_eol;
                }
                applied += 1;
                hunk_applied.push(true);
            }
            None => hunk_applied.push(false),
        }
    }
    ApplyOutcome {
        text: doc.join(),
        applied,
        failed: hunks.len() - applied,
        hunk_applied,
    }
}

fn locate(doc: &Lines, h: &DiffHunk, offset: i64) -> Option<usize> {
    let old = h.old_lines();
    let n = doc.lines.len();
    let fits = |pos: usize| -> bool {
        if pos + old.len() > n {
            return false;
        }
        if !old.iter().zip(&doc.lines[pos..]).all(|(a, b)| *a == b.as_str()) {
            return false;
        }
        if h.old_no_eol {
            return pos + old.len() == n && !doc.trailing_newline;
        }
        true
    };
    if h.position_unknown {
        if old.is_empty() {
            return None;
        }
        return (0..n).find(|&p| fits(p));
    }
    // Pure insertions after line `old_start`; otherwise the hunk starts at
    // line `old_start`.
    let stated = if old.is_empty() {
        h.old_start as i64
    } else {
        h.old_start as i64 - 1
    };
    let expected = stated + offset;
    for delta in 0..=FUZZ_LINES as i64 {
        for cand in [expected - delta, expected + delta] {
            if cand >= 0 && fits(cand as usize) {
                return Some(cand as usize);
            }
            if delta == 0 {
                break;
            }
        }
    }
    None
}

/// Unified diff from `old` to `new` with three lines of context. `path`
/// adds `---`/`+++` headers.
pub fn unified_diff(old: &str, new: &str, path: Option<&str>) -> String {
    let diff = similar::TextDiff::from_lines(old, new);
    let mut u = diff.unified_diff();
    u.context_radius(3);
    if let Some(p) = path {
        u.header(&format!("a/{p}"), &format!("b/{p}"));
    }
    u.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "a\nb\nc\nd\ne\nf\ng\n";

    #[test]
    fn single_hunk_parse() {
        let text = "@@ -2,3 +2,3 @@\n b\n-c\n+C\n d\n";
        let hunks = parse_diff(text);
        assert_eq!(hunks.len(), 1);
        assert_eq!(hunks[0].old_lines(), ["b", "c", "d"]);
        assert_eq!(hunks[0].new_lines(), ["b", "C", "d"]);
        assert_eq!(hunks[0].modified_lines(), 1);
    }

    #[test]
    fn prose_only() {
        assert!(parse_diff("I think the code is fine.\nNo changes needed.").is_empty());
    }

    #[test]
    fn fenced_block_with_commentary() {
        // Two hunks, hand-built.
        let text = "\
Here is the optimized version:

```diff
--- a/bench.cc
+++ b/bench.cc
@@ -2,2 +2,3 @@
 b
+  v.reserve(n);
 c
@@ -6,2 +7,2 @@
-f
+F
 g
```

This avoids reallocations.";
        let hunks = parse_diff(text);
        assert_eq!(hunks.len(), 2);
        assert_eq!(hunks[0].added().collect::<Vec<_>>(), ["  v.reserve(n);"]);
        assert_eq!(hunks[1].old_start, 6);
        let out = apply_hunks(SRC, &hunks);
        assert_eq!((out.applied, out.failed), (2, 0));
        assert_eq!(out.text, "a\nb\n  v.reserve(n);\nc\nd\ne\nF\ng\n");
    }

    #[test]
    fn empty_hunk_list_is_identity() {
        let out = apply_hunks(SRC, &[]);
        assert_eq!(out.text, SRC);
        assert_eq!((out.applied, out.failed), (0, 0));
    }

    #[test]
    fn mismatched_context_fails_cleanly() {
        let hunks = parse_diff("@@ -2,2 +2,2 @@\n x\n-y\n+z\n");
        let out = apply_hunks(SRC, &hunks);
        assert_eq!((out.applied, out.failed), (0, 1));
        assert_eq!(out.text, SRC);
    }

    #[test]
    fn fuzz_window() {
        // Stated at line 1 but the context lives at line 4: offset 3 is ok.
        let ok = parse_diff("@@ -1,2 +1,2 @@\n d\n-e\n+E\n");
        assert_eq!(apply_hunks(SRC, &ok).text, "a\nb\nc\nd\nE\nf\ng\n");
        // Offset 4 is outside the window.
        let far = parse_diff("@@ -1,2 +1,2 @@\n e\n-f\n+F\n");
        assert_eq!(apply_hunks(SRC, &far).failed, 1);
    }

    #[test]
    fn later_hunks_shift_by_earlier_changes() {
        let text = "@@ -1,1 +1,3 @@\n-a\n+a1\n+a2\n+a3\n@@ -7,1 +9,1 @@\n-g\n+G\n";
        let out = apply_hunks(SRC, &parse_diff(text));
        assert_eq!(out.applied, 2);
        assert_eq!(out.text, "a1\na2\na3\nb\nc\nd\ne\nf\nG\n");
    }

    #[test]
    fn positionless_header() {
        let hunks = parse_diff("@@ ... @@\n c\n-d\n+D\n");
        assert!(hunks[0].position_unknown);
        assert_eq!(apply_hunks(SRC, &hunks).text, "a\nb\nc\nD\ne\nf\ng\n");
    }

    #[test]
    fn blank_context_lines_without_space() {
        let src = "x\n\ny\n";
        let hunks = parse_diff("@@ -1,3 +1,3 @@\n x\n\n-y\n+z\n");
        assert_eq!(apply_hunks(src, &hunks).text, "x\n\nz\n");
    }

    #[test]
    fn missing_newline_round_trip() {
        for (a, b) in [("x\ny", "x\ny\n"), ("x\ny\n", "x\nz"), ("", "q"), ("q", "")] {
            let d = unified_diff(a, b, None);
            let out = apply_hunks(a, &parse_diff(&d));
            assert_eq!(out.text, b, "diff was:\n{d}");
        }
    }

    #[test]
    fn render_then_parse_is_stable() {
        let d = unified_diff(SRC, "a\nb\nX\nd\ne\nf\ng\nh\n", Some("t.cc"));
        let hunks = parse_diff(&d);
        assert_eq!(parse_diff(&render_hunks(&hunks)), hunks);
    }

    #[test]
    fn modified_line_counting() {
        let hunks = parse_diff("@@ -1,4 +1,5 @@\n-a\n-b\n+A\n c\n+n1\n+n2\n d\n-e\n");
        // block1: 2 removed/1 added -> 2; block2: 2 added -> 2; block3: 1.
        assert_eq!(modified_lines(&hunks), 5);
    }
}
