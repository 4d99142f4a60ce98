use std::path::Path;
use std::process::Command;

use rayon::prelude::*;

use super::rules::{matched_keywords, KeywordRule};
use super::{Category, CommitHit, FileChange, MineError};
use crate::ir::is_cpp_path;

fn git(repo: &Path, args: &[&str]) -> Result<std::process::Output, MineError> {
    Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .output()
        .map_err(|e| MineError::Git(format!("cannot run git: {e}")))
}

fn git_text(repo: &Path, args: &[&str]) -> Result<String, MineError> {
    let out = git(repo, args)?;
    if !out.status.success() {
        return Err(MineError::Git(format!(
            "git {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn ensure_repo(repo: &Path) -> Result<(), MineError> {
    let ok = git(repo, &["rev-parse", "--git-dir"])
        .map(|o| o.status.success())
        .unwrap_or(false);
    if ok {
        Ok(())
    } else {
        Err(MineError::NotAGitRepo(repo.display().to_string()))
    }
}

/// File content at a revision, empty when the path does not exist there.
fn file_at(repo: &Path, rev: &str, path: &str) -> String {
    match git(repo, &["show", &format!("{rev}:{path}")]) {
        Ok(o) if o.status.success() => String::from_utf8_lossy(&o.stdout).into_owned(),
        _ => String::new(),
    }
}

fn parent_of(repo: &Path, commit: &str) -> Option<String> {
    let o = git(repo, &["rev-parse", "--verify", "--quiet", &format!("{commit}^")]).ok()?;
    o.status
        .success()
        .then(|| String::from_utf8_lossy(&o.stdout).trim().to_string())
}

/// Before/after snapshots of the C++ files a commit touches.
fn cpp_changes(repo: &Path, commit: &str) -> Result<Vec<FileChange>, MineError> {
    let names = git_text(
        repo,
        &["diff-tree", "--root", "--no-commit-id", "-r", "--name-only", commit],
    )?;
    let parent = parent_of(repo, commit);
    Ok(names
        .lines()
        .filter(|p| !p.is_empty() && is_cpp_path(Path::new(p)))
        .map(|path| FileChange {
            path: path.to_string(),
            before: parent
                .as_deref()
                .map(|p| file_at(repo, p, path))
                .unwrap_or_default(),
            after: file_at(repo, commit, path),
        })
        .collect())
}

fn message_of(repo: &Path, commit: &str) -> Result<String, MineError> {
    Ok(git_text(repo, &["log", "-1", "--format=%B", commit])?
        .trim_end()
        .to_string())
}

/// Commits reachable from HEAD whose message matches any rule, oldest
/// first, with snapshots of the C++ files they touch.
pub fn scan_commits(repo: &Path, rules: &[KeywordRule]) -> Result<Vec<CommitHit>, MineError> {
    ensure_repo(repo)?;
    let log = git_text(repo, &["log", "--reverse", "--format=%H%x1f%B%x1e", "HEAD"])?;
    let candidates: Vec<(String, String, Vec<String>)> = log
        .split('\u{1e}')
        .filter_map(|rec| {
            let (id, msg) = rec.trim_start_matches('\n').split_once('\u{1f}')?;
            let msg = msg.trim_end().to_string();
            let kw = matched_keywords(rules, &msg);
            (!kw.is_empty()).then(|| (id.trim().to_string(), msg, kw))
        })
        .collect();
    candidates
        .into_par_iter()
        .map(|(commit_id, message, matched_keywords)| {
            Ok(CommitHit {
                files: cpp_changes(repo, &commit_id)?,
                commit_id,
                message,
                matched_keywords,
                category_hint: None,
            })
        })
        .collect()
}

/// A curated feed line: a commit id, optionally followed by a category.
pub fn parse_feed(text: &str) -> Vec<(String, Option<Category>)> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut parts = l.split_whitespace();
            let id = parts.next().unwrap_or_default().to_string();
            let cat = parts.next().map(Category::from_tag);
            (id, cat)
        })
        .collect()
}

/// Resolves the ids of a curated feed. Ids that do not name a commit are
/// returned as warnings rather than failing the run.
pub fn ingest_curated(
    repo: &Path,
    feed_text: &str,
) -> Result<(Vec<CommitHit>, Vec<String>), MineError> {
    ensure_repo(repo)?;
    let mut hits = Vec::new();
    let mut warnings = Vec::new();
    for (id, category) in parse_feed(feed_text) {
        let resolved = git(repo, &["rev-parse", "--verify", "--quiet", &format!("{id}^{{commit}}")])?;
        if !resolved.status.success() {
            log::warn!("curated id {id} does not resolve");
            warnings.push(format!("unresolved commit id {id}"));
            continue;
        }
        let commit_id = String::from_utf8_lossy(&resolved.stdout).trim().to_string();
        hits.push(CommitHit {
            message: message_of(repo, &commit_id)?,
            files: cpp_changes(repo, &commit_id)?,
            commit_id,
            matched_keywords: Vec::new(),
            category_hint: category,
        });
    }
    Ok((hits, warnings))
}
