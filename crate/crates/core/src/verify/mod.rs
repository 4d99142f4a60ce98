//! Validating edits, edit statistics, speedup measurement and the outcome
//! ledger.

mod ledger;
mod run;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ledger::{read_ledger, record_outcome, summarize, LedgerEntry, LedgerSummary, StatusShare};
pub use run::{run_shell, CommandResult};

use crate::edit::prompt::RecipeKind;
use crate::edit::proposal::{EditProposal, ProposalStatus};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);
pub const DEFAULT_RUNS: usize = 10;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("benchmark output: {0}")]
    BenchParse(String),
    #[error("benchmark command timed out")]
    BenchTimeout,
    #[error("ledger line {line}: {source}")]
    Ledger {
        line: usize,
        source: serde_json::Error,
    },
}

#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeStatus {
    /// Submitted to production.
    S_PROD,
    /// Submitted after a user modified the edit.
    S_USER,
    /// Submitted, then reverted.
    R_REVERT,
    /// Failed build or tests.
    R_TEST,
    /// Rejected by a reviewer.
    R_USER,
    /// No change beyond formatting.
    R_EMPTY,
    R_OTHER,
}

impl OutcomeStatus {
    pub const ALL: [OutcomeStatus; 7] = [
        Self::S_PROD,
        Self::S_USER,
        Self::R_REVERT,
        Self::R_TEST,
        Self::R_USER,
        Self::R_EMPTY,
        Self::R_OTHER,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|x| format!("{x:?}").eq_ignore_ascii_case(s.trim()))
    }
}

impl From<ProposalStatus> for Option<OutcomeStatus> {
    /// Terminal outcome of a proposal rejected before review; `None` while
    /// it is still in play.
    fn from(s: ProposalStatus) -> Self {
        match s {
            ProposalStatus::Candidate | ProposalStatus::Selected => None,
            ProposalStatus::RejectedEmpty => Some(OutcomeStatus::R_EMPTY),
            ProposalStatus::RejectedBuild => Some(OutcomeStatus::R_TEST),
            ProposalStatus::RejectedReview | ProposalStatus::RejectedOther => Some(OutcomeStatus::R_OTHER),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOutcome {
    pub status: OutcomeStatus,
    pub note: String,
}

/// Result of running the configured build and test commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Validation {
    /// Ready for review.
    Passed,
    Rejected(EditOutcome),
}

/// A file replacement inside a workspace directory.
#[derive(Debug, Clone, PartialEq)]
pub struct FileEdit {
    pub path: PathBuf,
    pub contents: String,
}

/// Copies `workspace` into a fresh scratch directory (skipping `.git` and
/// `target`) and writes the edit there. The directory lives as long as the
/// returned guard.
pub fn scratch_copy(workspace: &Path, edit: Option<&FileEdit>) -> Result<tempfile::TempDir, VerifyError> {
    let io = |what: &Path, e| VerifyError::Io(what.display().to_string(), e);
    let dir = tempfile::tempdir().map_err(|e| io(Path::new("tempdir"), e))?;
    let walker = walkdir::WalkDir::new(workspace)
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !matches!(e.file_name().to_str(), Some(".git" | "target")));
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(workspace).to_path_buf();
            io(&path, e.into())
        })?;
        let rel = entry.path().strip_prefix(workspace).expect("walk stays under root");
        let dest = dir.path().join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest).map_err(|e| io(&dest, e))?;
        } else if entry.file_type().is_file() {
            std::fs::copy(entry.path(), &dest).map_err(|e| io(entry.path(), e))?;
        }
    }
    if let Some(edit) = edit {
        let dest = dir.path().join(&edit.path);
        if let Some(parent) = dest.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
        }
        std::fs::write(&dest, &edit.contents).map_err(|e| io(&dest, e))?;
    }
    Ok(dir)
}

/// Runs build then test in a scratch copy with the edit applied. A missing
/// command passes vacuously; a failure is `R_TEST`, a timeout `R_OTHER`.
pub fn check_valid(
    workspace: &Path,
    edit: &FileEdit,
    build_cmd: Option<&str>,
    test_cmd: Option<&str>,
    timeout: Duration,
) -> Result<Validation, VerifyError> {
    let scratch = scratch_copy(workspace, Some(edit))?;
    for (stage, cmd) in [("build", build_cmd), ("test", test_cmd)] {
        let Some(cmd) = cmd else { continue };
        let r = run_shell(cmd, scratch.path(), timeout)?;
        if r.timed_out {
            return Ok(Validation::Rejected(EditOutcome {
                status: OutcomeStatus::R_OTHER,
                note: format!("{stage} command timed out after {}s", timeout.as_secs_f64()),
            }));
        }
        if !r.success {
            return Ok(Validation::Rejected(EditOutcome {
                status: OutcomeStatus::R_TEST,
                note: format!("{stage} failed: {}", tail(&r.stderr, 20)),
            }));
        }
    }
    Ok(Validation::Passed)
}

fn tail(text: &str, lines: usize) -> String {
    let v: Vec<&str> = text.lines().collect();
    v[v.len().saturating_sub(lines)..].join("\n")
}

/// Averaged edit statistics for one recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub recipe: RecipeKind,
    pub samples: usize,
    /// Mean modified lines.
    pub mod_ln: f64,
    /// Mean applicable hunks.
    pub val_ed: f64,
    /// Mean non-applicable hunks.
    pub inv_ed: f64,
    /// Fraction of samples rejected by build, tests or a failed call.
    pub rej: f64,
}

fn exact_mean(sum: u64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// Means over every sample of each recipe. Sums are taken in integers so
/// each mean is a single rounding of an exact ratio.
pub fn edit_metrics(by_recipe: &BTreeMap<RecipeKind, Vec<EditProposal>>) -> Vec<MetricsRow> {
    by_recipe
        .iter()
        .map(|(&recipe, ps)| {
            let n = ps.len();
            let sum = |f: &dyn Fn(&EditProposal) -> usize| ps.iter().map(|p| f(p) as u64).sum::<u64>();
            MetricsRow {
                recipe,
                samples: n,
                mod_ln: exact_mean(sum(&|p| p.modified_lines), n),
                val_ed: exact_mean(sum(&|p| p.valid_hunks), n),
                inv_ed: exact_mean(sum(&|p| p.invalid_hunks), n),
                rej: exact_mean(
                    sum(&|p| {
                        matches!(p.status, ProposalStatus::RejectedBuild | ProposalStatus::RejectedOther) as usize
                    }),
                    n,
                ),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub baseline_cycles_per_op: f64,
    pub edited_cycles_per_op: Option<f64>,
    pub speedup: f64,
    pub runs: usize,
    pub baseline_samples: Vec<f64>,
    #[serde(default)]
    pub edited_samples: Vec<f64>,
}

/// Baseline over edited cost; exactly 1.0 without an edited measurement.
pub fn speedup(baseline: f64, edited: Option<f64>) -> f64 {
    match edited {
        Some(e) => baseline / e,
        None => 1.0,
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Numbers printed one per line; other lines are ignored.
pub fn parse_bench_output(stdout: &str) -> Vec<f64> {
    stdout
        .lines()
        .filter_map(|l| l.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite() && *v > 0.0)
        .collect()
}

/// Collects `runs` cycles-per-op samples by invoking `cmd` in `dir` until
/// enough numbers have been printed. Runs are strictly sequential.
pub fn collect_samples(cmd: &str, dir: &Path, runs: usize, timeout: Duration) -> Result<Vec<f64>, VerifyError> {
    let mut samples = Vec::with_capacity(runs);
    while samples.len() < runs {
        let r = run_shell(cmd, dir, timeout)?;
        if r.timed_out {
            return Err(VerifyError::BenchTimeout);
        }
        if !r.success {
            return Err(VerifyError::BenchParse(format!(
                "command exited unsuccessfully: {}",
                tail(&r.stderr, 5)
            )));
        }
        let got = parse_bench_output(&r.stdout);
        if got.is_empty() {
            return Err(VerifyError::BenchParse(format!(
                "no positive number in output {:?}",
                tail(&r.stdout, 3)
            )));
        }
        samples.extend(got);
    }
    samples.truncate(runs);
    Ok(samples)
}

/// Median-of-runs speedup of an edit. With `edited` absent (a rejected
/// edit) only the baseline is measured and the speedup is exactly 1.0.
pub fn measure_speedup(
    bench_cmd: &str,
    baseline_dir: &Path,
    edited_dir: Option<&Path>,
    runs: usize,
    timeout: Duration,
) -> Result<BenchResult, VerifyError> {
    let runs = runs.max(1);
    let baseline_samples = collect_samples(bench_cmd, baseline_dir, runs, timeout)?;
    let edited_samples = match edited_dir {
        Some(d) => collect_samples(bench_cmd, d, runs, timeout)?,
        None => Vec::new(),
    };
    let baseline = median(&baseline_samples);
    let edited = (!edited_samples.is_empty()).then(|| median(&edited_samples));
    Ok(BenchResult {
        baseline_cycles_per_op: baseline,
        edited_cycles_per_op: edited,
        speedup: speedup(baseline, edited),
        runs,
        baseline_samples,
        edited_samples,
    })
}
