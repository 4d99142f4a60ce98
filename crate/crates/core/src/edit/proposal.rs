use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::codebleu::codebleu;
use super::diff::{apply_hunks, parse_diff, unified_diff, DiffHunk};
use super::prompt::RecipeKind;
use crate::ir::{lex_lossy, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalStatus {
    Candidate,
    /// Failed build or tests.
    RejectedBuild,
    /// No change beyond formatting.
    RejectedEmpty,
    /// Failed the optional self-review pass.
    RejectedReview,
    /// The completion call itself failed.
    RejectedOther,
    Selected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditProposal {
    pub sample_idx: usize,
    pub recipe: RecipeKind,
    pub raw_text: String,
    pub hunks: Vec<DiffHunk>,
    pub valid_hunks: usize,
    pub invalid_hunks: usize,
    pub modified_lines: usize,
    pub codebleu_vs_baseline: f64,
    pub status: ProposalStatus,
    /// Unified diff from the original to the edited code, empty when
    /// nothing applied.
    pub diff: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EditProposal {
    /// Parses model text, applies its hunks to `original` and fills in the
    /// metrics. Formatting-only results are marked `RejectedEmpty`.
    pub fn from_completion(
        sample_idx: usize,
        recipe: RecipeKind,
        original: &str,
        raw_text: String,
    ) -> Self {
        let hunks = parse_diff(&raw_text);
        let outcome = apply_hunks(original, &hunks);
        let applied: Vec<DiffHunk> = hunks
            .iter()
            .zip(&outcome.hunk_applied)
            .filter(|(_, ok)| **ok)
            .map(|(h, _)| h.clone())
            .collect();
        let mut p = Self::from_edit(sample_idx, recipe, original, &outcome.text, raw_text);
        p.hunks = hunks;
        p.valid_hunks = outcome.applied;
        p.invalid_hunks = outcome.failed;
        p.modified_lines = super::diff::modified_lines(&applied);
        p
    }

    /// Proposal for an already edited text, e.g. an agent workspace.
    pub fn from_edit(
        sample_idx: usize,
        recipe: RecipeKind,
        original: &str,
        edited: &str,
        raw_text: String,
    ) -> Self {
        let diff = if original == edited {
            String::new()
        } else {
            unified_diff(original, edited, None)
        };
        let hunks = parse_diff(&diff);
        let status = if same_code(original, edited) {
            ProposalStatus::RejectedEmpty
        } else {
            ProposalStatus::Candidate
        };
        Self {
            sample_idx,
            recipe,
            raw_text,
            valid_hunks: hunks.len(),
            invalid_hunks: 0,
            modified_lines: super::diff::modified_lines(&hunks),
            hunks,
            codebleu_vs_baseline: codebleu(original, edited),
            status,
            diff,
            error: None,
        }
    }

    pub fn failed(sample_idx: usize, recipe: RecipeKind, error: String) -> Self {
        Self {
            sample_idx,
            recipe,
            raw_text: String::new(),
            hunks: Vec::new(),
            valid_hunks: 0,
            invalid_hunks: 0,
            modified_lines: 0,
            codebleu_vs_baseline: 0.0,
            status: ProposalStatus::RejectedOther,
            diff: String::new(),
            error: Some(error),
        }
    }

    /// The edited text, recovered by applying `diff` to the original.
    pub fn edited_source(&self, original: &str) -> String {
        apply_hunks(original, &parse_diff(&self.diff)).text
    }

    pub fn is_viable(&self) -> bool {
        matches!(self.status, ProposalStatus::Candidate | ProposalStatus::Selected)
            && self.valid_hunks > 0
    }
}

/// True when the two texts have the same code tokens, ignoring layout and
/// comments.
pub fn same_code(a: &str, b: &str) -> bool {
    let code = |s: &str| -> Vec<String> {
        lex_lossy(s)
            .into_iter()
            .filter(|t| t.kind != TokenKind::Comment)
            .map(|t| t.text)
            .collect()
    };
    code(a) == code(b)
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error("no proposal applies and changes code")]
    NoViableProposal,
}

/// Index of the most conservative viable proposal: highest CodeBLEU, then
/// fewest modified lines, then lowest sample index. Marks it `Selected`.
pub fn select_conservative(proposals: &mut [EditProposal]) -> Result<usize, SelectError> {
    let best = proposals
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_viable())
        .min_by(|(_, a), (_, b)| {
            b.codebleu_vs_baseline
                .total_cmp(&a.codebleu_vs_baseline)
                .then(a.modified_lines.cmp(&b.modified_lines))
                .then(a.sample_idx.cmp(&b.sample_idx))
        })
        .map(|(i, _)| i)
        .ok_or(SelectError::NoViableProposal)?;
    proposals[best].status = ProposalStatus::Selected;
    Ok(best)
}
