//! Profile call trees and costly-function pruning.

mod prune;
mod tree;

pub use prune::{
    attribute_and_report, classify_shared, costly_functions, get_costly_fns, mark_shared,
    should_prune, CostlyFunction, PruneConfig,
};
pub use tree::{parse_call_tree_json, parse_folded_stacks, CallTreeNode, ROOT_NAME};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("malformed folded-stack line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("invalid call-tree json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid prune config: {0}")]
    Config(String),
}
