//! Function-level intermediate representation of a C++ corpus.

mod extract;
pub mod lexer;
mod types;

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_functions, find_signature, Signature};
pub use lexer::{lex, lex_lossy, render_tokens, LexError, Token, TokenKind};
pub use types::{annotate_types, declared_types, find_declarations, Declaration};

#[derive(Debug, Error)]
pub enum IrError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("unbalanced {delim:?} at line {line}")]
    UnbalancedBraces { delim: char, line: u32 },
    #[error("percentage {0} outside [0, 100]")]
    PercentOutOfRange(f64),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Profile-derived cost of one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostAnnotation {
    pub cycles_pct: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alloc_bytes_pct: Option<f64>,
    pub source: String,
}

impl CostAnnotation {
    pub fn new(
        cycles_pct: f64,
        alloc_bytes_pct: Option<f64>,
        source: impl Into<String>,
    ) -> Result<Self, IrError> {
        for pct in std::iter::once(cycles_pct).chain(alloc_bytes_pct) {
            if !(0.0..=100.0).contains(&pct) {
                return Err(IrError::PercentOutOfRange(pct));
            }
        }
        Ok(Self {
            cycles_pct,
            alloc_bytes_pct,
            source: source.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub id: String,
    /// Qualified name, e.g. `ns::Widget::Resize`.
    pub name: String,
    pub file: String,
    /// Inclusive 1-based line range.
    pub span: (u32, u32),
    pub tokens: Vec<Token>,
    pub type_set: BTreeSet<String>,
    pub cost: Option<CostAnnotation>,
}

impl FunctionRecord {
    pub fn make_id(file: &str, name: &str, start_line: u32) -> String {
        format!("{file}::{name}@{start_line}")
    }

    /// Tokens without comments and preprocessor lines.
    pub fn code_tokens(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.kind != TokenKind::Comment)
    }

    /// Source text of the span, one `\n`-terminated line per source line.
    pub fn source_text(&self, file_source: &str) -> String {
        span_text(file_source, self.span)
    }

    pub fn cycles_pct(&self) -> Option<f64> {
        self.cost.as_ref().map(|c| c.cycles_pct)
    }
}

pub fn span_text(source: &str, (start, end): (u32, u32)) -> String {
    let mut out = String::new();
    for line in source
        .lines()
        .skip(start.saturating_sub(1) as usize)
        .take((end + 1).saturating_sub(start) as usize)
    {
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Sets `cost` when `costs` has an entry for the record id.
pub fn attach_cost(
    mut record: FunctionRecord,
    costs: &HashMap<String, CostAnnotation>,
) -> FunctionRecord {
    if let Some(c) = costs.get(&record.id) {
        record.cost = Some(c.clone());
    }
    record
}

/// Extracts and type-annotates every function of one file.
pub fn extract_annotated(source: &str, file_path: &str) -> Result<Vec<FunctionRecord>, IrError> {
    Ok(extract_functions(source, file_path)?
        .into_iter()
        .map(annotate_types)
        .collect())
}

pub const CPP_EXTENSIONS: &[&str] = &["cc", "cpp", "cxx", "c++", "h", "hh", "hpp", "hxx", "inl"];

pub fn is_cpp_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| CPP_EXTENSIONS.contains(&e))
}

/// A file that could not be processed, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub file: String,
    pub message: String,
}

/// Extracts a whole corpus in parallel. Files that fail to lex or have
/// unbalanced delimiters are skipped and reported as diagnostics. Output is
/// ordered by input path order.
pub fn extract_corpus(paths: &[PathBuf]) -> (Vec<FunctionRecord>, Vec<Diagnostic>) {
    let results: Vec<_> = paths
        .par_iter()
        .map(|path| {
            let name = path.to_string_lossy().into_owned();
            let text = std::fs::read_to_string(path).map_err(|source| IrError::Io {
                path: path.clone(),
                source,
            });
            (name.clone(), text.and_then(|t| extract_annotated(&t, &name)))
        })
        .collect();
    let mut records = Vec::new();
    let mut diags = Vec::new();
    for (file, res) in results {
        match res {
            Ok(mut r) => records.append(&mut r),
            Err(e) => {
                log::warn!("skipping {file}: {e}");
                diags.push(Diagnostic {
                    file,
                    message: e.to_string(),
                });
            }
        }
    }
    (records, diags)
}

/// Expands a directory root into its C++ files, sorted.
pub fn discover_sources(root: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && is_cpp_path(e.path()))
        .map(|e| e.into_path())
        .collect();
    out.sort();
    out
}
