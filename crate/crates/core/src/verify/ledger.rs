use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EditOutcome, OutcomeStatus, VerifyError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub edit_id: String,
    pub status: OutcomeStatus,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusShare {
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub total: usize,
    /// Only statuses that occur.
    pub by_status: BTreeMap<OutcomeStatus, StatusShare>,
}

/// Appends one timestamped line; earlier lines are never touched.
pub fn record_outcome(path: &Path, edit_id: &str, outcome: &EditOutcome) -> Result<LedgerEntry, VerifyError> {
    let entry = LedgerEntry {
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        edit_id: edit_id.to_string(),
        status: outcome.status,
        note: outcome.note.clone(),
    };
    let io = |e| VerifyError::Io(path.display().to_string(), e);
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io)?;
    let line = serde_json::to_string(&entry).map_err(|source| VerifyError::Ledger { line: 0, source })?;
    writeln!(f, "{line}").map_err(io)?;
    Ok(entry)
}

/// All entries; a missing file is an empty ledger.
pub fn read_ledger(path: &Path) -> Result<Vec<LedgerEntry>, VerifyError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let io = |e| VerifyError::Io(path.display().to_string(), e);
    let f = std::io::BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| VerifyError::Ledger { line: i + 1, source })?);
    }
    Ok(out)
}

/// Share of each status in percent. The latest entry per edit id wins, so
/// a later annotation (say a revert) replaces the earlier status.
pub fn summarize(entries: &[LedgerEntry]) -> LedgerSummary {
    let mut latest: BTreeMap<&str, OutcomeStatus> = BTreeMap::new();
    for e in entries {
        latest.insert(&e.edit_id, e.status);
    }
    let total = latest.len();
    let mut counts: BTreeMap<OutcomeStatus, usize> = BTreeMap::new();
    for s in latest.values() {
        *counts.entry(*s).or_default() += 1;
    }
    LedgerSummary {
        total,
        by_status: counts
            .into_iter()
            .map(|(s, count)| {
                (
                    s,
                    StatusShare {
                        count,
                        percent: 100.0 * count as f64 / total as f64,
                    },
                )
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, status: OutcomeStatus) -> LedgerEntry {
        LedgerEntry {
            timestamp: String::new(),
            edit_id: id.into(),
            status,
            note: String::new(),
        }
    }

    #[test]
    fn four_of_ten_in_production() {
        let entries: Vec<_> = (0..10)
            .map(|i| entry(&format!("e{i}"), if i < 4 { OutcomeStatus::S_PROD } else { OutcomeStatus::R_TEST }))
            .collect();
        let s = summarize(&entries);
        assert_eq!(s.by_status[&OutcomeStatus::S_PROD].percent, 40.0);
        assert_eq!(s.total, 10);
    }

    #[test]
    fn empty_and_latest_wins() {
        assert_eq!(summarize(&[]), LedgerSummary::default());
        let s = summarize(&[entry("a", OutcomeStatus::S_PROD), entry("a", OutcomeStatus::R_REVERT)]);
        assert_eq!(s.total, 1);
        assert_eq!(s.by_status[&OutcomeStatus::R_REVERT].count, 1);
    }

    #[test]
    fn append_only_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ledger.jsonl");
        let o = EditOutcome { status: OutcomeStatus::R_EMPTY, note: "fmt".into() };
        record_outcome(&p, "x", &o).unwrap();
        let first = std::fs::read_to_string(&p).unwrap();
        record_outcome(&p, "y", &o).unwrap();
        let both = std::fs::read_to_string(&p).unwrap();
        assert!(both.starts_with(&first));
        assert_eq!(read_ledger(&p).unwrap().len(), 2);
        summarize(&read_ledger(&p).unwrap());
        assert_eq!(std::fs::read_to_string(&p).unwrap(), both);
    }
}
