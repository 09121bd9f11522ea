//! Engine-agnostic ranking files: one JSON object per input record, so any
//! linker's output can be evaluated by the same scorer. Lines may appear in
//! any order but must cover every record index exactly once.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use skillink_core::{EntityId, ScoredCandidate};

use crate::error::CliError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingLine {
    pub record_index: usize,
    pub candidates: Vec<ScoredCandidate>,
}

pub fn write_rankings(path: &Path, lines: &[RankingLine]) -> Result<(), CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    for line in lines {
        let body = serde_json::to_string(line)
            .map_err(|e| CliError::Runtime(format!("cannot serialize a ranking line: {e}")))?;
        writeln!(out, "{body}")
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    out.flush()
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Read rankings for exactly `expected` records, returning candidate-id
/// lists indexed by record. Duplicate, missing, or out-of-range indices are
/// rejected with the offending line or record named.
pub fn read_rankings(path: &Path, expected: usize) -> Result<Vec<Vec<EntityId>>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    let mut slots: Vec<Option<Vec<EntityId>>> = vec![None; expected];
    for (number, line) in BufReader::new(file).lines().enumerate() {
        let number = number + 1;
        let line = line
            .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RankingLine = serde_json::from_str(&line)
            .map_err(|e| CliError::Validation(format!("line {number}: {e}")))?;
        if parsed.record_index >= expected {
            return Err(CliError::Validation(format!(
                "line {number}: record_index {} out of range for {expected} records",
                parsed.record_index
            )));
        }
        if parsed.candidates.is_empty() {
            return Err(CliError::Validation(format!(
                "line {number}: record {} has no candidates",
                parsed.record_index
            )));
        }
        let slot = &mut slots[parsed.record_index];
        if slot.is_some() {
            return Err(CliError::Validation(format!(
                "line {number}: duplicate ranking for record {}",
                parsed.record_index
            )));
        }
        *slot = Some(parsed.candidates.iter().map(|c| c.entity_id).collect());
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(record, slot)| {
            slot.ok_or_else(|| {
                CliError::Validation(format!("no ranking found for record {record}"))
            })
        })
        .collect()
}
