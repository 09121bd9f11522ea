//! Mention records, split statistics, and linker input rendering.
//!
//! Records arrive as JSONL with exactly six fields per line (`context_left`,
//! `context_right`, `mention`, `label_title`, `label`, `label_id`) and are
//! validated against the active knowledge base on ingestion.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{normalize_title, KnowledgeBase, SkillEntry};
use crate::types::EntityId;

/// Default whitespace-token budget for rendered inputs.
pub const MAX_INPUT_TOKENS: usize = 128;

/// One tagged mention with its context and gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MentionRecord {
    pub context_left: String,
    pub context_right: String,
    pub mention: String,
    pub label_title: String,
    /// Gold entity description; may be empty for `UNK`.
    pub label: String,
    pub label_id: EntityId,
}

impl MentionRecord {
    /// Validate this record against the KB: non-empty mention, resolvable
    /// `label_id`, and `label_title` matching that entry's title.
    pub fn validate(&self, kb: &KnowledgeBase, line: usize) -> Result<()> {
        if self.mention.trim().is_empty() {
            return Err(Error::Parse {
                line,
                message: "mention is empty".into(),
            });
        }
        let entry = kb.entry(self.label_id).ok_or(Error::UnknownLabelId {
            line,
            id: self.label_id,
        })?;
        if normalize_title(&entry.title) != normalize_title(&self.label_title) {
            return Err(Error::LabelTitleMismatch {
                line,
                id: self.label_id,
                label_title: self.label_title.clone(),
                kb_title: entry.title.clone(),
            });
        }
        Ok(())
    }
}

/// Counts describing one data split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub instances: usize,
    /// Distinct gold titles, `UNK` included.
    pub unique_titles: usize,
    /// Records whose gold label is the `UNK` sentinel.
    pub unk_count: usize,
}

/// Read mention records from a JSONL file, validating each against `kb`.
pub fn read_jsonl(path: impl AsRef<Path>, kb: &KnowledgeBase) -> Result<Vec<MentionRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_records(BufReader::new(file), kb)
}

/// Read mention records from any reader; order is preserved and lines are
/// numbered from 1 for error reporting. Blank lines are skipped.
pub fn read_records(reader: impl Read, kb: &KnowledgeBase) -> Result<Vec<MentionRecord>> {
    let reader = BufReader::new(reader);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<records input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MentionRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        record.validate(kb, line_no)?;
        records.push(record);
    }
    Ok(records)
}

/// Write records as JSONL, one object per line, fields in declaration order.
pub fn write_jsonl(path: impl AsRef<Path>, records: &[MentionRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut out, record)
            .map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e)))?;
        out.write_all(b"\n")
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    out.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Count instances, distinct gold titles, and gold-`UNK` records.
pub fn compute_stats(records: &[MentionRecord], kb: &KnowledgeBase) -> SplitStats {
    let mut seen = vec![false; kb.len()];
    let mut unique_titles = 0;
    let mut unk_count = 0;
    for record in records {
        let id = record.label_id as usize;
        if !seen[id] {
            seen[id] = true;
            unique_titles += 1;
        }
        if record.label_id == kb.unk_id() {
            unk_count += 1;
        }
    }
    SplitStats {
        instances: records.len(),
        unique_titles,
        unk_count,
    }
}

/// Render the mention-side input with the default 128-token budget.
pub fn render_mention_input(record: &MentionRecord) -> Result<String> {
    render_mention_input_with(record, MAX_INPUT_TOKENS)
}

/// Render `[CLS] ctxt_l [S] mention [E] ctxt_r [SEP]`, single-space
/// separated, truncated to `max_tokens` whitespace tokens. Truncation drops
/// tokens from the outer ends of the two contexts so the mention and its
/// markers always survive.
pub fn render_mention_input_with(record: &MentionRecord, max_tokens: usize) -> Result<String> {
    let left: Vec<&str> = record.context_left.split_whitespace().collect();
    let right: Vec<&str> = record.context_right.split_whitespace().collect();
    let mention: Vec<&str> = record.mention.split_whitespace().collect();

    let markers = 4; // [CLS] [S] [E] [SEP]
    let budget = max_tokens
        .checked_sub(markers + mention.len())
        .ok_or(Error::MentionTooLong {
            mention_tokens: mention.len(),
            max: max_tokens.saturating_sub(markers),
        })?;

    let (keep_left, keep_right) = if left.len() + right.len() <= budget {
        (left.len(), right.len())
    } else {
        // Split the budget evenly; a side that fits entirely donates its
        // leftover to the other. Odd budgets favor the left context.
        let half = budget / 2;
        if left.len() <= half {
            (left.len(), budget - left.len())
        } else if right.len() <= budget - half {
            (budget - right.len(), right.len())
        } else {
            (budget - half, half)
        }
    };

    let mut tokens = Vec::with_capacity(markers + mention.len() + keep_left + keep_right);
    tokens.push("[CLS]");
    tokens.extend_from_slice(&left[left.len() - keep_left..]);
    tokens.push("[S]");
    tokens.extend_from_slice(&mention);
    tokens.push("[E]");
    tokens.extend_from_slice(&right[..keep_right]);
    tokens.push("[SEP]");
    Ok(tokens.join(" "))
}

/// Render the entity-side input with the default 128-token budget.
pub fn render_entity_input(entry: &SkillEntry) -> String {
    render_entity_input_with(entry, MAX_INPUT_TOKENS)
}

/// Render `[CLS] title [ENT] description [SEP]`, dropping description tokens
/// from the tail until the output fits `max_tokens`. The title is never cut.
pub fn render_entity_input_with(entry: &SkillEntry, max_tokens: usize) -> String {
    let title: Vec<&str> = entry.title.split_whitespace().collect();
    let description: Vec<&str> = entry.description.split_whitespace().collect();

    let markers = 3; // [CLS] [ENT] [SEP]
    let budget = max_tokens.saturating_sub(markers + title.len());
    let keep = description.len().min(budget);

    let mut tokens = Vec::with_capacity(markers + title.len() + keep);
    tokens.push("[CLS]");
    tokens.extend_from_slice(&title);
    tokens.push("[ENT]");
    tokens.extend_from_slice(&description[..keep]);
    tokens.push("[SEP]");
    tokens.join(" ")
}
