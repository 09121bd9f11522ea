//! The closed knowledge base of skill entries, including the `UNK` sentinel.
//!
//! A [`KnowledgeBase`] is immutable after loading: ids are dense `0..N-1` in
//! file order, normalized titles are pairwise distinct, and exactly one entry
//! carries the reserved title `UNK`. If the input file has no `UNK` row, one
//! is appended automatically so both linkers can treat "unlinkable" as an
//! ordinary prediction option.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::EntityId;

/// Reserved title of the sentinel entry for unlinkable mentions.
pub const UNK_TITLE: &str = "UNK";

/// Canonical form used for title identity: lowercased, internal whitespace
/// collapsed to single spaces, outer whitespace trimmed.
pub fn normalize_title(title: &str) -> String {
    title
        .split_whitespace()
        .map(|t| t.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// One entry of the knowledge base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillEntry {
    /// Dense index into the KB, assigned in file order.
    pub id: EntityId,
    /// Optional short taxonomy code, e.g. `S4.8.1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    pub title: String,
    #[serde(default)]
    pub description: String,
}

impl SkillEntry {
    /// Whether this is the reserved `UNK` sentinel.
    pub fn is_unk(&self) -> bool {
        self.title == UNK_TITLE
    }
}

/// Supported KB file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KbFormat {
    /// `code<TAB>title<TAB>description` rows; trailing columns may be
    /// omitted, and a bare one-column row is read as a title.
    Tsv,
    /// One JSON object per line with `title` plus optional `code` and
    /// `description` fields.
    Jsonl,
}

/// The closed entity inventory, indexed by normalized title.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    entries: Vec<SkillEntry>,
    title_index: HashMap<String, EntityId>,
    unk_id: EntityId,
}

impl KnowledgeBase {
    /// Build a KB from entries in order, assigning ids `0..N-1`. Appends an
    /// `UNK` entry when none of the rows is the sentinel.
    ///
    /// Rows are `(code, title, description)`; row numbers in errors are
    /// 1-based positions in `rows`.
    pub fn from_rows(rows: Vec<(Option<String>, String, String)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyKb);
        }
        let mut entries = Vec::with_capacity(rows.len() + 1);
        let mut title_index = HashMap::with_capacity(rows.len() + 1);
        let mut unk_id = None;
        for (i, (code, title, description)) in rows.into_iter().enumerate() {
            let row = i + 1;
            let title = title.trim().to_string();
            if title.is_empty() {
                return Err(Error::Parse {
                    line: row,
                    message: "title is empty".into(),
                });
            }
            let normalized = normalize_title(&title);
            let id = entries.len() as EntityId;
            if let Some(&first) = title_index.get(&normalized) {
                return Err(Error::DuplicateTitle {
                    title: normalized,
                    first_row: first as usize + 1,
                    second_row: row,
                });
            }
            if normalized == "unk" {
                if title != UNK_TITLE {
                    return Err(Error::Parse {
                        line: row,
                        message: format!(
                            "the sentinel row must be titled exactly {UNK_TITLE:?}, found {title:?}"
                        ),
                    });
                }
                unk_id = Some(id);
            }
            title_index.insert(normalized, id);
            entries.push(SkillEntry {
                id,
                code: code.map(|c| c.trim().to_string()).filter(|c| !c.is_empty()),
                title,
                description: description.trim().to_string(),
            });
        }
        let unk_id = match unk_id {
            Some(id) => id,
            None => {
                let id = entries.len() as EntityId;
                title_index.insert("unk".to_string(), id);
                entries.push(SkillEntry {
                    id,
                    code: None,
                    title: UNK_TITLE.to_string(),
                    description: String::new(),
                });
                id
            }
        };
        Ok(KnowledgeBase {
            entries,
            title_index,
            unk_id,
        })
    }

    /// Load a KB from a file in the given format.
    pub fn load(path: impl AsRef<Path>, format: KbFormat) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::read(BufReader::new(file), format)
    }

    /// Load a KB from any reader. Rows are numbered from 1; blank lines are
    /// skipped but still counted.
    pub fn read(reader: impl Read, format: KbFormat) -> Result<Self> {
        let reader = BufReader::new(reader);
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::io("<kb input>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            rows.push(parse_row(&line, line_no, format)?);
        }
        Self::from_rows(rows)
    }

    pub fn entries(&self) -> &[SkillEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn unk_id(&self) -> EntityId {
        self.unk_id
    }

    pub fn entry(&self, id: EntityId) -> Option<&SkillEntry> {
        self.entries.get(id as usize)
    }

    /// Look up an entry by title, matching on the normalized form.
    pub fn lookup_by_title(&self, title: &str) -> Option<&SkillEntry> {
        let id = *self.title_index.get(&normalize_title(title))?;
        Some(&self.entries[id as usize])
    }

    /// Check every structural invariant. Loading always produces a valid KB;
    /// this is the explicit re-check behind `kb validate`.
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::EmptyKb);
        }
        for (i, entry) in self.entries.iter().enumerate() {
            if entry.id as usize != i {
                return Err(Error::invalid(format!(
                    "entry at position {i} has id {}, ids must be dense",
                    entry.id
                )));
            }
            if entry.title.trim().is_empty() {
                return Err(Error::invalid(format!("entry {i} has an empty title")));
            }
            let looked_up = self
                .lookup_by_title(&entry.title)
                .ok_or_else(|| Error::invalid(format!("entry {i} missing from title index")))?;
            if looked_up.id != entry.id {
                return Err(Error::invalid(format!(
                    "title index maps {:?} to {}, expected {}",
                    entry.title, looked_up.id, entry.id
                )));
            }
        }
        if self.title_index.len() != self.entries.len() {
            return Err(Error::invalid("title index size differs from entry count"));
        }
        let unk = self
            .entry(self.unk_id)
            .ok_or_else(|| Error::invalid("unk_id out of range"))?;
        if unk.title != UNK_TITLE {
            return Err(Error::invalid(format!(
                "unk_id {} points at {:?}, not {UNK_TITLE:?}",
                self.unk_id, unk.title
            )));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct JsonKbRow {
    #[serde(default)]
    code: Option<String>,
    title: String,
    #[serde(default)]
    description: String,
}

fn parse_row(
    line: &str,
    line_no: usize,
    format: KbFormat,
) -> Result<(Option<String>, String, String)> {
    match format {
        KbFormat::Tsv => {
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                [title] => Ok((None, title.to_string(), String::new())),
                [code, title] => Ok((Some(code.to_string()), title.to_string(), String::new())),
                [code, title, description] => Ok((
                    Some(code.to_string()),
                    title.to_string(),
                    description.to_string(),
                )),
                _ => Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 1-3 tab-separated fields, found {}", fields.len()),
                }),
            }
        }
        KbFormat::Jsonl => {
            let row: JsonKbRow = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            Ok((row.code, row.title, row.description))
        }
    }
}
