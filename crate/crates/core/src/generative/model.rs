//! Token-level scoring model behind constrained decoding: a conditional
//! bigram over title tokens with additive smoothing, mixed with a
//! mention-affinity term that favors tokens present in the mention input.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::MentionRecord;
use crate::error::{Error, Result};
use crate::taxonomy::{normalize_title, KnowledgeBase, SkillEntry, UNK_TITLE};

/// Format tag written into token-model checkpoints.
const CHECKPOINT_VERSION: &str = "skillink/genmodel/v1";

/// One decoding step either emits a title token or closes the title.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StepOption {
    Word(String),
    End,
}

/// Next-token distribution p(option | previous tokens, mention input).
///
/// Implementations must return one probability per option, each >= 0, drawn
/// from a proper distribution over the title-token universe plus the end
/// marker; the decoder renormalizes over the currently allowed subset.
pub trait TokenModel {
    fn step_probabilities(
        &self,
        x_tokens: &[String],
        prefix: &[String],
        options: &[StepOption],
    ) -> Vec<f64>;
}

/// Smoothing and mixing weights of [`BigramTokenModel`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GenModelConfig {
    /// Additive smoothing mass per universe symbol.
    pub alpha: f64,
    /// Weight of the bigram term; `1 - lambda` goes to mention affinity.
    pub lambda: f64,
}

impl Default for GenModelConfig {
    fn default() -> Self {
        GenModelConfig {
            alpha: 0.1,
            lambda: 0.5,
        }
    }
}

/// Successor counts of one title token.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct SuccessorCounts {
    words: BTreeMap<String, u64>,
    end: u64,
    total: u64,
}

/// Conditional bigram over gold-title token sequences with additive
/// smoothing (`alpha`), mixed (`lambda`) with a mention-affinity term
/// proportional to how often a candidate token occurs in the mention input
/// (uniform over the universe when nothing overlaps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigramTokenModel {
    alpha: f64,
    lambda: f64,
    /// Sorted universe of title tokens (the end marker is implicit).
    vocabulary: Vec<String>,
    /// Counts of title-initial tokens.
    first: BTreeMap<String, u64>,
    first_total: u64,
    /// Counts of within-title successors, keyed by the previous token.
    transitions: BTreeMap<String, SuccessorCounts>,
}

/// Token sequence an entity contributes to the trie and the token model:
/// the literal `UNK` for the sentinel, whitespace tokens of the normalized
/// title otherwise.
pub fn title_tokens(entry: &SkillEntry) -> Vec<String> {
    if entry.is_unk() {
        vec![UNK_TITLE.to_string()]
    } else {
        normalize_title(&entry.title)
            .split_whitespace()
            .map(str::to_string)
            .collect()
    }
}

/// Accumulate bigram counts from the gold titles of `records`, over the
/// token universe of the KB's titles.
pub fn fit_token_model(
    records: &[MentionRecord],
    kb: &KnowledgeBase,
    config: GenModelConfig,
) -> Result<BigramTokenModel> {
    if records.is_empty() {
        return Err(Error::invalid("token-model fitting requires at least one record"));
    }
    if !(config.alpha > 0.0) {
        return Err(Error::invalid("alpha must be positive to keep every step probability nonzero"));
    }
    if !(0.0..=1.0).contains(&config.lambda) {
        return Err(Error::invalid("lambda must lie in [0, 1]"));
    }

    let mut universe: Vec<String> = kb.entries().iter().flat_map(|e| title_tokens(e)).collect();
    universe.sort();
    universe.dedup();

    let mut first: BTreeMap<String, u64> = BTreeMap::new();
    let mut first_total = 0u64;
    let mut transitions: BTreeMap<String, SuccessorCounts> = BTreeMap::new();
    for record in records {
        let sequence = if record.label_title == UNK_TITLE {
            vec![UNK_TITLE.to_string()]
        } else {
            normalize_title(&record.label_title)
                .split_whitespace()
                .map(str::to_string)
                .collect()
        };
        let Some(head) = sequence.first() else { continue };
        *first.entry(head.clone()).or_insert(0) += 1;
        first_total += 1;
        for pair in sequence.windows(2) {
            let slot = transitions.entry(pair[0].clone()).or_default();
            *slot.words.entry(pair[1].clone()).or_insert(0) += 1;
            slot.total += 1;
        }
        let last = sequence.last().expect("sequence has a head");
        let slot = transitions.entry(last.clone()).or_default();
        slot.end += 1;
        slot.total += 1;
    }

    Ok(BigramTokenModel {
        alpha: config.alpha,
        lambda: config.lambda,
        vocabulary: universe,
        first,
        first_total,
        transitions,
    })
}

impl BigramTokenModel {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Universe size including the end marker.
    fn universe_size(&self) -> f64 {
        (self.vocabulary.len() + 1) as f64
    }

    fn bigram_probability(&self, prefix: &[String], option: &StepOption) -> f64 {
        let alpha = self.alpha;
        let universe = self.universe_size();
        let (count, total) = match prefix.last() {
            None => {
                let count = match option {
                    StepOption::Word(w) => self.first.get(w).copied().unwrap_or(0),
                    StepOption::End => 0, // titles are never empty
                };
                (count, self.first_total)
            }
            Some(previous) => match self.transitions.get(previous) {
                Some(slot) => {
                    let count = match option {
                        StepOption::Word(w) => slot.words.get(w).copied().unwrap_or(0),
                        StepOption::End => slot.end,
                    };
                    (count, slot.total)
                }
                None => (0, 0),
            },
        };
        (count as f64 + alpha) / (total as f64 + alpha * universe)
    }

    /// Occurrence counts of in-universe tokens in the mention input, and
    /// their total. Comparison is lowercase on the mention side; universe
    /// tokens are already normalized.
    fn affinity_counts(&self, x_tokens: &[String]) -> (HashMap<String, u64>, u64) {
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut total = 0u64;
        for token in x_tokens {
            let lowered = token.to_lowercase();
            if self.vocabulary.binary_search(&lowered).is_ok() {
                *counts.entry(lowered).or_insert(0) += 1;
                total += 1;
            }
        }
        (counts, total)
    }
}

impl TokenModel for BigramTokenModel {
    fn step_probabilities(
        &self,
        x_tokens: &[String],
        prefix: &[String],
        options: &[StepOption],
    ) -> Vec<f64> {
        let (affinity, overlap_total) = self.affinity_counts(x_tokens);
        options
            .iter()
            .map(|option| {
                let bigram = self.bigram_probability(prefix, option);
                let affinity = if overlap_total == 0 {
                    1.0 / self.universe_size()
                } else {
                    match option {
                        StepOption::Word(w) => {
                            affinity.get(w).copied().unwrap_or(0) as f64 / overlap_total as f64
                        }
                        StepOption::End => 0.0,
                    }
                };
                self.lambda * bigram + (1.0 - self.lambda) * affinity
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: String,
    #[serde(flatten)]
    model: BigramTokenModel,
}

impl BigramTokenModel {
    /// Write the fitted counts as versioned JSON.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION.to_string(),
            model: self.clone(),
        };
        let json = serde_json::to_string(&file).expect("checkpoint serialization cannot fail");
        fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Read a checkpoint written by [`BigramTokenModel::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let file: CheckpointFile = serde_json::from_str(&json).map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })?;
        if file.version != CHECKPOINT_VERSION {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "{}: unsupported checkpoint version {:?}, expected {CHECKPOINT_VERSION:?}",
                    path.display(),
                    file.version
                ),
            });
        }
        Ok(file.model)
    }
}
