use crate::types::EntityId;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced while loading, validating, training, or ranking.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate title {title:?}: rows {first_row} and {second_row} normalize to the same title")]
    DuplicateTitle {
        title: String,
        first_row: usize,
        second_row: usize,
    },

    #[error("knowledge base file is empty")]
    EmptyKb,

    #[error("line {line}: label_id {id} does not exist in the knowledge base")]
    UnknownLabelId { line: usize, id: EntityId },

    #[error("line {line}: label_title {label_title:?} does not match KB title {kb_title:?} of entry {id}")]
    LabelTitleMismatch {
        line: usize,
        id: EntityId,
        label_title: String,
        kb_title: String,
    },

    #[error("mention has {mention_tokens} tokens but the budget leaves room for at most {max}")]
    MentionTooLong { mention_tokens: usize, max: usize },

    #[error("prefix {prefix:?} is not a valid path in the title trie")]
    InvalidTriePrefix { prefix: String },

    #[error("token sequence {tokens:?} is not a complete title in the trie")]
    IncompleteTitlePath { tokens: String },

    #[error("non-finite loss at training step {step}")]
    NonFiniteLoss { step: usize },

    #[error("non-finite score encountered in loss computation")]
    NonFiniteScore,

    #[error("record {record}: ranking has {len} candidates, fewer than k = {k}")]
    RankingTooShort { record: usize, len: usize, k: usize },

    #[error("{0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
