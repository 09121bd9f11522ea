//! Skill linking against a closed taxonomy knowledge base.
//!
//! The crate covers the full span-level linking pipeline:
//!
//! * [`taxonomy`] — load and index the closed entity inventory, including the
//!   `UNK` sentinel for unlinkable mentions.
//! * [`corpus`] — mention records with context, split statistics, and the
//!   textual input rendering consumed by both linkers.
//! * [`alignment`] — fuzzy n-gram span alignment for synthesizing mention
//!   records from (sentence, target title) pairs.
//! * [`biencoder`] — dense retrieval: a trainable text encoder scored by dot
//!   product, with in-batch softmax loss and mined hard negatives.
//! * [`generative`] — autoregressive title scoring with beam search
//!   constrained by a prefix trie, so only valid titles can be produced.
//! * [`baselines`] — seeded random ranking and TF-IDF retrieval.
//! * [`eval`] — Accuracy@k, MRR, UNK-subset evaluation, and multi-seed
//!   aggregation.

pub mod alignment;
pub mod baselines;
pub mod biencoder;
pub mod corpus;
mod error;
pub mod eval;
pub mod generative;
pub mod taxonomy;
mod types;

pub use alignment::{AlignConfig, AlignmentResult, CharTrigramEmbedder, Embedder};
pub use biencoder::{EncoderParams, TrainConfig, TrainHistory, TrainOutcome};
pub use corpus::{MentionRecord, SplitStats};
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use generative::{BigramTokenModel, TitleTrie, TokenModel};
pub use taxonomy::{KbFormat, KnowledgeBase, SkillEntry};
pub use types::{EntityId, ScoredCandidate};
