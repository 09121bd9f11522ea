//! Reference baselines for the linking task: seeded uniform random ranking
//! and TF-IDF retrieval over entity titles + descriptions.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::MentionRecord;
use crate::error::{Error, Result};
use crate::taxonomy::KnowledgeBase;
use crate::types::{top_k_candidates, EntityId, ScoredCandidate};

/// First `k` entities of a seeded uniform permutation of the candidate pool,
/// all with score 0. The pool is explicit so callers can rank against the
/// full KB or any restricted candidate set.
pub fn random_rank(
    candidate_ids: &[EntityId],
    k: usize,
    seed: u64,
) -> Result<Vec<ScoredCandidate>> {
    if candidate_ids.is_empty() {
        return Err(Error::invalid("random ranking requires a non-empty candidate pool"));
    }
    if k == 0 || k > candidate_ids.len() {
        return Err(Error::invalid(format!(
            "k = {k} out of range for a pool of {} candidates",
            candidate_ids.len()
        )));
    }
    let mut ids = candidate_ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    ids.truncate(k);
    Ok(ids
        .into_iter()
        .map(|entity_id| ScoredCandidate {
            entity_id,
            score: 0.0,
        })
        .collect())
}

fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(|t| t.to_lowercase())
}

/// Sparse TF-IDF vectors over every KB entity's title + description tokens.
///
/// Term frequency is the raw count, idf = ln((1 + N) / (1 + df)) + 1, and
/// stored vectors are L2-normalized. Ranking recomputes cosine norms, so it
/// is invariant to rescaling any single entity vector.
#[derive(Debug, Clone)]
pub struct TfidfIndex {
    /// Token → dimension, assigned in first-seen order over entities.
    vocabulary: HashMap<String, usize>,
    /// Per-dimension document frequency.
    document_frequency: Vec<usize>,
    /// Number of documents (= KB entities) the idf was computed from.
    documents: usize,
    /// One sparse `(dimension, weight)` vector per entity, in id order,
    /// dimensions ascending.
    vectors: Vec<Vec<(usize, f64)>>,
}

/// Build the TF-IDF index over all entities of the KB, including the `UNK`
/// sentinel (whose document is just its title).
pub fn build_tfidf(kb: &KnowledgeBase) -> TfidfIndex {
    let mut vocabulary: HashMap<String, usize> = HashMap::new();
    let mut document_frequency: Vec<usize> = Vec::new();
    let mut docs: Vec<Vec<usize>> = Vec::with_capacity(kb.len());

    for entry in kb.entries() {
        let mut dims: Vec<usize> = tokenize(&entry.title)
            .chain(tokenize(&entry.description))
            .map(|token| {
                let next = vocabulary.len();
                let dim = *vocabulary.entry(token).or_insert(next);
                if dim == document_frequency.len() {
                    document_frequency.push(0);
                }
                dim
            })
            .collect();
        dims.sort_unstable();
        let mut seen = usize::MAX;
        for &d in &dims {
            if d != seen {
                document_frequency[d] += 1;
                seen = d;
            }
        }
        docs.push(dims);
    }

    let documents = docs.len();
    let idf = |dim: usize| ((1 + documents) as f64 / (1 + document_frequency[dim]) as f64).ln() + 1.0;

    let vectors = docs
        .into_iter()
        .map(|dims| {
            let mut vector: Vec<(usize, f64)> = Vec::new();
            let mut i = 0;
            while i < dims.len() {
                let dim = dims[i];
                let mut count = 0usize;
                while i < dims.len() && dims[i] == dim {
                    count += 1;
                    i += 1;
                }
                vector.push((dim, count as f64 * idf(dim)));
            }
            let norm = vector.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (_, w) in &mut vector {
                    *w /= norm;
                }
            }
            vector
        })
        .collect();

    TfidfIndex {
        vocabulary,
        document_frequency,
        documents,
        vectors,
    }
}

impl TfidfIndex {
    /// Inverse document frequency of a known token.
    pub fn idf(&self, token: &str) -> Option<f64> {
        let &dim = self.vocabulary.get(token)?;
        Some(((1 + self.documents) as f64 / (1 + self.document_frequency[dim]) as f64).ln() + 1.0)
    }

    /// Number of distinct tokens indexed.
    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }

    /// TF-IDF vector of the mention text alone (contexts are ignored),
    /// unnormalized; out-of-vocabulary tokens are dropped.
    fn query_vector(&self, mention: &str) -> Vec<(usize, f64)> {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for token in tokenize(mention) {
            if let Some(&dim) = self.vocabulary.get(&token) {
                *counts.entry(dim).or_insert(0.0) += 1.0;
            }
        }
        let mut vector: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(dim, tf)| {
                let idf =
                    ((1 + self.documents) as f64 / (1 + self.document_frequency[dim]) as f64).ln() + 1.0;
                (dim, tf * idf)
            })
            .collect();
        vector.sort_unstable_by_key(|&(dim, _)| dim);
        vector
    }
}

fn sparse_cosine(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let mut dot = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    let na = a.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    let nb = b.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Rank all indexed entities by cosine similarity between the mention's
/// query vector and each entity vector. Top `k` (capped at the entity
/// count), descending score, ties by ascending id.
pub fn tfidf_rank(index: &TfidfIndex, record: &MentionRecord, k: usize) -> Vec<ScoredCandidate> {
    let query = index.query_vector(&record.mention);
    let scored: Vec<ScoredCandidate> = index
        .vectors
        .iter()
        .enumerate()
        .map(|(id, vector)| ScoredCandidate {
            entity_id: id as EntityId,
            score: sparse_cosine(&query, vector),
        })
        .collect();
    top_k_candidates(scored, k)
}
