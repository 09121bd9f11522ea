use serde::{Deserialize, Serialize};

/// Dense index of an entity within the active knowledge base.
pub type EntityId = u32;

/// One ranked candidate: an entity id and the score the ranker assigned it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub entity_id: EntityId,
    pub score: f64,
}

/// Sort candidates by descending score, breaking ties by ascending entity id,
/// and keep the first `k`. Scores must be finite.
pub(crate) fn top_k_candidates(mut scored: Vec<ScoredCandidate>, k: usize) -> Vec<ScoredCandidate> {
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("candidate scores must be finite")
            .then(a.entity_id.cmp(&b.entity_id))
    });
    scored.truncate(k);
    scored
}
