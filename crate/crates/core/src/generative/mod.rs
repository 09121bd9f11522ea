//! Generative linking: titles are scored token-by-token under a
//! [`TokenModel`] and decoded with beam search constrained by a prefix trie,
//! so only titles that exist in the KB (or `UNK`) can ever be produced.

mod model;

pub use model::{
    fit_token_model, title_tokens, BigramTokenModel, GenModelConfig, StepOption, TokenModel,
};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::taxonomy::KnowledgeBase;
use crate::types::{top_k_candidates, EntityId, ScoredCandidate};

/// Prefix trie over the token sequences of all KB titles. Every
/// root-to-end-marker path is exactly one entity's tokenized normalized
/// title (the sentinel contributes the literal single-token path `UNK`).
#[derive(Debug, Clone)]
pub struct TitleTrie {
    nodes: Vec<TrieNode>,
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: BTreeMap<String, usize>,
    /// Entity whose title ends at this node, if any.
    terminal: Option<EntityId>,
}

/// What may follow a given prefix: continuation tokens (sorted) and whether
/// the end marker is allowed because a title ends here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllowedNext {
    pub tokens: Vec<String>,
    pub end: bool,
}

impl AllowedNext {
    /// The step options in decoding order: tokens ascending, end last.
    pub fn options(&self) -> Vec<StepOption> {
        let mut options: Vec<StepOption> = self
            .tokens
            .iter()
            .map(|t| StepOption::Word(t.clone()))
            .collect();
        if self.end {
            options.push(StepOption::End);
        }
        options
    }
}

/// Build the title trie over every entity of the KB.
pub fn build_trie(kb: &KnowledgeBase) -> TitleTrie {
    let mut trie = TitleTrie {
        nodes: vec![TrieNode::default()],
    };
    for entry in kb.entries() {
        let mut node = 0usize;
        for token in title_tokens(entry) {
            node = match trie.nodes[node].children.get(&token) {
                Some(&child) => child,
                None => {
                    let child = trie.nodes.len();
                    trie.nodes.push(TrieNode::default());
                    trie.nodes[node].children.insert(token, child);
                    child
                }
            };
        }
        debug_assert!(
            trie.nodes[node].terminal.is_none(),
            "KB title uniqueness precludes duplicate trie paths"
        );
        trie.nodes[node].terminal = Some(entry.id);
    }
    trie
}

impl TitleTrie {
    fn walk(&self, prefix: &[String]) -> Result<usize> {
        let mut node = 0usize;
        for token in prefix {
            node = *self.nodes[node]
                .children
                .get(token)
                .ok_or_else(|| Error::InvalidTriePrefix {
                    prefix: prefix.join(" "),
                })?;
        }
        Ok(node)
    }

    fn allowed_at(&self, node: usize) -> AllowedNext {
        let n = &self.nodes[node];
        AllowedNext {
            tokens: n.children.keys().cloned().collect(),
            end: n.terminal.is_some(),
        }
    }

    /// Edge labels leaving the prefix node, plus the end marker iff a title
    /// ends there. The prefix must be a valid path from the root.
    pub fn allowed_next_tokens(&self, prefix: &[String]) -> Result<AllowedNext> {
        Ok(self.allowed_at(self.walk(prefix)?))
    }

    /// Number of complete title paths (= number of KB entities).
    pub fn path_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.terminal.is_some()).count()
    }

    /// All complete paths with their entities, in depth-first token order.
    pub fn paths(&self) -> Vec<(Vec<String>, EntityId)> {
        let mut out = Vec::new();
        let mut stack: Vec<String> = Vec::new();
        self.collect_paths(0, &mut stack, &mut out);
        out
    }

    fn collect_paths(&self, node: usize, stack: &mut Vec<String>, out: &mut Vec<(Vec<String>, EntityId)>) {
        if let Some(id) = self.nodes[node].terminal {
            out.push((stack.clone(), id));
        }
        for (token, &child) in &self.nodes[node].children {
            stack.push(token.clone());
            self.collect_paths(child, stack, out);
            stack.pop();
        }
    }

    /// Every non-root node either continues or carries the end marker.
    #[cfg(test)]
    fn check_no_dead_ends(&self) {
        for (i, node) in self.nodes.iter().enumerate() {
            if i > 0 {
                assert!(
                    node.terminal.is_some() || !node.children.is_empty(),
                    "trie node {i} is a dead end"
                );
            }
        }
    }
}

/// Log-probabilities of the allowed options at one step, renormalized over
/// the allowed subset. Options whose renormalized probability is exactly 0
/// are dropped; an all-zero step is rejected as a broken model.
fn step_log_probs(
    model: &dyn TokenModel,
    x_tokens: &[String],
    prefix: &[String],
    allowed: &AllowedNext,
) -> Result<Vec<(StepOption, f64)>> {
    let options = allowed.options();
    let probabilities = model.step_probabilities(x_tokens, prefix, &options);
    assert_eq!(
        probabilities.len(),
        options.len(),
        "token model must score every option"
    );
    let total: f64 = probabilities.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::invalid(format!(
            "token model assigned zero total probability after prefix {:?}",
            prefix.join(" ")
        )));
    }
    Ok(options
        .into_iter()
        .zip(probabilities)
        .filter(|(_, p)| *p > 0.0)
        .map(|(option, p)| (option, (p / total).ln()))
        .collect())
}

fn tokenize_input(x: &str) -> Vec<String> {
    x.split_whitespace().map(str::to_string).collect()
}

/// Log-score of a complete title path `y` given the rendered mention input
/// `x`: the sum over steps of the log-probability of `y`'s next token,
/// renormalized over the trie-allowed options at that step.
pub fn sequence_score(
    model: &dyn TokenModel,
    trie: &TitleTrie,
    x: &str,
    y: &[String],
) -> Result<f64> {
    let x_tokens = tokenize_input(x);
    let mut prefix: Vec<String> = Vec::with_capacity(y.len());
    let mut total = 0.0;
    for token in y {
        let allowed = trie.allowed_next_tokens(&prefix)?;
        if !allowed.tokens.iter().any(|t| t == token) {
            return Err(Error::InvalidTriePrefix {
                prefix: format!("{} {token}", prefix.join(" ")).trim().to_string(),
            });
        }
        let scored = step_log_probs(model, &x_tokens, &prefix, &allowed)?;
        let target = StepOption::Word(token.clone());
        let log_prob = scored
            .iter()
            .find(|(option, _)| *option == target)
            .map(|(_, lp)| *lp)
            .ok_or_else(|| {
                Error::invalid(format!("zero-probability step at token {token:?}"))
            })?;
        total += log_prob;
        prefix.push(token.clone());
    }
    let allowed = trie.allowed_next_tokens(&prefix)?;
    if !allowed.end {
        return Err(Error::IncompleteTitlePath {
            tokens: y.join(" "),
        });
    }
    let scored = step_log_probs(model, &x_tokens, &prefix, &allowed)?;
    let log_prob = scored
        .iter()
        .find(|(option, _)| *option == StepOption::End)
        .map(|(_, lp)| *lp)
        .ok_or_else(|| Error::invalid("zero-probability step at the end marker"))?;
    Ok(total + log_prob)
}

/// One partial hypothesis during beam search.
struct Beam {
    node: usize,
    prefix: Vec<String>,
    log_prob: f64,
}

/// Beam-search decode over the trie: expand level-synchronously with
/// per-step renormalization, bank hypotheses that reach the end marker, and
/// prune continuing hypotheses to `beam_width`. Returns the top `k`
/// completed titles (fewer if the KB has fewer), score descending, ties by
/// ascending entity id. Every returned id is a valid KB entry by
/// construction.
pub fn constrained_beam_search(
    model: &dyn TokenModel,
    trie: &TitleTrie,
    x: &str,
    beam_width: usize,
    k: usize,
) -> Result<Vec<ScoredCandidate>> {
    if k == 0 || beam_width < k {
        return Err(Error::invalid(format!(
            "beam_width {beam_width} and k {k} must satisfy beam_width >= k >= 1"
        )));
    }
    let x_tokens = tokenize_input(x);
    let mut beams = vec![Beam {
        node: 0,
        prefix: Vec::new(),
        log_prob: 0.0,
    }];
    let mut completed: Vec<ScoredCandidate> = Vec::new();
    while !beams.is_empty() {
        let mut expansions: Vec<Beam> = Vec::new();
        for beam in &beams {
            let allowed = trie.allowed_at(beam.node);
            let scored = step_log_probs(model, &x_tokens, &beam.prefix, &allowed)?;
            for (option, log_prob) in scored {
                match option {
                    StepOption::End => {
                        let entity_id = trie.nodes[beam.node]
                            .terminal
                            .expect("end marker only allowed at terminal nodes");
                        completed.push(ScoredCandidate {
                            entity_id,
                            score: beam.log_prob + log_prob,
                        });
                    }
                    StepOption::Word(token) => {
                        let child = trie.nodes[beam.node].children[&token];
                        let mut prefix = beam.prefix.clone();
                        prefix.push(token);
                        expansions.push(Beam {
                            node: child,
                            prefix,
                            log_prob: beam.log_prob + log_prob,
                        });
                    }
                }
            }
        }
        expansions.sort_by(|a, b| {
            b.log_prob
                .partial_cmp(&a.log_prob)
                .expect("step log-probabilities are finite")
                .then_with(|| a.prefix.cmp(&b.prefix))
        });
        expansions.truncate(beam_width);
        beams = expansions;
    }
    Ok(top_k_candidates(completed, k))
}
