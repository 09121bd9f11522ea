//! Dense retrieval over the taxonomy: mentions and entities are embedded
//! into a shared space by a bag-of-token-embeddings encoder, trained with an
//! in-batch softmax loss plus mined hard negatives, and ranked by dot
//! product against every KB entry (including `UNK`).

mod train;

pub use train::{train, TrainConfig, TrainHistory, TrainOutcome};

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{render_entity_input, render_mention_input, MentionRecord};
use crate::error::{Error, Result};
use crate::taxonomy::{KnowledgeBase, SkillEntry};
use crate::types::{top_k_candidates, EntityId, ScoredCandidate};

/// Reserved token that absorbs anything outside the trained vocabulary.
pub const OOV_TOKEN: &str = "[oov]";

/// Format tag written into encoder checkpoints.
const CHECKPOINT_VERSION: &str = "skillink/biencoder/v1";

/// Token-embedding table of the encoder. The encoder is uncased: lookups
/// lowercase their tokens, and the vocabulary stores lowercase keys only.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    vocab: HashMap<String, usize>,
    /// Row-major `|vocab| x dimension` embedding matrix.
    matrix: Vec<Vec<f64>>,
    dimension: usize,
    oov_row: usize,
}

impl EncoderParams {
    /// Assemble params from a token list (row order) and matching matrix.
    /// The vocabulary must contain [`OOV_TOKEN`] and be duplicate-free; all
    /// weights must be finite.
    pub fn from_parts(tokens: Vec<String>, matrix: Vec<Vec<f64>>, dimension: usize) -> Result<Self> {
        if tokens.len() != matrix.len() {
            return Err(Error::invalid(format!(
                "vocabulary has {} tokens but the matrix has {} rows",
                tokens.len(),
                matrix.len()
            )));
        }
        if dimension == 0 {
            return Err(Error::invalid("encoder dimension must be positive"));
        }
        let mut vocab = HashMap::with_capacity(tokens.len());
        for (index, token) in tokens.into_iter().enumerate() {
            if token != token.to_lowercase() {
                return Err(Error::invalid(format!(
                    "vocabulary token {token:?} is not lowercase"
                )));
            }
            if vocab.insert(token.clone(), index).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token {token:?}")));
            }
        }
        let oov_row = *vocab
            .get(OOV_TOKEN)
            .ok_or_else(|| Error::invalid(format!("vocabulary lacks the reserved {OOV_TOKEN} token")))?;
        for (row, weights) in matrix.iter().enumerate() {
            if weights.len() != dimension {
                return Err(Error::invalid(format!(
                    "matrix row {row} has {} weights, expected {dimension}",
                    weights.len()
                )));
            }
            if weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::invalid(format!("matrix row {row} contains a non-finite weight")));
            }
        }
        Ok(EncoderParams {
            vocab,
            matrix,
            dimension,
            oov_row,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vocab_len(&self) -> usize {
        self.matrix.len()
    }

    /// Row index a token resolves to (the OOV row when unknown).
    pub fn row_of(&self, token: &str) -> usize {
        *self
            .vocab
            .get(&token.to_lowercase())
            .unwrap_or(&self.oov_row)
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.matrix[index]
    }

    pub(crate) fn row_mut(&mut self, index: usize) -> &mut Vec<f64> {
        &mut self.matrix[index]
    }

    /// Tokens in row order, for serialization.
    fn tokens_in_row_order(&self) -> Vec<String> {
        let mut tokens = vec![String::new(); self.matrix.len()];
        for (token, &index) in &self.vocab {
            tokens[index] = token.clone();
        }
        tokens
    }

    /// Write the checkpoint as versioned JSON (exact f64 round-trip).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION.to_string(),
            dimension: self.dimension,
            vocab: self.tokens_in_row_order(),
            matrix: self.matrix.clone(),
        };
        let json = serde_json::to_string(&file).expect("checkpoint serialization cannot fail");
        fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Read a checkpoint written by [`EncoderParams::save`].
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
        EncoderParams::from_parts(file.vocab, file.matrix, file.dimension)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: String,
    dimension: usize,
    vocab: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

fn l2_normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// Mean of the embedding rows of the whitespace tokens of `rendered`
/// (markers included), L2-normalized unless it is the zero vector.
pub fn encode_text(params: &EncoderParams, rendered: &str) -> Vec<f64> {
    let mut sum = vec![0.0; params.dimension];
    let mut count = 0usize;
    for token in rendered.split_whitespace() {
        let row = params.row(params.row_of(token));
        for (s, w) in sum.iter_mut().zip(row) {
            *s += w;
        }
        count += 1;
    }
    if count > 0 {
        for s in &mut sum {
            *s /= count as f64;
        }
    }
    l2_normalize(sum)
}

/// Relevance score of a mention/entity vector pair: their dot product.
pub fn score_pair(mention_vec: &[f64], entity_vec: &[f64]) -> f64 {
    assert_eq!(
        mention_vec.len(),
        entity_vec.len(),
        "scored vectors must share a dimension"
    );
    mention_vec.iter().zip(entity_vec).map(|(m, e)| m * e).sum()
}

/// Softmax cross-entropy over explicit score rows: the mean over rows of
/// `-scores[i][gold_cols[i]] + logsumexp(scores[i])`, with a max-shifted
/// logsumexp. Exposed so the arithmetic can be checked on hand-set scores.
pub fn loss_from_scores(scores: &[Vec<f64>], gold_cols: &[usize]) -> Result<f64> {
    assert_eq!(scores.len(), gold_cols.len(), "one gold column per score row");
    assert!(!scores.is_empty(), "loss over an empty batch is undefined");
    let mut total = 0.0;
    for (row, &gold) in scores.iter().zip(gold_cols) {
        assert!(gold < row.len(), "gold column inside the candidate set");
        if row.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFiniteScore);
        }
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        total += -row[gold] + lse;
    }
    let loss = total / scores.len() as f64;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFiniteScore)
    }
}

/// The candidate columns of a batch: every in-batch gold in batch order
/// (duplicates kept, mirroring the in-batch softmax sum), then the extra
/// negatives with any id already present dropped.
fn candidate_columns<'a>(
    batch: &[(&'a MentionRecord, &'a SkillEntry)],
    extra_negatives: &[&'a SkillEntry],
) -> Vec<&'a SkillEntry> {
    let mut columns: Vec<&SkillEntry> = batch.iter().map(|(_, gold)| *gold).collect();
    let mut seen: Vec<EntityId> = columns.iter().map(|e| e.id).collect();
    for &extra in extra_negatives {
        if !seen.contains(&extra.id) {
            seen.push(extra.id);
            columns.push(extra);
        }
    }
    columns
}

/// In-batch softmax loss of a batch of (mention, gold) pairs, with optional
/// extra negative entities appended to every mention's candidate set.
pub fn batch_loss(
    params: &EncoderParams,
    batch: &[(&MentionRecord, &SkillEntry)],
    extra_negatives: &[&SkillEntry],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("batch loss requires a non-empty batch"));
    }
    let columns = candidate_columns(batch, extra_negatives);
    let entity_vecs: Vec<Vec<f64>> = columns
        .iter()
        .map(|entry| encode_text(params, &render_entity_input(entry)))
        .collect();
    let mut scores = Vec::with_capacity(batch.len());
    let mut gold_cols = Vec::with_capacity(batch.len());
    for (i, (record, _)) in batch.iter().enumerate() {
        let mention_vec = encode_text(params, &render_mention_input(record)?);
        scores.push(
            entity_vecs
                .iter()
                .map(|e| score_pair(&mention_vec, e))
                .collect::<Vec<f64>>(),
        );
        gold_cols.push(i);
    }
    loss_from_scores(&scores, &gold_cols)
}

/// Gradient of [`batch_loss`] with respect to the embedding rows it
/// touches, keyed by row index. Rows not involved in the batch are absent.
///
/// The loss is differentiated through the dot product, the per-text L2
/// normalization (Jacobian `(I - v vᵀ)/|u|`), and the token mean.
pub fn batch_loss_with_gradient(
    params: &EncoderParams,
    batch: &[(&MentionRecord, &SkillEntry)],
    extra_negatives: &[&SkillEntry],
) -> Result<(f64, BTreeMap<usize, Vec<f64>>)> {
    if batch.is_empty() {
        return Err(Error::invalid("batch loss requires a non-empty batch"));
    }
    let columns = candidate_columns(batch, extra_negatives);

    // forward pass, keeping pre-normalization state per text
    let mention_texts: Vec<String> = batch
        .iter()
        .map(|(record, _)| render_mention_input(record))
        .collect::<Result<_>>()?;
    let entity_texts: Vec<String> = columns
        .iter()
        .map(|entry| render_entity_input(entry))
        .collect();
    let mentions: Vec<TextForward> = mention_texts
        .iter()
        .map(|t| TextForward::run(params, t))
        .collect();
    let entities: Vec<TextForward> = entity_texts
        .iter()
        .map(|t| TextForward::run(params, t))
        .collect();

    let batch_size = batch.len();
    let mut scores = Vec::with_capacity(batch_size);
    for mention in &mentions {
        scores.push(
            entities
                .iter()
                .map(|e| score_pair(&mention.normalized, &e.normalized))
                .collect::<Vec<f64>>(),
        );
    }
    let gold_cols: Vec<usize> = (0..batch_size).collect();
    let loss = loss_from_scores(&scores, &gold_cols)?;

    // d loss / d score[i][j] = (softmax(scores[i])[j] - [j == gold_i]) / B
    let mut dscores = Vec::with_capacity(batch_size);
    for (row, &gold) in scores.iter().zip(&gold_cols) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = row.iter().map(|s| (s - max).exp()).sum();
        let mut drow: Vec<f64> = row
            .iter()
            .map(|s| (s - max).exp() / denom / batch_size as f64)
            .collect();
        drow[gold] -= 1.0 / batch_size as f64;
        dscores.push(drow);
    }

    let mut gradients: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let dimension = params.dimension;
    for (i, mention) in mentions.iter().enumerate() {
        let mut dvec = vec![0.0; dimension];
        for (j, entity) in entities.iter().enumerate() {
            let w = dscores[i][j];
            for (d, e) in dvec.iter_mut().zip(&entity.normalized) {
                *d += w * e;
            }
        }
        mention.accumulate(params, &dvec, &mut gradients);
    }
    for (j, entity) in entities.iter().enumerate() {
        let mut dvec = vec![0.0; dimension];
        for (i, mention) in mentions.iter().enumerate() {
            let w = dscores[i][j];
            for (d, m) in dvec.iter_mut().zip(&mention.normalized) {
                *d += w * m;
            }
        }
        entity.accumulate(params, &dvec, &mut gradients);
    }
    Ok((loss, gradients))
}

/// Forward state of one encoded text, kept for backpropagation.
struct TextForward {
    rows: Vec<usize>,
    norm: f64,
    normalized: Vec<f64>,
}

impl TextForward {
    fn run(params: &EncoderParams, rendered: &str) -> TextForward {
        let rows: Vec<usize> = rendered
            .split_whitespace()
            .map(|token| params.row_of(token))
            .collect();
        let mut mean = vec![0.0; params.dimension];
        for &row in &rows {
            for (m, w) in mean.iter_mut().zip(params.row(row)) {
                *m += w;
            }
        }
        if !rows.is_empty() {
            for m in &mut mean {
                *m /= rows.len() as f64;
            }
        }
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        let normalized = l2_normalize(mean);
        TextForward {
            rows,
            norm,
            normalized,
        }
    }

    /// Push d loss / d normalized-vector back onto the embedding rows.
    fn accumulate(
        &self,
        params: &EncoderParams,
        dvec: &[f64],
        gradients: &mut BTreeMap<usize, Vec<f64>>,
    ) {
        if self.rows.is_empty() {
            return;
        }
        // through v = u / |u|: du = (dv - (dv . v) v) / |u|; identity at u = 0
        let dmean: Vec<f64> = if self.norm > 0.0 {
            let projection: f64 = dvec
                .iter()
                .zip(&self.normalized)
                .map(|(d, v)| d * v)
                .sum();
            dvec.iter()
                .zip(&self.normalized)
                .map(|(d, v)| (d - projection * v) / self.norm)
                .collect()
        } else {
            dvec.to_vec()
        };
        let scale = 1.0 / self.rows.len() as f64;
        for &row in &self.rows {
            let slot = gradients
                .entry(row)
                .or_insert_with(|| vec![0.0; params.dimension]);
            for (g, d) in slot.iter_mut().zip(&dmean) {
                *g += scale * d;
            }
        }
    }
}

/// All KB entities rendered and encoded once, for repeated ranking.
#[derive(Debug, Clone)]
pub struct EncodedKb {
    vectors: Vec<Vec<f64>>,
}

/// Encode every KB entry (including `UNK`) in id order.
pub fn encode_kb(params: &EncoderParams, kb: &KnowledgeBase) -> EncodedKb {
    EncodedKb {
        vectors: kb
            .entries()
            .iter()
            .map(|entry| encode_text(params, &render_entity_input(entry)))
            .collect(),
    }
}

/// Rank all encoded entities against one mention: top `k` by descending dot
/// product, ties by ascending entity id.
pub fn rank_encoded(
    params: &EncoderParams,
    encoded: &EncodedKb,
    record: &MentionRecord,
    k: usize,
) -> Result<Vec<ScoredCandidate>> {
    if k == 0 || k > encoded.vectors.len() {
        return Err(Error::invalid(format!(
            "k = {k} out of range for {} entities",
            encoded.vectors.len()
        )));
    }
    let mention_vec = encode_text(params, &render_mention_input(record)?);
    let scored: Vec<ScoredCandidate> = encoded
        .vectors
        .iter()
        .enumerate()
        .map(|(id, e)| ScoredCandidate {
            entity_id: id as EntityId,
            score: score_pair(&mention_vec, e),
        })
        .collect();
    Ok(top_k_candidates(scored, k))
}

/// Rank the whole KB for one mention. Prefer [`encode_kb`] +
/// [`rank_encoded`] when ranking many mentions against the same KB.
pub fn rank_entities(
    params: &EncoderParams,
    record: &MentionRecord,
    kb: &KnowledgeBase,
    k: usize,
) -> Result<Vec<ScoredCandidate>> {
    rank_encoded(params, &encode_kb(params, kb), record, k)
}

/// For every record, the `k` highest-ranked entities excluding its gold —
/// the hard negatives added to in-batch negatives during training.
pub fn mine_hard_negatives(
    params: &EncoderParams,
    records: &[MentionRecord],
    kb: &KnowledgeBase,
    k: usize,
) -> Result<Vec<Vec<EntityId>>> {
    if k == 0 {
        return Err(Error::invalid("hard-negative mining requires k >= 1"));
    }
    if k >= kb.len() {
        return Err(Error::invalid(format!(
            "cannot mine {k} non-gold negatives from a KB of {} entries",
            kb.len()
        )));
    }
    let encoded = encode_kb(params, kb);
    let mut mined = Vec::with_capacity(records.len());
    for record in records {
        let ranking = rank_encoded(params, &encoded, record, kb.len())?;
        let negatives: Vec<EntityId> = ranking
            .into_iter()
            .map(|c| c.entity_id)
            .filter(|&id| id != record.label_id)
            .take(k)
            .collect();
        mined.push(negatives);
    }
    Ok(mined)
}
