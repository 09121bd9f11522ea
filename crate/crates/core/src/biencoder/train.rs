//! Seeded SGD training of the encoder: in-batch softmax loss over shuffled
//! mini-batches, hard negatives mined once up front, linear warmup, and
//! best-epoch selection by dev Accuracy@1.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use serde::{Deserialize, Serialize};

use super::{
    batch_loss_with_gradient, encode_kb, mine_hard_negatives, rank_encoded, EncoderParams,
    OOV_TOKEN,
};
use crate::corpus::{render_entity_input, render_mention_input, MentionRecord};
use crate::error::{Error, Result};
use crate::eval::accuracy_at_k;
use crate::taxonomy::{KnowledgeBase, SkillEntry};
use crate::types::EntityId;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Constant learning rate reached after warmup.
    pub lr: f64,
    /// Fraction of total steps spent ramping the learning rate linearly
    /// from lr/warmup_steps up to lr.
    pub warmup_fraction: f64,
    /// Seeds everything: parameter init and the per-epoch shuffles.
    pub seed: u64,
    /// Embedding dimension.
    pub dimension: usize,
    /// Hard negatives mined per record before training; 0 disables mining.
    pub hard_negatives: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 32,
            lr: 2e-3,
            warmup_fraction: 0.05,
            seed: 276_800,
            dimension: 256,
            hard_negatives: 10,
        }
    }
}

/// Loss and dev-accuracy trajectory of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean batch loss under the initial parameters, before any update.
    pub initial_loss: f64,
    /// Mean batch loss observed during each epoch.
    pub epoch_losses: Vec<f64>,
    /// Dev Accuracy@1 after each epoch (empty when no dev split given).
    pub dev_accuracy_at_1: Vec<f64>,
    /// Epoch whose parameters were returned (earliest best dev Accuracy@1,
    /// or the final epoch when no dev split was given).
    pub best_epoch: usize,
}

/// Trained parameters plus the trajectory that produced them.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    pub history: TrainHistory,
}

fn validate(config: &TrainConfig) -> Result<()> {
    if config.epochs == 0 {
        return Err(Error::invalid("epochs must be >= 1"));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch_size must be >= 1"));
    }
    if !(config.lr > 0.0) {
        return Err(Error::invalid("lr must be positive"));
    }
    if !(0.0..=1.0).contains(&config.warmup_fraction) {
        return Err(Error::invalid("warmup_fraction must lie in [0, 1]"));
    }
    if config.dimension == 0 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    Ok(())
}

/// Vocabulary = lowercased tokens of every rendered training mention and
/// every rendered KB entity, plus the reserved OOV token, sorted.
fn build_vocab(rendered_mentions: &[String], kb: &KnowledgeBase) -> Vec<String> {
    let mut tokens: BTreeSet<String> = BTreeSet::new();
    tokens.insert(OOV_TOKEN.to_string());
    for text in rendered_mentions {
        tokens.extend(text.split_whitespace().map(|t| t.to_lowercase()));
    }
    for entry in kb.entries() {
        let rendered = render_entity_input(entry);
        tokens.extend(rendered.split_whitespace().map(|t| t.to_lowercase()));
    }
    tokens.into_iter().collect()
}

fn init_params(vocab: Vec<String>, dimension: usize, rng: &mut ChaCha8Rng) -> EncoderParams {
    let bound = 1.0 / (dimension as f64).sqrt();
    let matrix: Vec<Vec<f64>> = (0..vocab.len())
        .map(|_| (0..dimension).map(|_| rng.gen_range(-bound..bound)).collect())
        .collect();
    EncoderParams::from_parts(vocab, matrix, dimension).expect("constructed vocabulary is valid")
}

/// Accuracy@1 (percentage) of the current params on a mention split.
fn dev_accuracy(params: &EncoderParams, records: &[MentionRecord], kb: &KnowledgeBase) -> Result<f64> {
    let encoded = encode_kb(params, kb);
    let mut predictions = Vec::with_capacity(records.len());
    let mut gold = Vec::with_capacity(records.len());
    for record in records {
        let top = rank_encoded(params, &encoded, record, 1)?;
        predictions.push(vec![top[0].entity_id]);
        gold.push(record.label_id);
    }
    accuracy_at_k(&predictions, &gold, 1)
}

/// Mean batch loss over unshuffled batches, without touching the params.
fn full_pass_loss(
    params: &EncoderParams,
    records: &[MentionRecord],
    golds: &[&SkillEntry],
    mined: &[Vec<EntityId>],
    kb: &KnowledgeBase,
    batch_size: usize,
) -> Result<f64> {
    let order: Vec<usize> = (0..records.len()).collect();
    let mut total = 0.0;
    let mut batches = 0usize;
    for chunk in order.chunks(batch_size) {
        let (batch, extras) = assemble_batch(chunk, records, golds, mined, kb);
        total += super::batch_loss(params, &batch, &extras)?;
        batches += 1;
    }
    Ok(total / batches as f64)
}

/// Materialize one batch: (record, gold) pairs plus the union of the mined
/// hard negatives of its records, in mining order.
fn assemble_batch<'a>(
    chunk: &[usize],
    records: &'a [MentionRecord],
    golds: &[&'a SkillEntry],
    mined: &[Vec<EntityId>],
    kb: &'a KnowledgeBase,
) -> (Vec<(&'a MentionRecord, &'a SkillEntry)>, Vec<&'a SkillEntry>) {
    let batch: Vec<(&MentionRecord, &SkillEntry)> =
        chunk.iter().map(|&i| (&records[i], golds[i])).collect();
    let mut extras: Vec<&SkillEntry> = Vec::new();
    for &i in chunk {
        if let Some(negatives) = mined.get(i) {
            for &id in negatives {
                extras.push(kb.entry(id).expect("mined ids come from the KB"));
            }
        }
    }
    (batch, extras)
}

/// Train the encoder on mention records against the KB.
///
/// Hard negatives are mined once with the freshly initialized parameters;
/// the learning rate warms up linearly over the first `warmup_fraction` of
/// steps, then stays constant; records are reshuffled every epoch from the
/// run seed. With a dev split, the returned parameters are those of the
/// epoch with the best dev Accuracy@1 (earliest on ties); without one, the
/// final epoch's. Identical configs produce bitwise-identical parameters.
pub fn train(
    records: &[MentionRecord],
    dev: Option<&[MentionRecord]>,
    kb: &KnowledgeBase,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if records.is_empty() {
        return Err(Error::invalid("training requires at least one record"));
    }
    validate(config)?;

    // fail fast on unrenderable records and unknown labels
    let rendered: Vec<String> = records.iter().map(render_mention_input).collect::<Result<_>>()?;
    let golds: Vec<&SkillEntry> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            kb.entry(r.label_id).ok_or(Error::UnknownLabelId {
                line: i + 1,
                id: r.label_id,
            })
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_params(build_vocab(&rendered, kb), config.dimension, &mut rng);

    let mined: Vec<Vec<EntityId>> = if config.hard_negatives > 0 {
        mine_hard_negatives(&params, records, kb, config.hard_negatives)?
    } else {
        vec![Vec::new(); records.len()]
    };

    let batches_per_epoch = records.len().div_ceil(config.batch_size);
    let total_steps = config.epochs * batches_per_epoch;
    let warmup_steps = (config.warmup_fraction * total_steps as f64).ceil() as usize;

    let initial_loss = full_pass_loss(&params, records, &golds, &mined, kb, config.batch_size)?;

    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut dev_accuracy_at_1 = Vec::new();
    let mut best: Option<(f64, usize, EncoderParams)> = None;
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (batch, extras) = assemble_batch(chunk, records, &golds, &mined, kb);
            let (loss, gradients) = match batch_loss_with_gradient(&params, &batch, &extras) {
                Ok(result) => result,
                Err(Error::NonFiniteScore) => return Err(Error::NonFiniteLoss { step }),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            let lr = if step < warmup_steps {
                config.lr * (step + 1) as f64 / warmup_steps as f64
            } else {
                config.lr
            };
            for (row, gradient) in &gradients {
                let weights = params.row_mut(*row);
                for (w, g) in weights.iter_mut().zip(gradient) {
                    *w -= lr * g;
                }
            }
            epoch_total += loss;
            step += 1;
        }
        epoch_losses.push(epoch_total / batches_per_epoch as f64);

        if let Some(dev_records) = dev {
            let accuracy = dev_accuracy(&params, dev_records, kb)?;
            dev_accuracy_at_1.push(accuracy);
            let is_better = match &best {
                None => true,
                Some((best_accuracy, _, _)) => accuracy > *best_accuracy,
            };
            if is_better {
                best = Some((accuracy, epoch, params.clone()));
            }
        }
    }

    let (best_epoch, final_params) = match best {
        Some((_, epoch, snapshot)) => (epoch, snapshot),
        None => (config.epochs - 1, params),
    };
    Ok(TrainOutcome {
        params: final_params,
        history: TrainHistory {
            initial_loss,
            epoch_losses,
            dev_accuracy_at_1,
            best_epoch,
        },
    })
}
