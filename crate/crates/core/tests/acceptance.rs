//! Acceptance gate for the whole toolkit: one test per release criterion,
//! each printing a single PASS line (a failure panics, so cargo reports the
//! criterion by name). The checks pin exact identities, independent oracles,
//! statistical bounds with fixed seeds, and wall-clock budgets.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skillink_core::alignment::{
    cosine_similarity, filter_ngrams, find_most_similar_ngram, generate_all_ngrams, levenshtein,
};
use skillink_core::baselines::random_rank;
use skillink_core::biencoder::{
    batch_loss, batch_loss_with_gradient, encode_kb, loss_from_scores, rank_encoded, train,
    OOV_TOKEN,
};
use skillink_core::corpus::{compute_stats, read_jsonl, write_jsonl};
use skillink_core::eval::{accuracy_at_k, aggregate_runs, mrr};
use skillink_core::generative::{
    build_trie, constrained_beam_search, fit_token_model, sequence_score, GenModelConfig,
    StepOption,
};
use skillink_core::{
    AlignConfig, CharTrigramEmbedder, Embedder, EncoderParams, EntityId, EvalReport,
    KnowledgeBase, MentionRecord, TokenModel, TrainConfig,
};

// ---------------------------------------------------------------------------
// shared builders

const WORD_POOL: [&str; 24] = [
    "operate", "manage", "forklift", "machinery", "accounts", "design", "print", "devices",
    "systems", "train", "horses", "software", "analyse", "budgets", "weld", "steel", "teach",
    "languages", "plan", "events", "repair", "engines", "audit", "records",
];

fn record(
    left: &str,
    mention: &str,
    right: &str,
    label_title: &str,
    label: &str,
    label_id: EntityId,
) -> MentionRecord {
    MentionRecord {
        context_left: left.to_string(),
        context_right: right.to_string(),
        mention: mention.to_string(),
        label_title: label_title.to_string(),
        label: label.to_string(),
        label_id,
    }
}

/// KB of up to `max_titles` distinct random multi-word titles plus the
/// appended sentinel.
fn random_kb(rng: &mut ChaCha8Rng, max_titles: usize) -> KnowledgeBase {
    let wanted = rng.gen_range(1..=max_titles);
    let mut seen = std::collections::HashSet::new();
    let mut rows = Vec::new();
    for _ in 0..wanted * 4 {
        if rows.len() == wanted {
            break;
        }
        let len = rng.gen_range(1..=4);
        let title = (0..len)
            .map(|_| *WORD_POOL.choose(rng).expect("pool is non-empty"))
            .collect::<Vec<_>>()
            .join(" ");
        if seen.insert(title.clone()) {
            rows.push((None, title, String::new()));
        }
    }
    KnowledgeBase::from_rows(rows).expect("generated titles are valid and distinct")
}

/// Messy mention input: pool words mixed with casing, punctuation, digits,
/// non-ASCII, and empty fragments.
fn fuzz_mention(rng: &mut ChaCha8Rng) -> String {
    const EXTRAS: [&str; 6] = ["Zebra!", "ÜBER", "42", "--", "", "devices?"];
    let n = rng.gen_range(0..=8);
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.25) {
                (*EXTRAS.choose(rng).expect("non-empty")).to_string()
            } else {
                (*WORD_POOL.choose(rng).expect("non-empty")).to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Deterministic pseudo-random next-token model: every option gets a
/// strictly positive weight keyed by (salt, input, prefix, option), so any
/// decoding property it satisfies is independent of fitted statistics.
struct HashModel {
    salt: u64,
}

impl TokenModel for HashModel {
    fn step_probabilities(
        &self,
        x_tokens: &[String],
        prefix: &[String],
        options: &[StepOption],
    ) -> Vec<f64> {
        options
            .iter()
            .map(|option| {
                let mut hasher = DefaultHasher::new();
                self.salt.hash(&mut hasher);
                x_tokens.hash(&mut hasher);
                prefix.hash(&mut hasher);
                option.hash(&mut hasher);
                0.05 + (hasher.finish() % 997) as f64 / 997.0
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// 1. random baseline

#[test]
fn random_baseline_matches_analytic_hit_rates() {
    let started = Instant::now();
    const POOL: usize = 455;
    const TRIALS: usize = 50_000;
    const K_GRID: [usize; 5] = [1, 4, 8, 16, 32];
    // documented baseline percentages for a 455-candidate pool
    const TABLE_ROW: [f64; 5] = [0.22, 0.88, 1.76, 3.52, 7.04];

    let pool: Vec<EntityId> = (0..POOL as EntityId).collect();
    let gold: EntityId = 123;

    for (k, table) in K_GRID.iter().zip(TABLE_ROW) {
        let analytic = 100.0 * *k as f64 / POOL as f64;
        assert!(
            (analytic - table).abs() < 0.011,
            "analytic Accuracy@{k} = {analytic:.4}% does not round to the documented {table}%"
        );
    }
    assert!((100.0 / POOL as f64 - 0.2198).abs() < 5e-5);

    let mut hits = [0usize; 5];
    for trial in 0..TRIALS {
        let ranking = random_rank(&pool, 32, 1_000 + trial as u64).expect("valid k and pool");
        for (slot, k) in K_GRID.iter().enumerate() {
            if ranking[..*k].iter().any(|c| c.entity_id == gold) {
                hits[slot] += 1;
            }
        }
    }
    for (slot, k) in K_GRID.iter().enumerate() {
        let p = *k as f64 / POOL as f64;
        let sigma = (p * (1.0 - p) / TRIALS as f64).sqrt();
        let empirical = hits[slot] as f64 / TRIALS as f64;
        assert!(
            (empirical - p).abs() <= 3.0 * sigma,
            "Accuracy@{k}: empirical {empirical:.6} vs expected {p:.6} exceeds 3 sigma = {:.6}",
            3.0 * sigma
        );
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    println!(
        "PASS random baseline: 50000 seeded trials within 3 sigma of k/455 for k in {K_GRID:?} ({elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// 2. loss identities

#[test]
fn in_batch_loss_identities_hold() {
    // a single pair with no extra negatives scores itself against only
    // itself, so the softmax is degenerate and the loss is exactly zero
    let kb = KnowledgeBase::from_rows(vec![
        (None, "operate forklift".into(), "move pallets".into()),
        (None, "manage accounts".into(), String::new()),
    ])
    .expect("valid rows");
    let single = record("we need", "forklift operation", "daily", "operate forklift", "", 0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params = random_params(&mut rng, 6);
    let gold = kb.entry(0).expect("entry 0 exists");
    let loss = batch_loss(&params, &[(&single, gold)], &[]).expect("well-formed batch");
    assert_eq!(loss, 0.0, "size-1 batch with no extras must have exactly zero loss");

    // non-negativity over random batches end to end
    for i in 0..1_000 {
        let mut rng = ChaCha8Rng::seed_from_u64(50_000 + i);
        let kb = random_kb(&mut rng, 6);
        let dimension = rng.gen_range(2..=6);
        let params = random_params(&mut rng, dimension);
        let batch_size = rng.gen_range(1..=4);
        let records: Vec<MentionRecord> = (0..batch_size)
            .map(|_| {
                let gold = rng.gen_range(0..kb.len()) as EntityId;
                let entry = kb.entry(gold).expect("id in range");
                record(
                    &fuzz_mention(&mut rng),
                    WORD_POOL.choose(&mut rng).expect("non-empty"),
                    &fuzz_mention(&mut rng),
                    &entry.title.clone(),
                    "",
                    gold,
                )
            })
            .collect();
        let batch: Vec<(&MentionRecord, &skillink_core::SkillEntry)> = records
            .iter()
            .map(|r| (r, kb.entry(r.label_id).expect("id in range")))
            .collect();
        let extras: Vec<&skillink_core::SkillEntry> = (0..rng.gen_range(0..=2))
            .map(|_| kb.entry(rng.gen_range(0..kb.len()) as EntityId).expect("in range"))
            .collect();
        let loss = batch_loss(&params, &batch, &extras).expect("well-formed batch");
        assert!(loss >= 0.0, "instance {i}: loss {loss} is negative");
        assert!(loss.is_finite());
    }

    // hand-checkable two-pair case: symmetric scores with a +2 gold margin
    let loss = loss_from_scores(&[vec![2.0, 0.0], vec![0.0, 2.0]], &[0, 1])
        .expect("square score matrix");
    let expected = (1.0 + (-2.0f64).exp()).ln();
    assert!(
        (loss - expected).abs() <= 1e-9,
        "two-pair loss {loss} differs from ln(1 + e^-2) = {expected}"
    );

    println!("PASS loss identities: size-1 batch exactly 0, 1000 random batches >= 0, ln(1+e^-2) case to 1e-9");
}

/// Random encoder over a small fixed vocabulary (markers, pool words, OOV).
fn random_params(rng: &mut ChaCha8Rng, dimension: usize) -> EncoderParams {
    let (tokens, matrix) = random_param_parts(rng, dimension);
    EncoderParams::from_parts(tokens, matrix, dimension).expect("valid parts")
}

fn random_param_parts(rng: &mut ChaCha8Rng, dimension: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut tokens: Vec<String> = vec![
        "[cls]".into(),
        "[s]".into(),
        "[e]".into(),
        "[sep]".into(),
        OOV_TOKEN.into(),
    ];
    tokens.extend(WORD_POOL.iter().map(|w| w.to_string()));
    let matrix = (0..tokens.len())
        .map(|_| (0..dimension).map(|_| rng.gen_range(-0.8..0.8)).collect())
        .collect();
    (tokens, matrix)
}

// ---------------------------------------------------------------------------
// 3. gradient correctness

#[test]
fn analytic_gradients_match_central_differences() {
    let started = Instant::now();
    let mut coords_checked = 0usize;
    for i in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(7_000 + i);
        let dimension = rng.gen_range(2..=8);
        let (tokens, matrix) = random_param_parts(&mut rng, dimension);
        let kb = random_kb(&mut rng, 6);
        let batch_size = rng.gen_range(1..=4);
        let records: Vec<MentionRecord> = (0..batch_size)
            .map(|_| {
                let gold = rng.gen_range(0..kb.len()) as EntityId;
                record(
                    &fuzz_mention(&mut rng),
                    WORD_POOL.choose(&mut rng).expect("non-empty"),
                    &fuzz_mention(&mut rng),
                    &kb.entry(gold).expect("in range").title.clone(),
                    "",
                    gold,
                )
            })
            .collect();
        let batch: Vec<(&MentionRecord, &skillink_core::SkillEntry)> = records
            .iter()
            .map(|r| (r, kb.entry(r.label_id).expect("in range")))
            .collect();
        let extra_ids: Vec<EntityId> = (0..rng.gen_range(0..=2))
            .map(|_| rng.gen_range(0..kb.len()) as EntityId)
            .collect();
        let extras: Vec<&skillink_core::SkillEntry> = extra_ids
            .iter()
            .map(|&id| kb.entry(id).expect("in range"))
            .collect();

        let params =
            EncoderParams::from_parts(tokens.clone(), matrix.clone(), dimension).expect("valid");
        let (_, gradient) =
            batch_loss_with_gradient(&params, &batch, &extras).expect("well-formed batch");

        let step = 1e-5;
        for (&row, row_grad) in &gradient {
            for (col, &analytic) in row_grad.iter().enumerate() {
                let mut plus = matrix.clone();
                plus[row][col] += step;
                let mut minus = matrix.clone();
                minus[row][col] -= step;
                let loss_plus = batch_loss(
                    &EncoderParams::from_parts(tokens.clone(), plus, dimension).expect("valid"),
                    &batch,
                    &extras,
                )
                .expect("well-formed batch");
                let loss_minus = batch_loss(
                    &EncoderParams::from_parts(tokens.clone(), minus, dimension).expect("valid"),
                    &batch,
                    &extras,
                )
                .expect("well-formed batch");
                let numeric = (loss_plus - loss_minus) / (2.0 * step);
                let tolerance = 1e-4 * analytic.abs().max(numeric.abs()).max(1e-4);
                assert!(
                    (analytic - numeric).abs() <= tolerance,
                    "instance {i} row {row} col {col}: analytic {analytic} vs central difference {numeric}"
                );
                coords_checked += 1;
            }
        }
    }
    assert!(coords_checked > 1_000, "only {coords_checked} coordinates exercised");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30 s");
    println!(
        "PASS gradients: {coords_checked} coordinates within 1e-4 of central differences over 100 instances ({elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// 4. constrained decoding validity

#[test]
fn constrained_decoding_only_emits_kb_entities() {
    let mut decodes = 0usize;
    let mut candidates_seen = 0usize;
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(11_000 + i);
        let kb = random_kb(&mut rng, 200);
        let trie = build_trie(&kb);
        let hash_model;
        let bigram_model;
        let model: &dyn TokenModel = if i % 5 == 0 {
            // every fifth KB uses a fitted model instead of raw fuzz weights
            let records: Vec<MentionRecord> = (0..10)
                .map(|_| {
                    let gold = rng.gen_range(0..kb.len()) as EntityId;
                    let title = kb.entry(gold).expect("in range").title.clone();
                    record("seen in", &title.clone(), "postings", &title, "", gold)
                })
                .collect();
            bigram_model =
                fit_token_model(&records, &kb, GenModelConfig::default()).expect("valid config");
            &bigram_model
        } else {
            hash_model = HashModel { salt: i };
            &hash_model
        };

        for j in 0..100u64 {
            let mention = fuzz_mention(&mut rng);
            let beam_width = 1 + (j as usize % 7);
            let k = beam_width.min(trie.path_count());
            let result =
                constrained_beam_search(model, &trie, &mention, beam_width, k).expect("decodable");
            assert!(!result.is_empty(), "KB {i} mention {j}: no candidate emitted");
            for candidate in &result {
                assert!(
                    kb.entry(candidate.entity_id).is_some(),
                    "KB {i} mention {j}: emitted unknown entity {}",
                    candidate.entity_id
                );
                assert!(candidate.score.is_finite());
                assert!(
                    candidate.score <= 1e-12,
                    "log-probability {} is positive",
                    candidate.score
                );
                candidates_seen += 1;
            }
            decodes += 1;
        }
    }
    assert_eq!(decodes, 10_000);
    println!(
        "PASS decoding validity: 10000 fuzzed decodes, all {candidates_seen} candidates are KB entities"
    );
}

// ---------------------------------------------------------------------------
// 5. beam equals exhaustive scoring at full width

#[test]
fn full_width_beam_matches_exhaustive_scoring() {
    for i in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(22_000 + i);
        let kb = random_kb(&mut rng, 50);
        let trie = build_trie(&kb);
        let model = HashModel { salt: 9_000 + i };
        let mention = fuzz_mention(&mut rng);
        let width = trie.path_count();

        let beam = constrained_beam_search(&model, &trie, &mention, width, width)
            .expect("full-width decode");

        let mut exhaustive: Vec<(EntityId, f64)> = trie
            .paths()
            .into_iter()
            .map(|(tokens, id)| {
                let score = sequence_score(&model, &trie, &mention, &tokens)
                    .expect("path comes from the trie");
                (id, score)
            })
            .collect();
        exhaustive.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("scores are finite")
                .then(a.0.cmp(&b.0))
        });

        assert_eq!(beam.len(), exhaustive.len(), "KB {i}: candidate counts differ");
        for (rank, (candidate, (id, score))) in beam.iter().zip(&exhaustive).enumerate() {
            assert_eq!(candidate.entity_id, *id, "KB {i} rank {rank}: ids diverge");
            assert_eq!(
                candidate.score.to_bits(),
                score.to_bits(),
                "KB {i} rank {rank}: scores diverge ({} vs {score})",
                candidate.score
            );
        }
    }
    println!("PASS beam oracle: full-width beam equals exhaustive path scoring on 200 random KBs");
}

// ---------------------------------------------------------------------------
// 6. renormalized path probabilities form a distribution

#[test]
fn constrained_path_probabilities_sum_to_one() {
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(33_000 + i);
        let kb = random_kb(&mut rng, 30);
        let trie = build_trie(&kb);
        let hash_model;
        let bigram_model;
        let model: &dyn TokenModel = if i % 2 == 0 {
            hash_model = HashModel { salt: i };
            &hash_model
        } else {
            let records: Vec<MentionRecord> = (0..rng.gen_range(1..=40))
                .map(|_| {
                    let gold = rng.gen_range(0..kb.len()) as EntityId;
                    let title = kb.entry(gold).expect("in range").title.clone();
                    record("", &fuzz_mention(&mut rng), "", &title, "", gold)
                })
                .filter(|r| !r.mention.trim().is_empty())
                .collect();
            if records.is_empty() {
                hash_model = HashModel { salt: i };
                &hash_model
            } else {
                bigram_model = fit_token_model(&records, &kb, GenModelConfig::default())
                    .expect("valid config");
                &bigram_model
            }
        };

        let mention = fuzz_mention(&mut rng);
        let total: f64 = trie
            .paths()
            .into_iter()
            .map(|(tokens, _)| {
                sequence_score(model, &trie, &mention, &tokens)
                    .expect("path comes from the trie")
                    .exp()
            })
            .sum();
        assert!(
            (total - 1.0).abs() <= 1e-9,
            "pair {i}: path probabilities sum to {total}, not 1"
        );
    }
    println!("PASS chain rule: exp(sequence scores) sum to 1 +/- 1e-9 on 100 model/mention pairs");
}

// ---------------------------------------------------------------------------
// 7. alignment and edit-distance oracles

#[test]
fn span_alignment_and_edit_distance_match_reference_oracles() {
    const SMALL_POOL: [&str; 12] = [
        "print", "printing", "devices", "device", "hand", "operated", "training", "horses",
        "young", "various", "of", "types",
    ];
    let embedder = CharTrigramEmbedder::default();
    let config = AlignConfig::default();
    let mut retained_cases = 0usize;
    for i in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(44_000 + i);
        let sentence = (0..rng.gen_range(1..=8))
            .map(|_| *SMALL_POOL.choose(&mut rng).expect("non-empty"))
            .collect::<Vec<_>>()
            .join(" ");
        let target = (0..rng.gen_range(1..=3))
            .map(|_| *SMALL_POOL.choose(&mut rng).expect("non-empty"))
            .collect::<Vec<_>>()
            .join(" ");

        // unfiltered brute force: first strict maximum in enumeration order
        // is the earliest-start, shortest span among the tied best
        let ngrams = generate_all_ngrams(&sentence);
        let target_vec = embedder.embed(&target);
        let (mut best_text, mut best_sim) = (ngrams[0].as_str(), f64::NEG_INFINITY);
        for gram in &ngrams {
            let sim = cosine_similarity(&target_vec, &embedder.embed(gram));
            if sim > best_sim {
                best_text = gram.as_str();
                best_sim = sim;
            }
        }

        let kept = filter_ngrams(&ngrams, &target, config.keep_fraction);
        if !kept.iter().any(|g| g.as_str() == best_text) {
            continue; // the pre-filter dropped the global argmax; no agreement promised
        }
        retained_cases += 1;

        let result = find_most_similar_ngram(&sentence, &target, &config, &embedder);
        assert_eq!(
            result.similarity, best_sim,
            "case {i}: similarity differs from brute force"
        );
        if best_sim > config.threshold {
            assert_eq!(result.span.as_deref(), Some(best_text), "case {i}: span differs");
            assert!(!result.is_unk);
        } else {
            assert!(result.is_unk, "case {i}: sub-threshold best must be unlinkable");
            assert!(result.span.is_none());
        }
    }
    assert!(retained_cases > 250, "only {retained_cases} of 500 cases kept the argmax");

    // independent full-matrix edit-distance reference
    fn reference_levenshtein(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in dp.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            dp[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let substitution = usize::from(a[i - 1] != b[j - 1]);
                dp[i][j] = (dp[i - 1][j] + 1)
                    .min(dp[i][j - 1] + 1)
                    .min(dp[i - 1][j - 1] + substitution);
            }
        }
        dp[a.len()][b.len()]
    }

    const ALPHABET: [char; 9] = ['a', 'b', 'c', 'd', 'e', 'é', 'ß', '次', ' '];
    let mut rng = ChaCha8Rng::seed_from_u64(55_000);
    for _ in 0..1_000 {
        let a: String = (0..rng.gen_range(0..=12))
            .map(|_| *ALPHABET.choose(&mut rng).expect("non-empty"))
            .collect();
        let b: String = (0..rng.gen_range(0..=12))
            .map(|_| *ALPHABET.choose(&mut rng).expect("non-empty"))
            .collect();
        assert_eq!(
            levenshtein(&a, &b),
            reference_levenshtein(&a, &b),
            "edit distance mismatch for {a:?} vs {b:?}"
        );
    }
    assert_eq!(levenshtein("kitten", "sitting"), 3);

    println!(
        "PASS alignment oracle: {retained_cases} retained argmax cases agree, 1000 edit distances match the reference"
    );
}

// ---------------------------------------------------------------------------
// 8. desk-scale learning

#[test]
fn biencoder_learns_a_noised_title_corpus() {
    let started = Instant::now();
    const SHARED: [&str; 10] = [
        "data", "systems", "analysis", "management", "design", "operations", "support",
        "planning", "quality", "reporting",
    ];
    const FILLERS: [&str; 4] = ["skills", "experience", "tasks", "tools"];
    const LEFTS: [&str; 4] = ["we require", "proven track record in", "the role involves", ""];
    const RIGHTS: [&str; 4] = ["for this position", "at scale", "in production", ""];

    let mut rng = ChaCha8Rng::seed_from_u64(88_000);
    let mut rows = Vec::new();
    for i in 0..50 {
        let a = *SHARED.choose(&mut rng).expect("non-empty");
        let mut b = *SHARED.choose(&mut rng).expect("non-empty");
        while b == a {
            b = *SHARED.choose(&mut rng).expect("non-empty");
        }
        rows.push((None, format!("craft{i:02} {a} {b}"), String::new()));
    }
    let kb = KnowledgeBase::from_rows(rows).expect("distinct titles");

    // noised mention: the distinguishing first title token always survives,
    // the shared tail is replaced, dropped, reordered, or padded
    let noised = |entity: EntityId, rng: &mut ChaCha8Rng| -> MentionRecord {
        let entry = kb.entry(entity).expect("in range");
        let tokens: Vec<&str> = entry.title.split_whitespace().collect();
        let mut mention = vec![tokens[0].to_string(), tokens[1].to_string()];
        match rng.gen_range(0..3) {
            0 => mention[1] = (*SHARED.choose(rng).expect("non-empty")).to_string(),
            1 => {
                mention.truncate(1);
            }
            _ => mention.push(tokens[2].to_string()),
        }
        if rng.gen_bool(0.4) {
            mention.push((*FILLERS.choose(rng).expect("non-empty")).to_string());
        }
        if rng.gen_bool(0.3) && mention.len() > 1 {
            mention.swap(0, 1);
        }
        record(
            LEFTS.choose(rng).expect("non-empty"),
            &mention.join(" "),
            RIGHTS.choose(rng).expect("non-empty"),
            &entry.title.clone(),
            "",
            entity,
        )
    };

    let mut train_set = Vec::new();
    let mut dev_set = Vec::new();
    let mut heldout = Vec::new();
    for entity in 0..50 as EntityId {
        for _ in 0..5 {
            train_set.push(noised(entity, &mut rng));
        }
        dev_set.push(noised(entity, &mut rng));
        for _ in 0..2 {
            heldout.push(noised(entity, &mut rng));
        }
    }

    let config = TrainConfig {
        epochs: 10,
        batch_size: 32,
        lr: 0.5,
        warmup_fraction: 0.05,
        dimension: 64,
        ..TrainConfig::default()
    };
    let outcome = train(&train_set, Some(&dev_set), &kb, &config).expect("training succeeds");

    let encoded = encode_kb(&outcome.params, &kb);
    let accuracy = |records: &[MentionRecord]| -> f64 {
        let predictions: Vec<Vec<EntityId>> = records
            .iter()
            .map(|r| {
                rank_encoded(&outcome.params, &encoded, r, 1)
                    .expect("k = 1 is valid")
                    .into_iter()
                    .map(|c| c.entity_id)
                    .collect()
            })
            .collect();
        let gold: Vec<EntityId> = records.iter().map(|r| r.label_id).collect();
        accuracy_at_k(&predictions, &gold, 1).expect("aligned inputs")
    };

    let train_acc = accuracy(&train_set);
    let heldout_acc = accuracy(&heldout);
    assert!(
        train_acc >= 95.0,
        "training Accuracy@1 = {train_acc:.2}% is below the 95% bar"
    );
    assert!(
        heldout_acc >= 60.0,
        "held-out Accuracy@1 = {heldout_acc:.2}% is below the 60% bar"
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 60 s");
    println!(
        "PASS learning: train Accuracy@1 {train_acc:.2}%, held-out {heldout_acc:.2}% in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 9. metric suite

#[test]
fn ranking_metrics_satisfy_order_and_hand_values() {
    const POOL: usize = 40;
    const K_GRID: [usize; 7] = [1, 2, 4, 8, 16, 32, 40];
    for fixture in 0..1_000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(66_000 + fixture);
        let mut predictions = Vec::new();
        let mut gold = Vec::new();
        for _ in 0..15 {
            let mut ranking: Vec<EntityId> = (0..POOL as EntityId).collect();
            ranking.shuffle(&mut rng);
            let g = rng.gen_range(0..POOL) as EntityId;
            if rng.gen_bool(0.3) {
                // drop the gold entirely; its reciprocal rank contributes zero
                ranking.retain(|&id| id != g);
                ranking.push(POOL as EntityId);
            }
            predictions.push(ranking);
            gold.push(g);
        }
        let accs: Vec<f64> = K_GRID
            .iter()
            .map(|&k| accuracy_at_k(&predictions, &gold, k).expect("rankings are deep enough"))
            .collect();
        for pair in accs.windows(2) {
            assert!(pair[0] <= pair[1], "fixture {fixture}: Accuracy@k not monotone: {accs:?}");
        }
        let mrr_value = mrr(&predictions, &gold);
        assert!(
            accs[0] <= mrr_value + 1e-9 && mrr_value <= accs[K_GRID.len() - 1] + 1e-9,
            "fixture {fixture}: Acc@1 {} <= MRR {mrr_value} <= Acc@full {} violated",
            accs[0],
            accs[K_GRID.len() - 1]
        );
    }

    // hand fixture: golds at ranks 1, 2, 5, 9 of a 9-deep ranking
    let ranked: Vec<Vec<EntityId>> = vec![
        (0..9).collect(),
        vec![9, 1, 2, 3, 4, 5, 6, 7, 8],
        vec![9, 10, 11, 12, 2, 0, 1, 3, 4],
        vec![9, 10, 11, 12, 13, 14, 15, 16, 3],
    ];
    let gold: Vec<EntityId> = vec![0, 1, 2, 3];
    for (k, expected) in [(1usize, 25.0), (2, 50.0), (5, 75.0), (9, 100.0)] {
        let acc = accuracy_at_k(&ranked, &gold, k).expect("deep enough");
        assert_eq!(acc, expected, "Accuracy@{k}");
    }
    let hand_mrr = mrr(
        &[(0..4).collect(), vec![4, 1, 2, 3], vec![4, 5, 6, 2]],
        &[0, 1, 2],
    );
    assert!(
        (hand_mrr - 175.0 / 3.0).abs() <= 1e-12,
        "MRR over ranks 1,2,4 is {hand_mrr}, expected 175/3"
    );

    // five-run aggregation against hand arithmetic
    let reports: Vec<EvalReport> = [(10.0, 11.0), (20.0, 13.0), (30.0, 17.0), (40.0, 19.0), (50.0, 25.0)]
        .iter()
        .map(|&(acc1, mrr_value)| {
            let mut accuracy_at = BTreeMap::new();
            accuracy_at.insert(1usize, acc1);
            accuracy_at.insert(4usize, 50.0);
            EvalReport {
                subset: None,
                n: 100,
                accuracy_at,
                mrr: Some(mrr_value),
            }
        })
        .collect();
    let aggregate = aggregate_runs(&reports).expect("uniform grid");
    let close = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() <= 1e-12 && (a.1 - b.1).abs() <= 1e-12;
    assert!(close(aggregate["acc@1"], (30.0, 200.0f64.sqrt())), "acc@1 {:?}", aggregate["acc@1"]);
    assert!(close(aggregate["acc@4"], (50.0, 0.0)), "acc@4 {:?}", aggregate["acc@4"]);
    assert!(close(aggregate["mrr"], (17.0, 24.0f64.sqrt())), "mrr {:?}", aggregate["mrr"]);

    println!("PASS metrics: monotonicity and Acc@1 <= MRR <= Acc@full on 1000 fixtures, hand values exact");
}

// ---------------------------------------------------------------------------
// 10. record format fidelity at KB scale

#[test]
fn record_format_and_stats_round_trip() {
    // full-scale synthetic KB with the two documented rows at their real ids
    let young_desc = "Principles & techniques of educating young horses important simple body control exercises.";
    let print_desc = "Process of creating various types hand-operated printing devices, such as stamps, seals, embossing labels or inked pads and their applications.";
    let rows: Vec<(Option<String>, String, String)> = (0..13_890)
        .map(|i| match i {
            2_198 => (None, "young horses training".to_string(), young_desc.to_string()),
            10_972 => (
                None,
                "types of hand-operated printing devices".to_string(),
                print_desc.to_string(),
            ),
            _ => (None, format!("skill concept {i:05}"), String::new()),
        })
        .collect();
    let kb = KnowledgeBase::from_rows(rows).expect("valid synthetic KB");
    assert_eq!(kb.len(), 13_891, "13890 skills plus the appended sentinel");
    assert_eq!(kb.unk_id(), 13_890);
    assert_eq!(build_trie(&kb).path_count(), 13_891, "one trie path per entity");

    let originals = vec![
        record(
            "we're looking for someone who is passionate about",
            "young horse training",
            "and eager to share their knowledge with others.",
            "young horses training",
            young_desc,
            2_198,
        ),
        record(
            "Hands-on experience with",
            "various hand-operated printing devices",
            "is a must-have qualification for this job.",
            "types of hand-operated printing devices",
            print_desc,
            10_972,
        ),
    ];

    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("records.jsonl");
    write_jsonl(&path, &originals).expect("writable");
    let restored = read_jsonl(&path, &kb).expect("records validate against the KB");
    assert_eq!(restored, originals, "all six fields must survive the round trip");

    // hand-countable split statistics
    let fixture = vec![
        originals[0].clone(),
        originals[0].clone(),
        originals[1].clone(),
        record("", "interpret blueprints", "", "skill concept 00003", "", 3),
        record("", "drove a van", "", "skill concept 00003", "", 3),
        record("no", "matching span here", "at all", "UNK", "", kb.unk_id()),
        record("another", "unlinkable phrase", "entirely", "UNK", "", kb.unk_id()),
    ];
    let stats = compute_stats(&fixture, &kb);
    assert_eq!(stats.instances, 7);
    assert_eq!(stats.unique_titles, 4);
    assert_eq!(stats.unk_count, 2);

    println!("PASS format fidelity: both documented records round-trip, stats count 7/4/2, 13891 trie paths");
}
