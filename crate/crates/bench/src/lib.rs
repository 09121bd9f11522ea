//! Synthetic fixtures at production taxonomy scale (13,891 entities) shared
//! by the criterion benchmarks. Everything is seeded, so timings are
//! comparable across runs.

use std::io::Cursor;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skillink_core::biencoder::OOV_TOKEN;
use skillink_core::{EncoderParams, KbFormat, KnowledgeBase, MentionRecord};

/// Number of real entities in the full-scale taxonomy (the sentinel makes
/// the knowledge base one larger).
pub const FULL_SCALE_ENTITIES: usize = 13_890;

const VERBS: [&str; 30] = [
    "operate", "manage", "design", "repair", "train", "teach", "audit", "weld", "analyse",
    "supervise", "plan", "install", "inspect", "calibrate", "assemble", "negotiate", "translate",
    "prepare", "maintain", "coordinate", "monitor", "evaluate", "schedule", "organise", "process",
    "develop", "document", "test", "configure", "present",
];

const ADJECTIVES: [&str; 30] = [
    "industrial", "financial", "digital", "hydraulic", "electrical", "agricultural", "medical",
    "chemical", "mechanical", "commercial", "residential", "marine", "aerial", "thermal",
    "optical", "acoustic", "structural", "logistic", "clinical", "forensic", "textile", "ceramic",
    "robotic", "pneumatic", "solar", "nuclear", "organic", "synthetic", "modular", "portable",
];

const NOUNS: [&str; 20] = [
    "systems", "records", "engines", "layouts", "networks", "pipelines", "budgets", "contracts",
    "turbines", "presses", "scanners", "harvesters", "furnaces", "datasets", "inventories",
    "blueprints", "vehicles", "instruments", "warehouses", "archives",
];

/// Deterministic knowledge base with `FULL_SCALE_ENTITIES` distinct titles
/// plus the trailing `UNK` sentinel.
pub fn full_scale_kb() -> KnowledgeBase {
    let mut tsv = String::new();
    let mut produced = 0usize;
    'outer: for verb in VERBS {
        for adjective in ADJECTIVES {
            for noun in NOUNS {
                if produced == FULL_SCALE_ENTITIES {
                    break 'outer;
                }
                tsv.push_str(&format!(
                    "S{produced}\t{verb} {adjective} {noun}\thow to {verb} {adjective} {noun}\n"
                ));
                produced += 1;
            }
        }
    }
    assert_eq!(produced, FULL_SCALE_ENTITIES, "word pools must cover the target size");
    tsv.push_str("UNK\n");
    KnowledgeBase::read(Cursor::new(tsv), KbFormat::Tsv).expect("synthetic KB is well-formed")
}

/// Mention records spread evenly over the KB: the mention quotes the gold
/// title inside a fixed sentence frame.
pub fn sample_mentions(kb: &KnowledgeBase, count: usize) -> Vec<MentionRecord> {
    let entries = kb.entries();
    let real = entries.len() - 1;
    (0..count)
        .map(|i| {
            let entry = &entries[(i * real) / count];
            MentionRecord {
                context_left: "the role requires you to".to_string(),
                context_right: "for several clients each week".to_string(),
                mention: entry.title.clone(),
                label_title: entry.title.clone(),
                label: entry.description.clone(),
                label_id: (i * real / count) as u32,
            }
        })
        .collect()
}

/// Seeded encoder over the KB's full token universe, as a freshly
/// initialized (untrained) model of the given dimension.
pub fn encoder_params(kb: &KnowledgeBase, dimension: usize, seed: u64) -> EncoderParams {
    let mut vocab: Vec<String> = kb
        .entries()
        .iter()
        .flat_map(|e| e.title.split_whitespace().map(str::to_lowercase))
        .collect();
    vocab.extend(["[cls]", "[sep]", "[s]", "[e]", "[ent]", OOV_TOKEN].map(str::to_string));
    vocab.sort();
    vocab.dedup();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrix: Vec<Vec<f64>> = (0..vocab.len())
        .map(|_| (0..dimension).map(|_| rng.gen_range(-0.5..0.5)).collect())
        .collect();
    EncoderParams::from_parts(vocab, matrix, dimension).expect("vocabulary is duplicate-free")
}
