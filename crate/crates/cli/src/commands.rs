//! One handler per subcommand. Every handler loads its inputs, runs the
//! owning module, writes its primary output, and records a run manifest
//! hashing everything it read.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use skillink_core::alignment::synthesize_record;
use skillink_core::baselines::{build_tfidf, random_rank, tfidf_rank};
use skillink_core::biencoder::{encode_kb, rank_encoded, train, EncodedKb, TrainConfig};
use skillink_core::corpus::{compute_stats, read_jsonl, render_mention_input, write_jsonl};
use skillink_core::eval::aggregate_runs;
use skillink_core::generative::{build_trie, constrained_beam_search, fit_token_model, GenModelConfig};
use skillink_core::{
    AlignConfig, BigramTokenModel, CharTrigramEmbedder, EncoderParams, EntityId, EvalReport,
    KnowledgeBase, MentionRecord,
};

use crate::args::{
    self, AlignArgs, CandidatePool, Cli, Command, Engine, EvaluateArgs, FitArgs, KbCommand,
    KbValidateArgs, LinkArgs, StatsArgs, Subset, SweepArgs, TrainArgs,
};
use crate::error::CliError;
use crate::manifest::ManifestBuilder;
use crate::rankings::{read_rankings, write_rankings, RankingLine};

/// The five documented initialization seeds averaged by `seed-sweep`.
pub const SWEEP_SEEDS: [u64; 5] = [276_800, 381_552, 497_646, 624_189, 884_832];

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Kb(KbCommand::Validate(args)) => kb_validate(args),
        Command::Align(args) => align(args),
        Command::Stats(args) => stats(args),
        Command::TrainBiencoder(args) => train_biencoder(args),
        Command::FitGenmodel(args) => fit_genmodel(args),
        Command::Link(args) => link(args),
        Command::Evaluate(args) => evaluate(args),
        Command::SeedSweep(args) => seed_sweep(args),
    }
}

fn load_kb(args: &args::KbArgs) -> Result<KnowledgeBase, CliError> {
    Ok(KnowledgeBase::load(&args.kb, args.format())?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("cannot serialize the report: {e}")))?;
    std::fs::write(path, body + "\n")
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// kb validate

#[derive(Serialize)]
struct KbSummary {
    entities: usize,
    unk_id: EntityId,
}

fn kb_validate(args: KbValidateArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("kb validate", &args)?;
    let kb = load_kb(&args.kb)?;
    kb.validate()?;
    manifest.input(&args.kb.kb)?;

    let summary = KbSummary {
        entities: kb.len(),
        unk_id: kb.unk_id(),
    };
    println!(
        "knowledge base ok: {} entities (unk id {})",
        summary.entities, summary.unk_id
    );
    if let Some(output) = &args.output {
        write_json(output, &summary)?;
        manifest.output(output);
    }
    manifest.write(args.manifest.as_deref())
}

// ---------------------------------------------------------------------------
// align

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AlignInput {
    sentence: String,
    target_title: String,
}

fn align(args: AlignArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(CliError::Validation(format!(
            "--threshold {} must lie in [0, 1]",
            args.threshold
        )));
    }
    if !(args.keep_fraction > 0.0 && args.keep_fraction <= 1.0) {
        return Err(CliError::Validation(format!(
            "--keep-fraction {} must lie in (0, 1]",
            args.keep_fraction
        )));
    }
    let mut manifest = ManifestBuilder::new("align", &args)?;
    let kb = load_kb(&args.kb)?;
    let config = AlignConfig {
        threshold: args.threshold,
        keep_fraction: args.keep_fraction,
    };
    let embedder = CharTrigramEmbedder::default();

    let body = std::fs::read_to_string(&args.input)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", args.input.display())))?;
    let mut records = Vec::new();
    for (number, line) in body.lines().enumerate() {
        let number = number + 1;
        if line.trim().is_empty() {
            continue;
        }
        let input: AlignInput = serde_json::from_str(line)
            .map_err(|e| CliError::Validation(format!("line {number}: {e}")))?;
        let target = kb.lookup_by_title(&input.target_title).ok_or_else(|| {
            CliError::Validation(format!(
                "line {number}: target title {:?} is not in the knowledge base",
                input.target_title
            ))
        })?;
        if target.is_unk() {
            return Err(CliError::Validation(format!(
                "line {number}: cannot align against the UNK sentinel; name a real taxonomy entry"
            )));
        }
        let record = synthesize_record(&input.sentence, target, &kb, &config, &embedder)
            .ok_or_else(|| {
                CliError::Validation(format!("line {number}: sentence has no tokens"))
            })?;
        records.push(record);
    }
    manifest.input(&args.kb.kb)?;
    manifest.input(&args.input)?;

    let matched = records.iter().filter(|r| r.label_id != kb.unk_id()).count();
    write_jsonl(&args.output, &records)?;
    manifest.output(&args.output);
    println!(
        "aligned {} records ({} matched, {} unk) -> {}",
        records.len(),
        matched,
        records.len() - matched,
        args.output.display()
    );
    manifest.write(args.manifest.as_deref())
}

// ---------------------------------------------------------------------------
// stats

fn stats(args: StatsArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("stats", &args)?;
    let kb = load_kb(&args.kb)?;
    let records = read_jsonl(&args.input, &kb)?;
    manifest.input(&args.kb.kb)?;
    manifest.input(&args.input)?;

    let stats = compute_stats(&records, &kb);
    println!("instances     {:>8}", stats.instances);
    println!("unique titles {:>8}", stats.unique_titles);
    println!("unk records   {:>8}", stats.unk_count);
    if let Some(output) = &args.output {
        write_json(output, &stats)?;
        manifest.output(output);
    }
    manifest.write(args.manifest.as_deref())
}

// ---------------------------------------------------------------------------
// train-biencoder

fn train_biencoder(args: TrainArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("train-biencoder", &args)?;
    manifest.seed(args.seed);
    let kb = load_kb(&args.kb)?;
    let records = read_jsonl(&args.input, &kb)?;
    let dev = args
        .dev
        .as_ref()
        .map(|path| read_jsonl(path, &kb))
        .transpose()?;
    manifest.input(&args.kb.kb)?;
    manifest.input(&args.input)?;
    if let Some(dev_path) = &args.dev {
        manifest.input(dev_path)?;
    }

    let config = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        lr: args.lr,
        warmup_fraction: args.warmup_fraction,
        seed: args.seed,
        dimension: args.dimension,
        hard_negatives: args.hard_negatives,
    };
    let outcome = train(&records, dev.as_deref(), &kb, &config)?;

    println!("initial loss {:.6}", outcome.history.initial_loss);
    for (epoch, loss) in outcome.history.epoch_losses.iter().enumerate() {
        match outcome.history.dev_accuracy_at_1.get(epoch) {
            Some(accuracy) => {
                println!("epoch {:>3}  loss {loss:.6}  dev acc@1 {accuracy:6.2}", epoch + 1)
            }
            None => println!("epoch {:>3}  loss {loss:.6}", epoch + 1),
        }
    }
    println!("best epoch {}", outcome.history.best_epoch + 1);

    outcome.params.save(&args.model)?;
    manifest.output(&args.model);
    println!("saved encoder checkpoint -> {}", args.model.display());
    manifest.write(args.manifest.as_deref())
}

// ---------------------------------------------------------------------------
// fit-genmodel

fn fit_genmodel(args: FitArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("fit-genmodel", &args)?;
    let kb = load_kb(&args.kb)?;
    let records = read_jsonl(&args.input, &kb)?;
    manifest.input(&args.kb.kb)?;
    manifest.input(&args.input)?;

    let config = GenModelConfig {
        alpha: args.alpha,
        lambda: args.lambda,
    };
    let model = fit_token_model(&records, &kb, config)?;
    model.save(&args.model)?;
    manifest.output(&args.model);
    println!(
        "fitted token model on {} records -> {}",
        records.len(),
        args.model.display()
    );
    manifest.write(args.manifest.as_deref())
}

// ---------------------------------------------------------------------------
// link

fn link(args: LinkArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("link", &args)?;
    let kb = load_kb(&args.kb)?;
    let records = read_jsonl(&args.input, &kb)?;
    manifest.input(&args.kb.kb)?;
    manifest.input(&args.input)?;

    if args.k == 0 || args.k > kb.len() {
        return Err(CliError::Validation(format!(
            "--k {} out of range for a knowledge base of {} entities",
            args.k,
            kb.len()
        )));
    }
    if args.candidate_pool == CandidatePool::GoldPool && args.engine != Engine::Random {
        return Err(CliError::Validation(
            "--candidate-pool gold-pool is only meaningful for --engine random; \
             the other engines define their own candidate sets"
                .to_string(),
        ));
    }

    let lines = match args.engine {
        Engine::Random => link_random(&args, &kb, &records)?,
        Engine::Tfidf => link_tfidf(&args, &kb, &records),
        Engine::Biencoder => link_biencoder(&args, &kb, &records, &mut manifest)?,
        Engine::Generative => link_generative(&args, &kb, &records, &mut manifest)?,
    };

    write_rankings(&args.output, &lines)?;
    manifest.output(&args.output);
    if args.engine == Engine::Random {
        manifest.seed(args.seed);
    }
    println!(
        "linked {} records with {} candidates each -> {}",
        lines.len(),
        args.k,
        args.output.display()
    );
    manifest.write(args.manifest.as_deref())
}

fn link_random(
    args: &LinkArgs,
    kb: &KnowledgeBase,
    records: &[MentionRecord],
) -> Result<Vec<RankingLine>, CliError> {
    let pool: Vec<EntityId> = match args.candidate_pool {
        CandidatePool::FullKb => (0..kb.len() as EntityId).collect(),
        // the distinct gold ids of the split, shaped like an annotated
        // evaluation pool; ascending so the pool is input-order independent
        CandidatePool::GoldPool => records
            .iter()
            .map(|r| r.label_id)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    records
        .iter()
        .enumerate()
        .map(|(index, _)| {
            let candidates = random_rank(&pool, args.k, args.seed.wrapping_add(index as u64))?;
            Ok(RankingLine {
                record_index: index,
                candidates,
            })
        })
        .collect()
}

fn link_tfidf(args: &LinkArgs, kb: &KnowledgeBase, records: &[MentionRecord]) -> Vec<RankingLine> {
    let index = build_tfidf(kb);
    records
        .iter()
        .enumerate()
        .map(|(record_index, record)| RankingLine {
            record_index,
            candidates: tfidf_rank(&index, record, args.k),
        })
        .collect()
}

fn link_biencoder(
    args: &LinkArgs,
    kb: &KnowledgeBase,
    records: &[MentionRecord],
    manifest: &mut ManifestBuilder,
) -> Result<Vec<RankingLine>, CliError> {
    let model_path = args.model.as_ref().ok_or_else(|| {
        CliError::Validation("--model is required for --engine biencoder".to_string())
    })?;
    let params = EncoderParams::load(model_path)?;
    manifest.input(model_path)?;
    let encoded: EncodedKb = encode_kb(&params, kb);
    records
        .iter()
        .enumerate()
        .map(|(record_index, record)| {
            let candidates = rank_encoded(&params, &encoded, record, args.k)?;
            Ok(RankingLine {
                record_index,
                candidates,
            })
        })
        .collect()
}

fn link_generative(
    args: &LinkArgs,
    kb: &KnowledgeBase,
    records: &[MentionRecord],
    manifest: &mut ManifestBuilder,
) -> Result<Vec<RankingLine>, CliError> {
    let model_path = args.model.as_ref().ok_or_else(|| {
        CliError::Validation("--model is required for --engine generative".to_string())
    })?;
    let model = BigramTokenModel::load(model_path)?;
    manifest.input(model_path)?;
    let trie = build_trie(kb);
    let beam_width = args.beam_width.unwrap_or(args.k);
    records
        .iter()
        .enumerate()
        .map(|(record_index, record)| {
            let input = render_mention_input(record)?;
            let candidates = constrained_beam_search(&model, &trie, &input, beam_width, args.k)?;
            Ok(RankingLine {
                record_index,
                candidates,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// evaluate

/// Report shape shared by `evaluate` (empty seed list) and external tooling.
#[derive(Serialize)]
struct EvalOutput {
    #[serde(flatten)]
    report: EvalReport,
    seeds: Vec<u64>,
}

fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    args::validate_k_grid(&args.k_grid).map_err(CliError::Validation)?;
    let mut manifest = ManifestBuilder::new("evaluate", &args)?;
    let kb = load_kb(&args.kb)?;
    let records = read_jsonl(&args.input, &kb)?;
    let predictions = read_rankings(&args.rankings, records.len())?;
    manifest.input(&args.kb.kb)?;
    manifest.input(&args.input)?;
    manifest.input(&args.rankings)?;

    let gold: Vec<EntityId> = records.iter().map(|r| r.label_id).collect();
    let report = match args.subset {
        Subset::All => EvalReport::compute(&predictions, &gold, &args.k_grid, Some("all"))?,
        Subset::UnkOnly => {
            let unk = kb.unk_id();
            let mut subset_predictions = Vec::new();
            let mut subset_gold = Vec::new();
            for (ranking, &g) in predictions.iter().zip(&gold) {
                if g == unk {
                    subset_predictions.push(ranking.clone());
                    subset_gold.push(g);
                }
            }
            if subset_gold.is_empty() {
                EvalReport {
                    subset: Some("unk-only".to_string()),
                    n: 0,
                    accuracy_at: BTreeMap::new(),
                    mrr: None,
                }
            } else {
                EvalReport::compute(
                    &subset_predictions,
                    &subset_gold,
                    &args.k_grid,
                    Some("unk-only"),
                )?
            }
        }
    };

    print!("{}", report.to_table());
    if let Some(output) = &args.output {
        write_json(
            output,
            &EvalOutput {
                report,
                seeds: Vec::new(),
            },
        )?;
        manifest.output(output);
    }
    manifest.write(args.manifest.as_deref())
}

// ---------------------------------------------------------------------------
// seed-sweep

#[derive(Serialize)]
struct MeanStd {
    mean: f64,
    std: f64,
}

#[derive(Serialize)]
struct SweepOutput {
    subset: String,
    n: usize,
    acc: BTreeMap<usize, MeanStd>,
    mrr: MeanStd,
    seeds: Vec<u64>,
}

fn seed_sweep(args: SweepArgs) -> Result<(), CliError> {
    args::validate_k_grid(&args.k_grid).map_err(CliError::Validation)?;
    let mut manifest = ManifestBuilder::new("seed-sweep", &args)?;
    let kb = load_kb(&args.kb)?;
    let records = read_jsonl(&args.input, &kb)?;
    let dev = args
        .dev
        .as_ref()
        .map(|path| read_jsonl(path, &kb))
        .transpose()?;
    let eval_records = read_jsonl(&args.eval, &kb)?;
    manifest.input(&args.kb.kb)?;
    manifest.input(&args.input)?;
    if let Some(dev_path) = &args.dev {
        manifest.input(dev_path)?;
    }
    manifest.input(&args.eval)?;

    let k = *args.k_grid.last().expect("validated non-empty");
    if k > kb.len() {
        return Err(CliError::Validation(format!(
            "--k-grid cutoff {k} exceeds the knowledge base size {}",
            kb.len()
        )));
    }
    let gold: Vec<EntityId> = eval_records.iter().map(|r| r.label_id).collect();

    let mut reports = Vec::with_capacity(SWEEP_SEEDS.len());
    for seed in SWEEP_SEEDS {
        let config = TrainConfig {
            epochs: args.epochs,
            batch_size: args.batch_size,
            lr: args.lr,
            warmup_fraction: args.warmup_fraction,
            seed,
            dimension: args.dimension,
            hard_negatives: args.hard_negatives,
        };
        let outcome = train(&records, dev.as_deref(), &kb, &config)?;
        let encoded = encode_kb(&outcome.params, &kb);
        let predictions: Vec<Vec<EntityId>> = eval_records
            .iter()
            .map(|record| {
                Ok(rank_encoded(&outcome.params, &encoded, record, k)?
                    .into_iter()
                    .map(|c| c.entity_id)
                    .collect())
            })
            .collect::<Result<_, CliError>>()?;
        let report = EvalReport::compute(&predictions, &gold, &args.k_grid, Some("all"))?;
        let summary: Vec<String> = args
            .k_grid
            .iter()
            .map(|cut| format!("acc@{cut} {:6.2}", report.accuracy_at[cut]))
            .collect();
        println!(
            "seed {seed:>6}  {}  mrr {:6.2}",
            summary.join("  "),
            report.mrr.unwrap_or(0.0)
        );
        reports.push(report);
    }

    let aggregate = aggregate_runs(&reports)?;
    let mut acc = BTreeMap::new();
    for cut in &args.k_grid {
        let (mean, std) = aggregate[&format!("acc@{cut}")];
        acc.insert(*cut, MeanStd { mean, std });
    }
    let (mrr_mean, mrr_std) = aggregate["mrr"];
    let row: Vec<String> = args
        .k_grid
        .iter()
        .map(|cut| {
            let cell = &acc[cut];
            format!("acc@{cut} {:.2}±{:.2}", cell.mean, cell.std)
        })
        .collect();
    println!(
        "over {} seeds  {}  mrr {mrr_mean:.2}±{mrr_std:.2}",
        SWEEP_SEEDS.len(),
        row.join("  ")
    );

    let output = SweepOutput {
        subset: "all".to_string(),
        n: gold.len(),
        acc,
        mrr: MeanStd {
            mean: mrr_mean,
            std: mrr_std,
        },
        seeds: SWEEP_SEEDS.to_vec(),
    };
    write_json(&args.output, &output)?;
    manifest.output(&args.output);
    manifest.write(args.manifest.as_deref())
}
