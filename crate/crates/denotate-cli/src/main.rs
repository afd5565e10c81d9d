//! Command-line entry point: synthetic data generation, entity linking,
//! identifier training, and evaluation, all reproducible from a single seed.

mod records;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use denotate::data::{generate_synthetic, load_dataset, DialoguePair, SyntheticSpec};
use denotate::eval::{EvalReport, PairOutcome};
use denotate::kb::KnowledgeBase;
use denotate::linker::{link_pair, LinkedUtterance, LinkerConfig, Method};
use denotate::neural::{
    encode_pair, load_pretrained, train, EncodedSequence, ModelConfig, NeuralModel,
    TrainingConfig, Vocabulary,
};
use denotate::rules::{
    basic_cancellation, cancellation_with_enumeration, cancellation_with_priors,
    train_ngram_priors, NgramPriorTable,
};
use denotate::{EntityId, Utterance};

use records::{read_jsonl, write_jsonl, LinkedPairRecord};

/// Flag combinations the program cannot act on (exit code 1).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

/// A violated internal invariant (exit code 3).
#[derive(Debug, thiserror::Error)]
#[error("internal invariant violated: {0}")]
struct InternalError(String);

#[derive(Parser)]
#[command(
    name = "denotate",
    about = "Extract question denotations from answer hints",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic KB with train/val/test dialogue files.
    Generate(GenerateArgs),
    /// Link dataset pairs against the KB and persist the linked pairs.
    Link(LinkArgs),
    /// Train an identifier (context n-gram priors or the neural model).
    Train(TrainArgs),
    /// Run linking plus identification and report the three accuracies.
    Evaluate(EvaluateArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    RelationMax,
    Popularity,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::RelationMax => Method::RelationMax,
            MethodArg::Popularity => Method::Popularity,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum IdentifierArg {
    Basic,
    Enum,
    Priors,
    Neural,
}

#[derive(Args)]
struct KbArgs {
    /// Triples file: subject<TAB>relation<TAB>object per line.
    #[arg(long)]
    kb_triples: PathBuf,
    /// Lexicon file: id<TAB>name<TAB>alias1|alias2|... per line.
    #[arg(long)]
    kb_lexicon: PathBuf,
}

impl KbArgs {
    fn load(&self) -> Result<KnowledgeBase> {
        Ok(KnowledgeBase::load(&self.kb_triples, &self.kb_lexicon)?)
    }
}

#[derive(Args)]
struct LinkerArgs {
    /// Disambiguation method.
    #[arg(long, value_enum, default_value = "relation-max")]
    method: MethodArg,
    /// Answer n-best size.
    #[arg(long, default_value_t = 5)]
    beam: usize,
    /// Normalized edit-distance budget for surface matching.
    #[arg(long, default_value_t = 0.2)]
    edit_threshold: f64,
    /// Longest candidate n-gram.
    #[arg(long, default_value_t = 4)]
    max_candidate_ngram: usize,
}

impl LinkerArgs {
    fn config(&self) -> Result<LinkerConfig> {
        if self.beam == 0 {
            bail!(UsageError("--beam must be at least 1".into()));
        }
        if self.max_candidate_ngram == 0 {
            bail!(UsageError("--max-candidate-ngram must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.edit_threshold) {
            bail!(UsageError("--edit-threshold must be in [0, 1]".into()));
        }
        Ok(LinkerConfig {
            max_ngram_order: self.max_candidate_ngram,
            max_normalized_distance: self.edit_threshold,
            beam_width: self.beam,
        })
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory for the KB and dataset files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    kb_size: usize,
    #[arg(long, default_value_t = 60)]
    dialogues: usize,
    #[arg(long, default_value_t = 0.0)]
    misspelling_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    extra_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    enum_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct LinkArgs {
    #[command(flatten)]
    kb: KbArgs,
    /// Dataset file: id<TAB>question<TAB>answer_hint<TAB>gold per line.
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    linker: LinkerArgs,
    /// Where to write the linked pairs (JSON lines).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Which identifier to train.
    #[arg(long, value_enum)]
    identifier: IdentifierArg,
    #[arg(long)]
    kb_triples: Option<PathBuf>,
    #[arg(long)]
    kb_lexicon: Option<PathBuf>,
    /// Training dataset (linked internally when given).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Pre-linked training pairs from `denotate link`.
    #[arg(long)]
    linked: Option<PathBuf>,
    /// Validation dataset for neural model selection.
    #[arg(long)]
    val_dataset: Option<PathBuf>,
    /// Pre-linked validation pairs.
    #[arg(long)]
    val_linked: Option<PathBuf>,
    #[command(flatten)]
    linker: LinkerArgs,
    /// Context n-gram order for the priors identifier.
    #[arg(long, default_value_t = 3)]
    ngram_order: usize,
    /// Training epochs for the neural identifier.
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pretrained word vectors (text format); enables the pretrained input.
    #[arg(long)]
    pretrained_vectors: Option<PathBuf>,
    /// Disable the positional word features.
    #[arg(long)]
    no_positional: bool,
    /// Output file (priors table or model checkpoint).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    kb_triples: Option<PathBuf>,
    #[arg(long)]
    kb_lexicon: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Pre-linked pairs; skips the linking stage.
    #[arg(long)]
    linked: Option<PathBuf>,
    #[command(flatten)]
    linker: LinkerArgs,
    #[arg(long, value_enum)]
    identifier: IdentifierArg,
    /// Priors table produced by `denotate train --identifier priors`.
    #[arg(long)]
    priors: Option<PathBuf>,
    /// Model checkpoint produced by `denotate train --identifier neural`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Where to write the evaluation report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; usage problems exit 1
            let _ = e.print();
            std::process::exit(if e.exit_code() == 0 { 0 } else { 1 });
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        let code = if err.downcast_ref::<UsageError>().is_some() {
            1
        } else if err.downcast_ref::<InternalError>().is_some() {
            3
        } else {
            2
        };
        std::process::exit(code);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Link(args) => cmd_link(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let spec = SyntheticSpec {
        kb_size: args.kb_size,
        dialogue_count: args.dialogues,
        misspelling_rate: args.misspelling_rate,
        extra_entity_rate: args.extra_rate,
        enumeration_rate: args.enum_rate,
        seed: args.seed,
    };
    let out = generate_synthetic(&spec, &args.out)?;
    println!(
        "generated {} entities, {} pairs ({} ambiguous, {} enumeration, {} misspelled, {} with extras)",
        args.kb_size,
        out.pair_count,
        out.ambiguous_pairs,
        out.enumeration_pairs,
        out.misspelled_pairs,
        out.extra_entity_pairs
    );
    println!("kb:    {}", out.triples_path.display());
    println!("       {}", out.lexicon_path.display());
    println!("data:  {}", out.train_path.display());
    println!("       {}", out.val_path.display());
    println!("       {}", out.test_path.display());
    Ok(())
}

fn link_dataset(
    kb: &KnowledgeBase,
    pairs: &[DialoguePair],
    cfg: &LinkerConfig,
    method: Method,
) -> Vec<LinkedPairRecord> {
    pairs
        .iter()
        .map(|pair| {
            let question = Utterance::new(pair.question.as_str());
            let answer = Utterance::new(pair.answer_hint.as_str());
            let (linked_q, nbest) = link_pair(kb, &question, &answer, cfg, method);
            LinkedPairRecord::new(&pair.id, &pair.gold_denotation, &linked_q, &nbest)
        })
        .collect()
}

fn outcomes_from_records(
    records: &[LinkedPairRecord],
    identified: Option<&[Option<EntityId>]>,
) -> Result<Vec<PairOutcome>> {
    let mut outcomes = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let nbest = record.answer_nbest_linked()?;
        outcomes.push(PairOutcome {
            gold: record.gold_id(),
            answer_nbest: nbest.iter().map(|lu| lu.entity_ids()).collect(),
            identified: identified.and_then(|ids| ids[i].clone()),
        });
    }
    Ok(outcomes)
}

fn print_linking_report(outcomes: &[PairOutcome]) -> Result<()> {
    let report = EvalReport::from_outcomes(outcomes, &[1, 2, 5])?;
    println!("pairs: {}", report.total_pairs);
    for n in [1, 2, 5] {
        println!(
            "linking_accuracy@{n}: {:.4} (ci {:.4})",
            report.linking_accuracy(n).unwrap(),
            report.linking_ci(n).unwrap()
        );
    }
    Ok(())
}

fn cmd_link(args: LinkArgs) -> Result<()> {
    let cfg = args.linker.config()?;
    let kb = args.kb.load()?;
    let pairs = load_dataset(&args.dataset)?;
    let records = link_dataset(&kb, &pairs, &cfg, args.linker.method.into());
    write_jsonl(&args.out, &records)?;
    println!("linked {} pairs -> {}", records.len(), args.out.display());
    let outcomes = outcomes_from_records(&records, None)?;
    print_linking_report(&outcomes)?;
    Ok(())
}

// linked pairs from --linked, or by linking --dataset against the KB
fn obtain_linked(
    linked: &Option<PathBuf>,
    dataset: &Option<PathBuf>,
    kb_triples: &Option<PathBuf>,
    kb_lexicon: &Option<PathBuf>,
    linker: &LinkerArgs,
    what: &str,
) -> Result<Vec<LinkedPairRecord>> {
    match (linked, dataset) {
        (Some(path), _) => read_jsonl(path),
        (None, Some(dataset)) => {
            let (Some(triples), Some(lexicon)) = (kb_triples, kb_lexicon) else {
                bail!(UsageError(format!(
                    "{what}: --dataset needs --kb-triples and --kb-lexicon for linking"
                )));
            };
            let kb = KnowledgeBase::load(triples, lexicon)?;
            let cfg = linker.config()?;
            let pairs = load_dataset(dataset)?;
            Ok(link_dataset(&kb, &pairs, &cfg, linker.method.into()))
        }
        (None, None) => bail!(UsageError(format!(
            "{what}: give either --linked or --dataset"
        ))),
    }
}

// (question, top-1 answer, gold) triples for identifier training
fn training_triples(
    records: &[LinkedPairRecord],
) -> Result<Vec<(LinkedUtterance, LinkedUtterance, EntityId)>> {
    records
        .iter()
        .map(|r| {
            let q = r.question_linked()?;
            let a = r
                .answer_nbest_linked()?
                .into_iter()
                .next()
                .unwrap_or_else(|| LinkedUtterance::unlinked(Utterance::new(r.answer_raw.as_str())));
            Ok((q, a, r.gold_id()))
        })
        .collect()
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let records = obtain_linked(
        &args.linked,
        &args.dataset,
        &args.kb_triples,
        &args.kb_lexicon,
        &args.linker,
        "train",
    )?;
    let triples = training_triples(&records)?;
    match args.identifier {
        IdentifierArg::Priors => {
            let (table, skipped) = train_ngram_priors(&triples, args.ngram_order, 1.0)?;
            let usable = triples.len() - skipped;
            if usable == 0 {
                bail!("no usable training pairs: no gold entity was linkable");
            }
            std::fs::write(&args.out, table.to_text())
                .with_context(|| format!("writing {}", args.out.display()))?;
            println!(
                "trained priors on {usable} pairs ({skipped} skipped), {} patterns -> {}",
                table.counts().count(),
                args.out.display()
            );
            Ok(())
        }
        IdentifierArg::Neural => cmd_train_neural(&args, &triples),
        _ => bail!(UsageError(
            "--identifier must be `priors` or `neural` for training".into()
        )),
    }
}

fn encode_usable(
    vocab: &Vocabulary,
    triples: &[(LinkedUtterance, LinkedUtterance, EntityId)],
) -> (Vec<EncodedSequence>, usize) {
    let mut encoded = Vec::new();
    let mut skipped = 0;
    for (q, a, gold) in triples {
        match encode_pair(vocab, q, a, Some(gold)) {
            Ok(seq) => encoded.push(seq),
            Err(_) => skipped += 1,
        }
    }
    (encoded, skipped)
}

fn cmd_train_neural(
    args: &TrainArgs,
    triples: &[(LinkedUtterance, LinkedUtterance, EntityId)],
) -> Result<()> {
    if args.epochs == 0 {
        bail!(UsageError("--epochs must be at least 1".into()));
    }
    let pretrained = match &args.pretrained_vectors {
        Some(path) => Some(load_pretrained(path)?),
        None => None,
    };
    let val_triples = match (&args.val_linked, &args.val_dataset) {
        (None, None) => {
            eprintln!("no validation set given; validating on the training set");
            triples.to_vec()
        }
        _ => {
            let records = obtain_linked(
                &args.val_linked,
                &args.val_dataset,
                &args.kb_triples,
                &args.kb_lexicon,
                &args.linker,
                "validation",
            )?;
            training_triples(&records)?
        }
    };

    let vocab = Vocabulary::build(triples.iter().map(|(q, a, _)| (q, a)));
    let (train_set, skipped) = encode_usable(&vocab, triples);
    if train_set.is_empty() {
        bail!("no usable training pairs: no gold entity was linkable");
    }
    if skipped > 0 {
        println!("skipped {skipped} training pairs with unlinkable gold");
    }
    let (val_set, val_skipped) = encode_usable(&vocab, &val_triples);
    if val_skipped > 0 {
        println!("skipped {val_skipped} validation pairs with unlinkable gold");
    }

    let config = TrainingConfig {
        epochs: args.epochs,
        seed: args.seed,
        model: ModelConfig {
            use_positional: !args.no_positional,
            use_pretrained: pretrained.is_some(),
            pretrained_dim: pretrained.as_ref().map(|t| t.dim()).unwrap_or(10),
            ..ModelConfig::default()
        },
        ..TrainingConfig::default()
    };
    let outcome = train(vocab, pretrained, &train_set, &val_set, &config)?;
    for stats in &outcome.history {
        println!(
            "epoch {:3}: train_loss {:.4} train_acc {:.4} val_acc {:.4}",
            stats.epoch, stats.train_loss, stats.train_accuracy, stats.val_accuracy
        );
    }
    println!("best epoch: {}", outcome.best_epoch);
    std::fs::write(&args.out, outcome.model.to_checkpoint())
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("checkpoint -> {}", args.out.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    match args.identifier {
        IdentifierArg::Priors if args.priors.is_none() => {
            bail!(UsageError("--identifier priors needs --priors FILE".into()))
        }
        IdentifierArg::Neural if args.model.is_none() => {
            bail!(UsageError("--identifier neural needs --model FILE".into()))
        }
        IdentifierArg::Basic | IdentifierArg::Enum if args.priors.is_some() => {
            bail!(UsageError("--priors is only valid with --identifier priors".into()))
        }
        _ if args.model.is_some() && args.identifier != IdentifierArg::Neural => {
            bail!(UsageError("--model is only valid with --identifier neural".into()))
        }
        _ => {}
    }
    let records = obtain_linked(
        &args.linked,
        &args.dataset,
        &args.kb_triples,
        &args.kb_lexicon,
        &args.linker,
        "evaluate",
    )?;
    if records.is_empty() {
        bail!("no pairs to evaluate");
    }

    // identification runs on the top-1 linked answer
    let kb = match (&args.kb_triples, &args.kb_lexicon) {
        (Some(t), Some(l)) => Some(KnowledgeBase::load(t, l)?),
        _ => None,
    };
    let identified: Vec<Option<EntityId>> = match args.identifier {
        IdentifierArg::Basic | IdentifierArg::Enum | IdentifierArg::Priors => {
            let kb = kb.as_ref().ok_or_else(|| {
                UsageError("rule identifiers need --kb-triples and --kb-lexicon".into())
            })?;
            let priors = match &args.priors {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    Some(NgramPriorTable::parse(&text, 1.0, 3)?)
                }
                None => None,
            };
            let mut out = Vec::with_capacity(records.len());
            for record in &records {
                let q = record.question_linked()?;
                let a = record
                    .answer_nbest_linked()?
                    .into_iter()
                    .next()
                    .unwrap_or_else(|| {
                        LinkedUtterance::unlinked(Utterance::new(record.answer_raw.as_str()))
                    });
                let result = match args.identifier {
                    IdentifierArg::Basic => basic_cancellation(&q, &a, kb),
                    IdentifierArg::Enum => cancellation_with_enumeration(&q, &a, kb),
                    IdentifierArg::Priors => {
                        cancellation_with_priors(&q, &a, kb, priors.as_ref().expect("checked"))
                    }
                    IdentifierArg::Neural => unreachable!(),
                };
                out.push(result.chosen_entity().cloned());
            }
            out
        }
        IdentifierArg::Neural => {
            let path = args.model.as_ref().expect("checked");
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let model = NeuralModel::from_checkpoint(&text)?;
            let mut out = Vec::with_capacity(records.len());
            for record in &records {
                let q = record.question_linked()?;
                let a = record
                    .answer_nbest_linked()?
                    .into_iter()
                    .next()
                    .unwrap_or_else(|| {
                        LinkedUtterance::unlinked(Utterance::new(record.answer_raw.as_str()))
                    });
                let choice = encode_pair(model.vocab(), &q, &a, None)
                    .ok()
                    .and_then(|seq| model.predict_entity(&seq).ok());
                out.push(choice);
            }
            out
        }
    };

    let outcomes = outcomes_from_records(&records, Some(&identified))?;
    let report = EvalReport::from_outcomes(&outcomes, &[1, 2, 5])?;

    // surfaced module invariant: extraction = identification x linking@1
    let decomposed = report.identification_accuracy() * report.linking_accuracy(1).unwrap();
    if (report.extraction_accuracy() - decomposed).abs() > 1e-9 {
        bail!(InternalError(format!(
            "extraction {} != identification x linking@1 {}",
            report.extraction_accuracy(),
            decomposed
        )));
    }

    print!("{}", report.to_table());
    println!(
        "decomposition: extraction {:.4} = identification {:.4} x linking@1 {:.4}",
        report.extraction_accuracy(),
        report.identification_accuracy(),
        report.linking_accuracy(1).unwrap()
    );
    if let Some(out) = &args.out {
        std::fs::write(out, report.to_text())
            .with_context(|| format!("writing {}", out.display()))?;
        println!("report -> {}", out.display());
    }
    Ok(())
}
