//! Dataset files and a synthetic dialogue generator.
//!
//! The generator builds a small KB plus question/answer-hint pairs whose
//! gold denotation a perfect pipeline can always recover. It plants the
//! phenomena the pipeline has to survive at configurable rates:
//! misspellings in the gold mention, extra-information entities, and
//! enumeration questions. Half of the remaining pairs mention an entity
//! name shared by a more popular decoy, so context relations are required
//! to link them.

use std::fs;
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kb::{Entity, EntityId, Triple};
use crate::text::levenshtein;

/// One dataset record: a question, the user's answer hint, and the KB
/// entity answering the question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialoguePair {
    pub id: String,
    pub question: String,
    pub answer_hint: String,
    pub gold_denotation: EntityId,
}

/// Parses `id<TAB>question<TAB>answer_hint<TAB>gold_entity_id` lines,
/// preserving order. Blank lines are skipped.
pub fn load_dataset(path: &Path) -> Result<Vec<DialoguePair>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(Error::parse(path, lineno, "empty field"));
        }
        pairs.push(DialoguePair {
            id: fields[0].to_owned(),
            question: fields[1].to_owned(),
            answer_hint: fields[2].to_owned(),
            gold_denotation: EntityId::new(fields[3]),
        });
    }
    Ok(pairs)
}

/// Parameters for [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    /// Total entities in the generated KB (>= 5).
    pub kb_size: usize,
    pub dialogue_count: usize,
    /// Probability of corrupting one character of the gold mention.
    pub misspelling_rate: f64,
    /// Probability of appending an extra-information entity to the hint.
    pub extra_entity_rate: f64,
    /// Probability of generating an enumeration question.
    pub enumeration_rate: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.kb_size < 5 {
            return Err(Error::InvalidConfig(format!(
                "kb_size must be >= 5 to build ambiguity fixtures, got {}",
                self.kb_size
            )));
        }
        if self.dialogue_count == 0 {
            return Err(Error::InvalidConfig("dialogue_count must be positive".into()));
        }
        for (name, rate) in [
            ("misspelling_rate", self.misspelling_rate),
            ("extra_entity_rate", self.extra_entity_rate),
            ("enumeration_rate", self.enumeration_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0, 1], got {rate}")));
            }
        }
        Ok(())
    }
}

/// Paths of the generated files plus generation diagnostics.
#[derive(Debug, Clone)]
pub struct SyntheticOutput {
    pub triples_path: PathBuf,
    pub lexicon_path: PathBuf,
    pub train_path: PathBuf,
    pub val_path: PathBuf,
    pub test_path: PathBuf,
    pub pair_count: usize,
    /// Pairs whose gold mention also names a more popular decoy entity.
    pub ambiguous_pairs: usize,
    pub enumeration_pairs: usize,
    pub misspelled_pairs: usize,
    pub extra_entity_pairs: usize,
}

// Words appearing in question/answer templates. Generated entity names keep
// a comfortable edit distance from all of these.
const TEMPLATE_WORDS: &[&str] = &[
    "what", "is", "connected", "with", "it", "called", "and", "also", "or", "i", "think", "the",
];

const CONSONANTS: &[char] = &['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];

// Minimum raw edit distance between any two generated name tokens (and
// between tokens and template words). Keeps fuzzy lookup from cross-matching
// even after a single-character misspelling.
const MIN_TOKEN_DISTANCE: usize = 4;

struct NameFactory {
    rng_words: Vec<String>,
}

impl NameFactory {
    fn new() -> Self {
        NameFactory {
            rng_words: TEMPLATE_WORDS.iter().map(|w| (*w).to_string()).collect(),
        }
    }

    fn fresh_token(&mut self, rng: &mut ChaCha8Rng) -> String {
        for _ in 0..100_000 {
            let mut word = String::with_capacity(6);
            for _ in 0..3 {
                word.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())]);
                word.push(VOWELS[rng.random_range(0..VOWELS.len())]);
            }
            if self
                .rng_words
                .iter()
                .all(|w| levenshtein(w, &word) >= MIN_TOKEN_DISTANCE)
            {
                self.rng_words.push(word.clone());
                return word;
            }
        }
        unreachable!("pseudoword space exhausted");
    }

    fn fresh_name(&mut self, rng: &mut ChaCha8Rng, two_tokens: bool) -> String {
        if two_tokens {
            let a = self.fresh_token(rng);
            let b = self.fresh_token(rng);
            format!("{a} {b}")
        } else {
            self.fresh_token(rng)
        }
    }
}

struct KbPlan {
    entities: Vec<Entity>,
    triples: Vec<Triple>,
    // (question entity, gold entity, gold name) per group
    ambiguous: Vec<(EntityId, EntityId, String)>,
    plain: Vec<(EntityId, EntityId, String)>,
    options: Vec<(EntityId, String)>,
    extras: Vec<(EntityId, String)>,
}

struct PlanBuilder {
    plan: KbPlan,
    next_id: usize,
    junk: (EntityId, EntityId),
}

impl PlanBuilder {
    fn new_entity(&mut self, name: &str) -> EntityId {
        let id = EntityId::new(format!("e{:04}", self.next_id));
        self.next_id += 1;
        self.plan.entities.push(Entity::new(id.clone(), name));
        id
    }

    fn push_triple(&mut self, s: &EntityId, r: &str, o: &EntityId) {
        self.plan.triples.push(Triple {
            subject: s.clone(),
            relation: r.to_owned(),
            object: o.clone(),
        });
    }

    // three filler triples make the entity strictly more popular than any
    // gold entity (which sits in exactly one triple)
    fn make_popular(&mut self, e: &EntityId) {
        let (j0, j1) = self.junk.clone();
        self.push_triple(e, "linked_to", &j0);
        self.push_triple(e, "linked_to", &j1);
        self.push_triple(e, "linked_to", &j0);
    }

    fn add_ambiguous(&mut self, rng: &mut ChaCha8Rng, names: &mut NameFactory) {
        let q = self.new_entity(&names.fresh_name(rng, false));
        let two_tokens = rng.random_bool(0.2);
        let gold_name = names.fresh_name(rng, two_tokens);
        let g = self.new_entity(&gold_name);
        let d = self.new_entity(&gold_name);
        self.push_triple(&q, "connected_with", &g);
        // the decoy outranks the gold on popularity but has no relation to q
        self.make_popular(&d);
        self.plan.ambiguous.push((q, g, gold_name));
    }

    fn add_plain(&mut self, rng: &mut ChaCha8Rng, names: &mut NameFactory) {
        let q = self.new_entity(&names.fresh_name(rng, false));
        let two_tokens = rng.random_bool(0.2);
        let gold_name = names.fresh_name(rng, two_tokens);
        let g = self.new_entity(&gold_name);
        self.push_triple(&q, "connected_with", &g);
        self.plan.plain.push((q, g, gold_name));
    }

    fn add_extra(&mut self, rng: &mut ChaCha8Rng, names: &mut NameFactory) {
        let name = names.fresh_name(rng, false);
        let x = self.new_entity(&name);
        self.make_popular(&x);
        self.plan.extras.push((x, name));
    }

    fn question_name(&self, q: &EntityId) -> String {
        self.plan
            .entities
            .iter()
            .find(|e| &e.id == q)
            .expect("question entity exists")
            .canonical_name
            .clone()
    }
}

fn build_kb_plan(spec: &SyntheticSpec, rng: &mut ChaCha8Rng, names: &mut NameFactory) -> PlanBuilder {
    let mut b = PlanBuilder {
        plan: KbPlan {
            entities: Vec::new(),
            triples: Vec::new(),
            ambiguous: Vec::new(),
            plain: Vec::new(),
            options: Vec::new(),
            extras: Vec::new(),
        },
        next_id: 0,
        junk: (EntityId::new("tmp"), EntityId::new("tmp")),
    };
    // two junk entities serve as popularity-filler targets
    let j0 = b.new_entity(&names.fresh_name(rng, false));
    let j1 = b.new_entity(&names.fresh_name(rng, false));
    b.junk = (j0, j1);
    let mut remaining = spec.kb_size - 2;

    // one ambiguous group always exists (kb_size >= 5 guarantees the budget)
    b.add_ambiguous(rng, names);
    remaining -= 3;

    if remaining >= 2 {
        b.add_plain(rng, names);
        remaining -= 2;
    }
    if remaining >= 2 {
        for _ in 0..2 {
            let name = names.fresh_name(rng, false);
            let o = b.new_entity(&name);
            b.plan.options.push((o, name));
        }
        remaining -= 2;
    }
    if remaining >= 1 {
        b.add_extra(rng, names);
        remaining -= 1;
    }
    while remaining >= 3 {
        b.add_ambiguous(rng, names);
        remaining -= 3;
        if remaining >= 2 {
            b.add_plain(rng, names);
            remaining -= 2;
        }
        if remaining >= 1 {
            b.add_extra(rng, names);
            remaining -= 1;
        }
    }
    while remaining >= 2 {
        b.add_plain(rng, names);
        remaining -= 2;
    }
    while remaining >= 1 {
        b.add_extra(rng, names);
        remaining -= 1;
    }

    b
}

// Replace one character of one token of the mention with a different letter.
fn misspell(name: &str, rng: &mut ChaCha8Rng) -> String {
    let mut tokens: Vec<Vec<char>> = name.split(' ').map(|t| t.chars().collect()).collect();
    let ti = rng.random_range(0..tokens.len());
    let ci = rng.random_range(0..tokens[ti].len());
    let original = tokens[ti][ci];
    loop {
        let replacement = *CONSONANTS
            .iter()
            .chain(VOWELS.iter())
            .nth(rng.random_range(0..CONSONANTS.len() + VOWELS.len()))
            .unwrap();
        if replacement != original {
            tokens[ti][ci] = replacement;
            break;
        }
    }
    tokens
        .iter()
        .map(|t| t.iter().collect::<String>())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generates a synthetic KB and train/val/test dialogue files under
/// `out_dir`. Output is byte-identical for identical specs.
pub fn generate_synthetic(spec: &SyntheticSpec, out_dir: &Path) -> Result<SyntheticOutput> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut names = NameFactory::new();
    let builder = build_kb_plan(spec, &mut rng, &mut names);
    let plan = &builder.plan;

    let mut pairs: Vec<DialoguePair> = Vec::with_capacity(spec.dialogue_count);
    let mut ambiguous_pairs = 0usize;
    let mut enumeration_pairs = 0usize;
    let mut misspelled_pairs = 0usize;
    let mut extra_entity_pairs = 0usize;
    let mut non_enum_counter = 0usize;

    for i in 0..spec.dialogue_count {
        let id = format!("pair-{i:04}");
        let is_enum = plan.options.len() >= 2 && rng.random_bool(spec.enumeration_rate);
        if is_enum {
            enumeration_pairs += 1;
            let group = if plan.plain.is_empty() {
                &plan.ambiguous[rng.random_range(0..plan.ambiguous.len())]
            } else {
                &plan.plain[rng.random_range(0..plan.plain.len())]
            };
            let q_name = builder.question_name(&group.0);
            let a = rng.random_range(0..plan.options.len());
            let b = loop {
                let b = rng.random_range(0..plan.options.len());
                if b != a {
                    break b;
                }
            };
            let (gold_id, gold_name) = if rng.random_bool(0.5) {
                plan.options[a].clone()
            } else {
                plan.options[b].clone()
            };
            let mut mention = gold_name.clone();
            if rng.random_bool(spec.misspelling_rate) {
                mention = misspell(&mention, &mut rng);
                misspelled_pairs += 1;
            }
            pairs.push(DialoguePair {
                id,
                question: format!(
                    "is {} {} or {}",
                    q_name, plan.options[a].1, plan.options[b].1
                ),
                answer_hint: format!("i think it is {mention}"),
                gold_denotation: gold_id,
            });
        } else {
            let use_ambiguous = plan.plain.is_empty() || non_enum_counter.is_multiple_of(2);
            non_enum_counter += 1;
            let (g_id, g_name, q_name) = if use_ambiguous {
                ambiguous_pairs += 1;
                let (q, g, name) = &plan.ambiguous[rng.random_range(0..plan.ambiguous.len())];
                (g.clone(), name.clone(), builder.question_name(q))
            } else {
                let (q, g, name) = &plan.plain[rng.random_range(0..plan.plain.len())];
                (g.clone(), name.clone(), builder.question_name(q))
            };
            let mut mention = g_name.clone();
            if rng.random_bool(spec.misspelling_rate) {
                mention = misspell(&mention, &mut rng);
                misspelled_pairs += 1;
            }
            // "called" is long enough that no n-gram swallowing it stays within
            // the edit-distance budget of a gold name
            let mut answer = format!("with {q_name} it is called {mention}");
            if !plan.extras.is_empty() && rng.random_bool(spec.extra_entity_rate) {
                let (_, x_name) = &plan.extras[rng.random_range(0..plan.extras.len())];
                answer.push_str(&format!(" and also {x_name}"));
                extra_entity_pairs += 1;
            }
            pairs.push(DialoguePair {
                id,
                question: format!("what is connected with {q_name}"),
                answer_hint: answer,
                gold_denotation: g_id,
            });
        }
    }

    // write KB files
    let lexicon_path = out_dir.join("lexicon.tsv");
    let mut lexicon = String::new();
    for e in &plan.entities {
        lexicon.push_str(&format!("{}\t{}\t\n", e.id, e.canonical_name));
    }
    fs::write(&lexicon_path, lexicon).map_err(|e| Error::io(&lexicon_path, e))?;

    let triples_path = out_dir.join("triples.tsv");
    let mut triples = String::new();
    for t in &plan.triples {
        triples.push_str(&format!("{}\t{}\t{}\n", t.subject, t.relation, t.object));
    }
    fs::write(&triples_path, triples).map_err(|e| Error::io(&triples_path, e))?;

    // split 60/15/25 in generation order
    let n = pairs.len();
    let n_test = n * 25 / 100;
    let n_val = n * 15 / 100;
    let n_train = n - n_val - n_test;
    let write_split = |path: &Path, slice: &[DialoguePair]| -> Result<()> {
        let mut text = String::new();
        for p in slice {
            text.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                p.id, p.question, p.answer_hint, p.gold_denotation
            ));
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    };
    let train_path = out_dir.join("train.tsv");
    let val_path = out_dir.join("val.tsv");
    let test_path = out_dir.join("test.tsv");
    write_split(&train_path, &pairs[..n_train])?;
    write_split(&val_path, &pairs[n_train..n_train + n_val])?;
    write_split(&test_path, &pairs[n_train + n_val..])?;

    Ok(SyntheticOutput {
        triples_path,
        lexicon_path,
        train_path,
        val_path,
        test_path,
        pair_count: n,
        ambiguous_pairs,
        enumeration_pairs,
        misspelled_pairs,
        extra_entity_pairs,
    })
}
