//! Rule-based denotation identification: context entity cancellation with
//! enumeration detection and context n-gram priors.
//!
//! The base rule removes the question's entities from the answer hint's
//! entities and keeps the most popular survivor. Enumeration questions
//! ("male or female?") flip the subtraction to an intersection. Context
//! n-gram priors re-weight each survivor by how often its surrounding token
//! pattern preceded a denotation in training data.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::kb::{EntityId, KnowledgeBase};
use crate::linker::{LinkedUtterance, Span};
use crate::text::Utterance;

/// Placeholder token standing in for the entity slot in a context pattern.
pub const ENTITY_SLOT: &str = "#ENTITY";

/// Padding token for context windows truncated at the utterance start.
pub const PAD_TOKEN: &str = "<s>";

/// Counts of context patterns observed with denotations vs. extra entities.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramPriorTable {
    order: usize,
    counts: BTreeMap<String, (u64, u64)>,
    smoothing_alpha: f64,
}

impl NgramPriorTable {
    /// `order` is the full pattern length in tokens (context plus slot),
    /// so it must be at least 2.
    pub fn new(order: usize, smoothing_alpha: f64) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidConfig(format!(
                "n-gram order must be >= 2 (a pattern needs at least one context token), got {order}"
            )));
        }
        if smoothing_alpha <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "smoothing alpha must be positive, got {smoothing_alpha}"
            )));
        }
        Ok(NgramPriorTable {
            order,
            counts: BTreeMap::new(),
            smoothing_alpha,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing_alpha(&self) -> f64 {
        self.smoothing_alpha
    }

    pub fn record(&mut self, pattern: &str, is_denotation: bool) {
        let entry = self.counts.entry(pattern.to_owned()).or_insert((0, 0));
        if is_denotation {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }

    /// Smoothed probability that an occurrence with this pattern is a
    /// denotation; unseen patterns get 0.5.
    pub fn prior(&self, pattern: &str) -> f64 {
        let (d, x) = self.counts.get(pattern).copied().unwrap_or((0, 0));
        let a = self.smoothing_alpha;
        (d as f64 + a) / ((d + x) as f64 + 2.0 * a)
    }

    pub fn counts(&self) -> impl Iterator<Item = (&str, u64, u64)> {
        self.counts.iter().map(|(p, (d, x))| (p.as_str(), *d, *x))
    }

    pub fn total_denotation_count(&self) -> u64 {
        self.counts.values().map(|(d, _)| d).sum()
    }

    pub fn total_extra_count(&self) -> u64 {
        self.counts.values().map(|(_, x)| x).sum()
    }

    /// One `pattern<TAB>denotation_count<TAB>extra_count` line per pattern.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (pattern, (d, x)) in &self.counts {
            out.push_str(pattern);
            out.push('\t');
            out.push_str(&d.to_string());
            out.push('\t');
            out.push_str(&x.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses the [`to_text`](Self::to_text) format. The pattern length
    /// determines the order; `fallback_order` is used when the table is
    /// empty.
    pub fn parse(text: &str, smoothing_alpha: f64, fallback_order: usize) -> Result<Self> {
        let mut counts = BTreeMap::new();
        let mut order: Option<usize> = None;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    "priors",
                    lineno,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            let pattern = fields[0];
            let tokens: Vec<&str> = pattern.split(' ').collect();
            if tokens.last() != Some(&ENTITY_SLOT) {
                return Err(Error::parse(
                    "priors",
                    lineno,
                    format!("pattern must end with {ENTITY_SLOT}"),
                ));
            }
            match order {
                None => order = Some(tokens.len()),
                Some(o) if o != tokens.len() => {
                    return Err(Error::parse(
                        "priors",
                        lineno,
                        format!("inconsistent pattern length: expected {o}, found {}", tokens.len()),
                    ));
                }
                _ => {}
            }
            let d: u64 = fields[1]
                .parse()
                .map_err(|_| Error::parse("priors", lineno, "bad denotation count"))?;
            let x: u64 = fields[2]
                .parse()
                .map_err(|_| Error::parse("priors", lineno, "bad extra count"))?;
            counts.insert(pattern.to_owned(), (d, x));
        }
        let mut table = NgramPriorTable::new(order.unwrap_or(fallback_order), smoothing_alpha)?;
        table.counts = counts;
        Ok(table)
    }
}

/// The context pattern of an entity occurrence: the `order - 1` tokens
/// immediately preceding the span (padded at the utterance start) followed
/// by the entity slot, space-joined.
pub fn context_pattern(utterance: &Utterance, span: Span, order: usize) -> String {
    let want = order - 1;
    let tokens = utterance.tokens();
    let lo = span.start.saturating_sub(want);
    let mut parts: Vec<&str> = Vec::with_capacity(order);
    parts.extend(std::iter::repeat_n(PAD_TOKEN, want.saturating_sub(span.start)));
    for tok in &tokens[lo..span.start] {
        parts.push(tok);
    }
    parts.push(ENTITY_SLOT);
    parts.join(" ")
}

/// Outcome of an identification rule. `chosen` is absent when no entity
/// survives the rule. `scores` lists every answer link with its diagnostic
/// score (cancelled occurrences score 0).
#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationResult {
    pub chosen: Option<(Span, EntityId)>,
    pub scores: Vec<(Span, EntityId, f64)>,
}

impl IdentificationResult {
    pub fn chosen_entity(&self) -> Option<&EntityId> {
        self.chosen.as_ref().map(|(_, e)| e)
    }
}

fn question_entity_set(linked_q: &LinkedUtterance) -> BTreeSet<&EntityId> {
    linked_q.links.iter().map(|(_, e)| e).collect()
}

// Shared selection skeleton: score the surviving occurrences, pick the
// best-scoring one, ties going to the earliest occurrence.
fn select<F>(linked_q: &LinkedUtterance, linked_a: &LinkedUtterance, keep_in_question: bool, score: F) -> IdentificationResult
where
    F: Fn(&Span, &EntityId) -> f64,
{
    let question_ids = question_entity_set(linked_q);
    let mut scores = Vec::with_capacity(linked_a.links.len());
    let mut chosen: Option<(Span, EntityId, f64)> = None;
    for (span, entity) in &linked_a.links {
        let survives = question_ids.contains(entity) == keep_in_question;
        let s = if survives { score(span, entity) } else { 0.0 };
        scores.push((*span, entity.clone(), s));
        if survives {
            let better = match &chosen {
                None => true,
                Some((_, _, best)) => s > *best,
            };
            if better {
                chosen = Some((*span, entity.clone(), s));
            }
        }
    }
    IdentificationResult {
        chosen: chosen.map(|(span, e, _)| (span, e)),
        scores,
    }
}

/// Removes the question's entities from the answer's entities and picks the
/// most popular survivor (ties by first occurrence).
pub fn basic_cancellation(
    linked_q: &LinkedUtterance,
    linked_a: &LinkedUtterance,
    kb: &KnowledgeBase,
) -> IdentificationResult {
    select(linked_q, linked_a, false, |_, e| {
        kb.popularity_or_zero(e) as f64
    })
}

/// True iff the token "or" occurs with an entity-linked span entirely before
/// it and another entirely after it.
pub fn detect_enumeration(linked_q: &LinkedUtterance) -> bool {
    let tokens = linked_q.utterance.tokens();
    tokens.iter().enumerate().any(|(t, tok)| {
        tok == "or"
            && linked_q.links.iter().any(|(span, _)| span.end <= t)
            && linked_q.links.iter().any(|(span, _)| span.start > t)
    })
}

/// Like [`basic_cancellation`], but on enumeration questions the context
/// entities are intersected with the answer's entities instead of
/// subtracted.
pub fn cancellation_with_enumeration(
    linked_q: &LinkedUtterance,
    linked_a: &LinkedUtterance,
    kb: &KnowledgeBase,
) -> IdentificationResult {
    let keep = detect_enumeration(linked_q);
    select(linked_q, linked_a, keep, |_, e| {
        kb.popularity_or_zero(e) as f64
    })
}

/// Counts context patterns over linked training pairs. Pairs whose gold
/// entity is not among the answer's links are skipped; the second return
/// value reports how many were.
pub fn train_ngram_priors(
    pairs: &[(LinkedUtterance, LinkedUtterance, EntityId)],
    order: usize,
    smoothing_alpha: f64,
) -> Result<(NgramPriorTable, usize)> {
    let mut table = NgramPriorTable::new(order, smoothing_alpha)?;
    let mut skipped = 0usize;
    for (_, linked_a, gold) in pairs {
        if !linked_a.contains_entity(gold) {
            skipped += 1;
            continue;
        }
        for (span, entity) in &linked_a.links {
            let pattern = context_pattern(&linked_a.utterance, *span, order);
            table.record(&pattern, entity == gold);
        }
    }
    Ok((table, skipped))
}

/// Cancellation (enumeration-aware) where each surviving occurrence scores
/// popularity times the prior of its context pattern.
pub fn cancellation_with_priors(
    linked_q: &LinkedUtterance,
    linked_a: &LinkedUtterance,
    kb: &KnowledgeBase,
    priors: &NgramPriorTable,
) -> IdentificationResult {
    let keep = detect_enumeration(linked_q);
    select(linked_q, linked_a, keep, |span, e| {
        let pattern = context_pattern(&linked_a.utterance, *span, priors.order());
        kb.popularity_or_zero(e) as f64 * priors.prior(&pattern)
    })
}
