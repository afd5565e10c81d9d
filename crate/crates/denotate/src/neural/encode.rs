//! Turns a linked question/answer pair into the model's input sequence.
//!
//! The sequence is the question's tokens followed by the answer's, with
//! every entity mention collapsed to a single token. Each position carries
//! a positional feature: answer entities get the 1-based index of the
//! matching question entity (or NULL when absent from the question), and
//! every other token gets ZERO.

use crate::error::{Error, Result};
use crate::kb::EntityId;
use crate::linker::LinkedUtterance;

use super::vocab::{collapse_tokens, Token, Vocabulary};

/// Positional feature of one sequence position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionalFeature {
    /// Answer entity equal to the k-th question entity (1-based, <= P).
    QuestionPos(usize),
    /// Answer entity absent from the question (or beyond position P).
    Null,
    /// Not an answer-hint entity.
    Zero,
}

impl PositionalFeature {
    /// Index into a one-hot block of width `P + 2`, laid out as
    /// `[pos 1, ..., pos P, NULL, ZERO]`.
    pub fn one_hot_index(&self, question_positions: usize) -> usize {
        match self {
            PositionalFeature::QuestionPos(k) => {
                debug_assert!(*k >= 1 && *k <= question_positions);
                k - 1
            }
            PositionalFeature::Null => question_positions,
            PositionalFeature::Zero => question_positions + 1,
        }
    }
}

/// A fully encoded input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    pub tokens: Vec<Token>,
    pub token_indices: Vec<usize>,
    pub positional: Vec<PositionalFeature>,
    pub answer_entity_mask: Vec<bool>,
    /// `(position, entity)` for every answer entity, in sequence order.
    pub answer_entities: Vec<(usize, EntityId)>,
    pub gold_position: Option<usize>,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn entity_at(&self, position: usize) -> Option<&EntityId> {
        self.answer_entities
            .iter()
            .find(|(p, _)| *p == position)
            .map(|(_, e)| e)
    }
}

/// Encodes a linked pair. With `gold` given, `gold_position` is the first
/// answer occurrence of that entity; a gold entity missing from the answer
/// links is an error (the pair cannot be used for training).
pub fn encode_pair(
    vocab: &Vocabulary,
    linked_q: &LinkedUtterance,
    linked_a: &LinkedUtterance,
    gold: Option<&EntityId>,
) -> Result<EncodedSequence> {
    let question_entities: Vec<EntityId> = linked_q.entity_ids();
    let p = vocab.question_positions();

    let q_tokens = collapse_tokens(linked_q);
    let a_tokens = collapse_tokens(linked_a);
    let offset = q_tokens.len();

    let mut tokens = q_tokens;
    tokens.extend(a_tokens.iter().cloned());

    let mut positional = vec![PositionalFeature::Zero; tokens.len()];
    let mut mask = vec![false; tokens.len()];
    let mut answer_entities = Vec::new();
    for (rel, token) in a_tokens.iter().enumerate() {
        if let Token::Entity(entity) = token {
            let pos = offset + rel;
            mask[pos] = true;
            answer_entities.push((pos, entity.clone()));
            let feature = question_entities
                .iter()
                .position(|q| q == entity)
                .map(|k| k + 1)
                .filter(|k| *k <= p)
                .map(PositionalFeature::QuestionPos)
                .unwrap_or(PositionalFeature::Null);
            positional[pos] = feature;
        }
    }

    let gold_position = match gold {
        None => None,
        Some(gold_id) => Some(
            answer_entities
                .iter()
                .find(|(_, e)| e == gold_id)
                .map(|(p, _)| *p)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "gold entity `{gold_id}` is not among the answer's links"
                    ))
                })?,
        ),
    };

    let token_indices = tokens.iter().map(|t| vocab.index(t)).collect();
    Ok(EncodedSequence {
        tokens,
        token_indices,
        positional,
        answer_entity_mask: mask,
        answer_entities,
        gold_position,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linker::Span;
    use crate::text::Utterance;

    fn linked(utt: &str, links: &[(usize, usize, &str)]) -> LinkedUtterance {
        LinkedUtterance {
            utterance: Utterance::new(utt),
            links: links
                .iter()
                .map(|(s, e, id)| (Span::new(*s, *e), EntityId::new(*id)))
                .collect(),
        }
    }

    // the running example: the answer repeats the question's first entity
    // and introduces a new one
    fn apprentice_pair() -> (LinkedUtterance, LinkedUtterance) {
        let q = linked("What did Scooter Libby write", &[(2, 4, "libby")]);
        let a = linked(
            "Scooter Libby wrote a novel called The Apprentice",
            &[(0, 2, "libby"), (6, 8, "novel")],
        );
        (q, a)
    }

    #[test]
    fn answer_entity_in_question_gets_its_position() {
        let (q, a) = apprentice_pair();
        let vocab = Vocabulary::build([(&q, &a)]);
        let seq = encode_pair(&vocab, &q, &a, None).unwrap();
        // question: [what, did, E(libby), write]; answer: [E(libby), wrote,
        // a, novel, called, E(novel)]
        assert_eq!(seq.len(), 10);
        assert_eq!(seq.positional[4], PositionalFeature::QuestionPos(1));
        assert_eq!(seq.positional[9], PositionalFeature::Null);
        // everything else is ZERO
        for (i, f) in seq.positional.iter().enumerate() {
            if i != 4 && i != 9 {
                assert_eq!(*f, PositionalFeature::Zero);
            }
        }
        assert!(seq.answer_entity_mask[4]);
        assert!(seq.answer_entity_mask[9]);
        assert_eq!(seq.answer_entity_mask.iter().filter(|m| **m).count(), 2);
    }

    #[test]
    fn exactly_answer_entities_have_non_zero_features() {
        let (q, a) = apprentice_pair();
        let vocab = Vocabulary::build([(&q, &a)]);
        let seq = encode_pair(&vocab, &q, &a, None).unwrap();
        for (i, f) in seq.positional.iter().enumerate() {
            assert_eq!(seq.answer_entity_mask[i], *f != PositionalFeature::Zero);
        }
    }

    #[test]
    fn sequence_without_entities_is_all_zero() {
        let q = linked("any words at all", &[]);
        let a = linked("more words follow", &[]);
        let vocab = Vocabulary::build([(&q, &a)]);
        let seq = encode_pair(&vocab, &q, &a, None).unwrap();
        assert!(seq.answer_entities.is_empty());
        assert!(seq.positional.iter().all(|f| *f == PositionalFeature::Zero));
        assert!(seq.answer_entity_mask.iter().all(|m| !m));
    }

    #[test]
    fn gold_position_is_first_answer_occurrence() {
        let q = linked("who said it", &[]);
        let a = linked(
            "paris then rome then paris",
            &[(0, 1, "paris"), (2, 3, "rome"), (4, 5, "paris")],
        );
        let vocab = Vocabulary::build([(&q, &a)]);
        let seq = encode_pair(&vocab, &q, &a, Some(&EntityId::new("paris"))).unwrap();
        assert_eq!(seq.gold_position, Some(3));
        assert!(seq.answer_entity_mask[seq.gold_position.unwrap()]);
    }

    #[test]
    fn gold_absent_from_answer_is_an_error() {
        let (q, a) = apprentice_pair();
        let vocab = Vocabulary::build([(&q, &a)]);
        let err = encode_pair(&vocab, &q, &a, Some(&EntityId::new("berlin"))).unwrap_err();
        assert!(err.to_string().contains("not among the answer's links"));
    }

    #[test]
    fn question_entity_beyond_p_clamps_to_null() {
        // vocabulary built from a pair with a single question entity => P = 1
        let (q0, a0) = apprentice_pair();
        let vocab = Vocabulary::build([(&q0, &a0)]);
        assert_eq!(vocab.question_positions(), 1);
        // at encode time the question has two entities; the second one's
        // answer occurrence exceeds P and falls back to NULL
        let q = linked("compare libby and novel", &[(1, 2, "libby"), (3, 4, "novel")]);
        let a = linked("libby novel", &[(0, 1, "libby"), (1, 2, "novel")]);
        let seq = encode_pair(&vocab, &q, &a, None).unwrap();
        // question collapses to [compare, E, and, E]; the answer entities sit
        // at positions 4 and 5
        assert_eq!(seq.positional[4], PositionalFeature::QuestionPos(1));
        assert_eq!(seq.positional[5], PositionalFeature::Null);
    }

    #[test]
    fn one_hot_layout_is_positions_then_null_then_zero() {
        assert_eq!(PositionalFeature::QuestionPos(1).one_hot_index(3), 0);
        assert_eq!(PositionalFeature::QuestionPos(3).one_hot_index(3), 2);
        assert_eq!(PositionalFeature::Null.one_hot_index(3), 3);
        assert_eq!(PositionalFeature::Zero.one_hot_index(3), 4);
    }
}
