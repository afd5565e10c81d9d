//! Token vocabulary shared by encoding and the model.
//!
//! Words and entity ids live in one dense index space; entities are single
//! tokens regardless of how many words their mention spans. Four indices are
//! reserved up front (UNK, PAD, and the NULL/ZERO positional symbols).

use std::collections::BTreeMap;

use crate::kb::EntityId;
use crate::linker::LinkedUtterance;

/// A sequence element: either a plain word or a collapsed entity mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    Word(String),
    Entity(EntityId),
}

pub const UNK_INDEX: usize = 0;
pub const PAD_INDEX: usize = 1;
pub const NULL_INDEX: usize = 2;
pub const ZERO_INDEX: usize = 3;
pub const RESERVED_INDICES: usize = 4;

/// Frozen token-to-index maps plus the positional-feature width `P`
/// (the maximum question-entity count seen at build time).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: BTreeMap<String, usize>,
    entities: BTreeMap<String, usize>,
    size: usize,
    question_positions: usize,
}

impl Vocabulary {
    /// Builds the vocabulary from linked training pairs, in first-occurrence
    /// order so identical data always yields identical indices.
    pub fn build<'a, I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (&'a LinkedUtterance, &'a LinkedUtterance)>,
    {
        let mut vocab = Vocabulary {
            words: BTreeMap::new(),
            entities: BTreeMap::new(),
            size: RESERVED_INDICES,
            question_positions: 0,
        };
        for (linked_q, linked_a) in pairs {
            vocab.question_positions = vocab.question_positions.max(linked_q.links.len());
            for utt in [linked_q, linked_a] {
                for token in collapse_tokens(utt) {
                    vocab.intern(&token);
                }
            }
        }
        vocab
    }

    fn intern(&mut self, token: &Token) {
        let (map, key) = match token {
            Token::Word(w) => (&mut self.words, w.clone()),
            Token::Entity(e) => (&mut self.entities, e.to_string()),
        };
        if let std::collections::btree_map::Entry::Vacant(slot) = map.entry(key) {
            slot.insert(self.size);
            self.size += 1;
        }
    }

    /// Dense index for a token; out-of-vocabulary tokens map to UNK.
    pub fn index(&self, token: &Token) -> usize {
        match token {
            Token::Word(w) => self.words.get(w).copied().unwrap_or(UNK_INDEX),
            Token::Entity(e) => self.entities.get(e.as_str()).copied().unwrap_or(UNK_INDEX),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Width `P` of the question-position one-hot block.
    pub fn question_positions(&self) -> usize {
        self.question_positions
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, usize)> {
        self.words.iter().map(|(w, i)| (w.as_str(), *i))
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = (&str, usize)> {
        self.entities.iter().map(|(e, i)| (e.as_str(), *i))
    }

    /// Rebuilds a vocabulary from explicit index maps (checkpoint loading).
    pub fn from_parts(
        words: Vec<(String, usize)>,
        entities: Vec<(String, usize)>,
        question_positions: usize,
    ) -> Self {
        let size = RESERVED_INDICES
            + words.len()
            + entities.len();
        Vocabulary {
            words: words.into_iter().collect(),
            entities: entities.into_iter().collect(),
            size,
            question_positions,
        }
    }
}

/// Collapses a linked utterance to a token sequence: each linked span
/// becomes a single entity token, every other token stays a word.
pub fn collapse_tokens(linked: &LinkedUtterance) -> Vec<Token> {
    let tokens = linked.utterance.tokens();
    let mut out = Vec::with_capacity(tokens.len());
    let mut links = linked.links.iter().peekable();
    let mut t = 0;
    while t < tokens.len() {
        if let Some((span, entity)) = links.peek() {
            if span.start == t {
                out.push(Token::Entity(entity.clone()));
                t = span.end;
                links.next();
                continue;
            }
        }
        out.push(Token::Word(tokens[t].clone()));
        t += 1;
    }
    out
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

    #[test]
    fn collapse_replaces_spans_with_single_tokens() {
        let lu = linked(
            "Scooter Libby wrote a novel called The Apprentice",
            &[(0, 2, "libby"), (6, 8, "novel")],
        );
        let tokens = collapse_tokens(&lu);
        assert_eq!(tokens.len(), 6);
        assert_eq!(tokens[0], Token::Entity(EntityId::new("libby")));
        assert_eq!(tokens[1], Token::Word("wrote".into()));
        assert_eq!(tokens[5], Token::Entity(EntityId::new("novel")));
    }

    #[test]
    fn vocabulary_indices_are_dense_and_stable() {
        let q = linked("what did Scooter Libby write", &[(2, 4, "libby")]);
        let a = linked("he wrote the apprentice", &[(2, 4, "novel")]);
        let vocab = Vocabulary::build([(&q, &a)]);
        assert_eq!(vocab.question_positions(), 1);
        // 4 reserved + {what, did, write, he, wrote} + {libby, novel}
        assert_eq!(vocab.size(), 4 + 5 + 2);
        let w = Token::Word("what".into());
        assert!(vocab.index(&w) >= RESERVED_INDICES);
        assert_eq!(vocab.index(&w), vocab.index(&w));
        assert_eq!(vocab.index(&Token::Word("unseen".into())), UNK_INDEX);
        // an entity and a word with the same surface stay distinct
        let rebuilt = Vocabulary::from_parts(
            vocab.words().map(|(w, i)| (w.to_owned(), i)).collect(),
            vocab.entity_ids().map(|(e, i)| (e.to_owned(), i)).collect(),
            vocab.question_positions(),
        );
        assert_eq!(rebuilt, vocab);
    }

    #[test]
    fn entity_and_word_tokens_do_not_collide() {
        let q = linked("novel question", &[(0, 1, "novel")]);
        let a = linked("a novel thing", &[]);
        let vocab = Vocabulary::build([(&q, &a)]);
        let as_entity = vocab.index(&Token::Entity(EntityId::new("novel")));
        let as_word = vocab.index(&Token::Word("novel".into()));
        assert_ne!(as_entity, as_word);
        assert_ne!(as_word, UNK_INDEX);
    }
}
