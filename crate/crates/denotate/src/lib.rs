//! Denotation extraction from answer hints.
//!
//! A question-answering dialogue system can ask its users factual questions
//! and harvest the replies ("answer hints") for knowledge-base entities that
//! answer the question (the denotation). This crate implements that pipeline:
//!
//! 1. [`kb`] — an immutable triple store with a fuzzy surface index;
//! 2. [`linker`] — n-gram entity candidate generation and disambiguation,
//!    either by maximizing KB relations among the chosen entities or by
//!    entity popularity;
//! 3. [`rules`] — context-entity cancellation identifiers, with enumeration
//!    detection and context n-gram priors;
//! 4. [`neural`] — a bidirectional LSTM that scores every sequence position
//!    for being the denotation, trained from scratch with Adam;
//! 5. [`eval`] — linking / identification / extraction accuracy with
//!    binomial confidence intervals;
//! 6. [`data`] — dataset files and a synthetic dialogue generator for
//!    desk-scale experiments.

pub mod data;
pub mod error;
pub mod eval;
pub mod kb;
pub mod linker;
pub mod neural;
pub mod rules;
pub mod text;

pub use error::{Error, Result};
pub use kb::{Entity, EntityId, KnowledgeBase, Triple};
pub use text::Utterance;
