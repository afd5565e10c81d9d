//! Neural denotation identification: sequence encoding, a from-scratch
//! bidirectional LSTM with position softmax, Adam, and the training loop.

mod adam;
mod encode;
mod model;
mod pretrained;
mod train;
mod vocab;

pub use adam::{AdamConfig, AdamState};
pub use encode::{encode_pair, EncodedSequence, PositionalFeature};
pub use model::{
    argmax_masked, cross_entropy, softmax, LstmCell, ModelConfig, NeuralModel, Params,
};
pub use pretrained::{load_pretrained, PretrainedTable};
pub use train::{argmax_accuracy, train, EpochStats, TrainOutcome, TrainingConfig};
pub use vocab::{
    collapse_tokens, Token, Vocabulary, NULL_INDEX, PAD_INDEX, RESERVED_INDICES, UNK_INDEX,
    ZERO_INDEX,
};
