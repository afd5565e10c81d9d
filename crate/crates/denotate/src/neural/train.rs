//! Training loop: per-example Adam updates over seeded shuffles, keeping the
//! parameter snapshot with the best validation accuracy.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::adam::AdamConfig;
use super::encode::EncodedSequence;
use super::model::{ModelConfig, NeuralModel, Params};
use super::pretrained::PretrainedTable;
use super::vocab::Vocabulary;

/// Training run settings. Adam stays at its standard defaults.
#[derive(Debug, Clone)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub model: ModelConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 50,
            seed: 0,
            adam: AdamConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

/// Accuracy after each epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

/// The trained model (best validation snapshot) plus the per-epoch log.
#[derive(Debug)]
pub struct TrainOutcome {
    pub model: NeuralModel,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// Fraction of sequences whose masked argmax equals their gold position.
/// Sequences without a gold position or without answer entities count as
/// incorrect.
pub fn argmax_accuracy(model: &NeuralModel, set: &[EncodedSequence]) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let correct = set
        .iter()
        .filter(|seq| match (seq.gold_position, model.predict(seq)) {
            (Some(gold), Ok(pred)) => gold == pred,
            _ => false,
        })
        .count();
    correct as f64 / set.len() as f64
}

/// Trains a fresh model for `config.epochs` epochs of per-example updates in
/// seeded shuffled order, evaluating validation accuracy after each epoch
/// and returning the best snapshot (earliest epoch on ties).
pub fn train(
    vocab: Vocabulary,
    pretrained: Option<PretrainedTable>,
    train_set: &[EncodedSequence],
    val_set: &[EncodedSequence],
    config: &TrainingConfig,
) -> Result<TrainOutcome> {
    if config.epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be >= 1".into()));
    }
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    for (i, seq) in train_set.iter().enumerate() {
        if seq.gold_position.is_none() {
            return Err(Error::InvalidArgument(format!(
                "training sequence {i} has no gold position"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = NeuralModel::init_with_rng(vocab, config.model, pretrained, &mut rng)?;

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Params)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for &i in &order {
            let seq = &train_set[i];
            let gold = seq.gold_position.expect("validated above");
            let (loss, grads) = model.backward(seq, gold)?;
            model.adam_step(&grads, &config.adam)?;
            loss_sum += loss;
        }
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: argmax_accuracy(&model, train_set),
            val_accuracy: argmax_accuracy(&model, val_set),
        };
        if best
            .as_ref()
            .map(|(acc, _, _)| stats.val_accuracy > *acc)
            .unwrap_or(true)
        {
            best = Some((stats.val_accuracy, epoch, model.params().clone()));
        }
        history.push(stats);
    }
    let (_, best_epoch, best_params) = best.expect("at least one epoch ran");
    model.set_params(best_params);
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}
