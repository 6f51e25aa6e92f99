//! Mini-batch Adam training on the masked empirical risk.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{AdamConfig, AdamState};
use super::model::{Gradients, Model, Variant};
use crate::error::{Error, Result};
use crate::subband::{AmpTensor3D, SignTensor3D};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub amp: AmpTensor3D,
    pub sign: SignTensor3D,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub depth: usize,
    pub variant: Variant,
}

impl TrainConfig {
    /// Small enough to finish in minutes on one core.
    pub fn desk() -> Self {
        Self {
            learning_rate: 2e-4,
            batch_size: 8,
            epochs: 200,
            seed: 0,
            depth: 2,
            variant: Variant::Subband,
        }
    }

    /// The full-scale schedule: batch 256 for 15,000 epochs. Not practical
    /// without a GPU.
    pub fn full_scale() -> Self {
        Self {
            learning_rate: 2e-4,
            batch_size: 256,
            epochs: 15_000,
            seed: 0,
            depth: 8,
            variant: Variant::Subband,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("batch size and epochs must be positive"));
        }
        if !(2..=8).contains(&self.depth) {
            return Err(Error::invalid(format!(
                "depth {} outside 2..=8",
                self.depth
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    /// Mean per-example loss of each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
}

pub fn train(dataset: &[TrainingExample], config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(dataset, config, |_, _| {})
}

/// Like [`train`], calling `on_epoch(epoch, loss)` after every epoch.
///
/// Batch members are differentiated in parallel on the current rayon pool;
/// their gradients are summed in batch order so results do not depend on
/// the thread count.
pub fn train_with<F: FnMut(usize, f64)>(
    dataset: &[TrainingExample],
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome> {
    config.validate()?;
    let first = dataset
        .first()
        .ok_or_else(|| Error::invalid("training set is empty"))?;
    if dataset
        .iter()
        .any(|ex| !ex.amp.same_shape(&first.amp) || !ex.sign.same_shape(&first.amp))
    {
        return Err(Error::invalid("training examples differ in shape"));
    }

    let mut model = Model::<f32>::new(config.variant, config.depth, config.seed)?;
    let mut adam = AdamState::new(&model);
    let adam_config = AdamConfig::with_learning_rate(config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let results = batch
                .par_iter()
                .map(|&i| model.loss_and_gradients(&dataset[i].amp, &dataset[i].sign))
                .collect::<Result<Vec<_>>>()?;
            let mut total = Gradients::zeros_like(&model);
            for (loss, g) in &results {
                loss_sum += loss;
                total.add_assign(g);
            }
            total.scale(1.0 / batch.len() as f32);
            adam.update(&mut model, &total, &adam_config);
        }
        let mean = loss_sum / dataset.len() as f64;
        epoch_losses.push(mean);
        on_epoch(epoch, mean);
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}
