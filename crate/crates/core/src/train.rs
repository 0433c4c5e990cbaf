//! Joint-MSE training with Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{preprocess_image, Corpus, DatasetError};
use crate::model::{HrModel, ModelError, PostInput};
use crate::stats::StatsError;
use crate::tensor::{Adam, AdamConfig, Tape, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("training diverged in epoch {epoch} (step {step}): loss is {loss}")]
    Divergence { epoch: usize, step: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            epochs: 50,
            batch_size: 64,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.batch_size == 0 {
            return Err(TrainError::Parameter(format!(
                "lr {} and batch_size {} must be positive",
                self.lr, self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: usize,
    pub loss: f64,
}

/// Model-ready posts in canonical (id-sorted) order with their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub ids: Vec<String>,
    pub inputs: Vec<PostInput>,
    pub targets: Vec<[f64; 3]>,
}

impl TrainingSet {
    pub fn from_corpus(model: &HrModel, corpus: &Corpus) -> Result<Self, TrainError> {
        let mut posts: Vec<_> = corpus.posts.iter().collect();
        posts.sort_by(|a, b| a.id.cmp(&b.id));
        let mut set = Self {
            ids: Vec::with_capacity(posts.len()),
            inputs: Vec::with_capacity(posts.len()),
            targets: Vec::with_capacity(posts.len()),
        };
        for post in posts {
            let image = match corpus.image_path(post) {
                Some(p) => Some(preprocess_image(&p, &model.config().encoder)?),
                None => None,
            };
            set.ids.push(post.id.clone());
            set.inputs.push(model.prepare(&post.text, image));
            set.targets.push(post.targets());
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

fn step_seed(seed: u64, step: usize) -> u64 {
    seed ^ (step as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Trains in place and returns the mean loss of every epoch. The loss is
/// the mean over the batch of the three per-attribute squared errors.
pub fn train(model: &mut HrModel, set: &TrainingSet, config: &TrainConfig) -> Result<Vec<LossPoint>, TrainError> {
    config.validate()?;
    if set.is_empty() {
        return Err(TrainError::Parameter("empty training set".into()));
    }
    let mut adam = Adam::new(
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
        model.params_mut().tensors_mut(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    let mut step = 0;

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<PostInput> = chunk.iter().map(|&i| set.inputs[i].clone()).collect();
            let target: Vec<f64> = chunk.iter().flat_map(|&i| set.targets[i]).collect();
            let (loss, grads) = {
                let mut tape = Tape::with_seed(step_seed(config.seed, step));
                let out = model.forward(&mut tape, &batch, true)?;
                let target = tape.constant(Tensor::new(vec![chunk.len(), 3], target)?);
                let loss = tape.mse_loss(out.attributes, target)?;
                (tape.value(loss).data()[0], tape.backward(loss)?)
            };
            if !loss.is_finite() {
                return Err(TrainError::Divergence { epoch, step, loss });
            }
            let params = model.params_mut();
            params.zero_grad();
            params.accumulate(&grads)?;
            adam.step(params.tensors_mut())?;
            total += loss * chunk.len() as f64;
            step += 1;
        }
        curve.push(LossPoint {
            epoch,
            loss: total / set.len() as f64,
        });
    }
    Ok(curve)
}
