//! Minibatch Adam training on teacher-forced sequence losses.

mod checkpoint;
mod optimizer;

pub use checkpoint::{Checkpoint, MAGIC as CHECKPOINT_MAGIC, VERSION as CHECKPOINT_VERSION};
pub use optimizer::{clip_global_norm, Adam, AdamConfig};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::HpnetConfig;
use crate::data::Sequence;
use crate::error::{HpnetError, Result};
use crate::model::Network;
use crate::parallel::Executor;
use crate::params::ParamStore;

/// Losses above this abort training.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub adam: AdamConfig,
    /// Sequences per optimizer step.
    pub batch_size: usize,
    pub clip_norm: f64,
    /// Validation runs after every `validate_every` epochs (0 disables it).
    pub validate_every: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            adam: AdamConfig::default(),
            batch_size: 1,
            clip_norm: 10.0,
            validate_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    /// 0 is the evaluation of the starting parameters.
    pub epoch: usize,
    /// Mean sequence loss seen during the epoch.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub seconds: f64,
}

/// Loss and parameter gradients of one teacher-forced sequence.
pub fn sequence_gradient(
    config: &HpnetConfig,
    params: &ParamStore,
    sequence: &Sequence,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let blocks = sequence.blocks(config.block_depth, config.block_stride)?;
    let net = Network::new(config, params, true)?;
    let out = net.forward_sequence(&blocks)?;
    out.loss.backward()?;
    Ok((out.loss.item()?, net.gradients()))
}

/// Teacher-forced loss of one sequence, no gradients.
pub fn sequence_loss(config: &HpnetConfig, params: &ParamStore, sequence: &Sequence) -> Result<f64> {
    let blocks = sequence.blocks(config.block_depth, config.block_stride)?;
    let net = Network::new(config, params, false)?;
    Ok(net.forward_sequence(&blocks)?.loss.item()?)
}

/// Mean teacher-forced loss over `sequences`, reduced in index order.
pub fn evaluate(config: &HpnetConfig, params: &ParamStore, sequences: &[Sequence], executor: &Executor) -> Result<f64> {
    if sequences.is_empty() {
        return Err(HpnetError::contract("cannot evaluate an empty dataset"));
    }
    let losses = executor.map(sequences, |s| sequence_loss(config, params, s));
    let losses = losses.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / sequences.len() as f64)
}

/// Resumable training loop. The shuffle RNG, optimizer moments and epoch
/// counter are all part of a [`Checkpoint`], so stopping and resuming
/// reproduces an uninterrupted run bit for bit.
#[derive(Debug)]
pub struct Trainer {
    config: HpnetConfig,
    options: TrainOptions,
    params: ParamStore,
    optimizer: Adam,
    rng: ChaCha8Rng,
    epoch: usize,
    executor: Executor,
}

impl Trainer {
    /// Fresh parameters drawn from `seed`; the same seed then drives the
    /// per-epoch shuffles.
    pub fn new(config: HpnetConfig, options: TrainOptions, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ParamStore::init(&config, &mut rng);
        Self::with_params(config, options, params, rng)
    }

    pub fn with_params(
        config: HpnetConfig,
        options: TrainOptions,
        params: ParamStore,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        if options.batch_size == 0 {
            return Err(HpnetError::config("batch_size", "must be at least 1"));
        }
        let optimizer = Adam::new(options.adam, &params);
        Ok(Trainer {
            config,
            options,
            params,
            optimizer,
            rng,
            epoch: 0,
            executor: Executor::sequential(),
        })
    }

    /// Continues from `checkpoint`; optimizer hyperparameters come from the
    /// checkpoint, the rest of `options` from the caller.
    pub fn resume(checkpoint: Checkpoint, options: TrainOptions) -> Result<Self> {
        let mut t = Self::with_params(checkpoint.config, options, checkpoint.params, checkpoint.rng)?;
        t.options.adam = checkpoint.optimizer.config;
        t.optimizer = checkpoint.optimizer;
        t.epoch = checkpoint.epoch;
        Ok(t)
    }

    pub fn with_executor(mut self, executor: Executor) -> Self {
        self.executor = executor;
        self
    }

    pub fn config(&self) -> &HpnetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            params: self.params.clone(),
            optimizer: self.optimizer.clone(),
            rng: self.rng.clone(),
            epoch: self.epoch,
        }
    }

    fn validation(&self, val: &[Sequence], epoch: usize) -> Result<Option<f64>> {
        let every = self.options.validate_every;
        if val.is_empty() || every == 0 || !epoch.is_multiple_of(every) {
            return Ok(None);
        }
        evaluate(&self.config, &self.params, val, &self.executor).map(Some)
    }

    /// Record for the current parameters without training: the epoch-0 row
    /// of a history.
    pub fn baseline(&self, train: &[Sequence], val: &[Sequence]) -> Result<TrainRecord> {
        let start = Instant::now();
        let train_loss = evaluate(&self.config, &self.params, train, &self.executor)?;
        let val_loss = self.validation(val, 0)?;
        Ok(TrainRecord {
            epoch: self.epoch,
            train_loss,
            val_loss,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    /// One pass over `train` in a freshly shuffled order.
    pub fn train_epoch(&mut self, train: &[Sequence], val: &[Sequence]) -> Result<TrainRecord> {
        if train.is_empty() {
            return Err(HpnetError::contract("cannot train on an empty dataset"));
        }
        let start = Instant::now();
        let epoch = self.epoch + 1;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut losses = vec![0.0; train.len()];
        for batch in order.chunks(self.options.batch_size) {
            let (config, params) = (&self.config, &self.params);
            let results = self
                .executor
                .map(batch, |&i| sequence_gradient(config, params, &train[i]));
            let mut sum: Option<Vec<Vec<f64>>> = None;
            for (&i, r) in batch.iter().zip(results) {
                let (loss, grads) = r?;
                if !loss.is_finite() || loss > DIVERGENCE_LOSS {
                    return Err(HpnetError::Diverged { epoch, loss });
                }
                losses[i] = loss;
                match &mut sum {
                    None => sum = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            a.iter_mut().zip(g).for_each(|(a, g)| *a += g);
                        }
                    }
                }
            }
            let mut grads = sum.expect("batches are non-empty");
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().flatten().for_each(|g| *g *= scale);
            clip_global_norm(&mut grads, self.options.clip_norm);
            self.optimizer.step(&mut self.params, &mut grads)?;
        }
        self.epoch = epoch;
        // summed in dataset order so the figure matches `evaluate` at lr 0
        let train_loss = losses.iter().sum::<f64>() / train.len() as f64;
        let val_loss = self.validation(val, epoch)?;
        Ok(TrainRecord {
            epoch,
            train_loss,
            val_loss,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    /// Runs `epochs` more epochs; `on_epoch` sees every record as it is
    /// produced. Returns the history including the leading baseline.
    pub fn run(
        &mut self,
        train: &[Sequence],
        val: &[Sequence],
        epochs: usize,
        mut on_epoch: impl FnMut(&TrainRecord),
    ) -> Result<Vec<TrainRecord>> {
        let first = self.baseline(train, val)?;
        on_epoch(&first);
        let mut history = vec![first];
        for _ in 0..epochs {
            let rec = self.train_epoch(train, val)?;
            on_epoch(&rec);
            history.push(rec);
        }
        Ok(history)
    }
}
