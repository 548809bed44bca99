use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainingConfig;
use crate::data::EncodedPair;
use crate::error::{Error, Result};
use crate::model::SeqToSeqParams;
use crate::numerics::{adam_step, AdamState, Real, Tape};

/// Batches per bucketing window.
const BUCKET_WINDOW: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub losses: Vec<f64>,
    pub final_loss: f64,
    pub steps: usize,
    pub wall_clock_seconds: f64,
    pub config: TrainingConfig,
    pub checkpoint: Option<String>,
    pub examples: usize,
    pub truncated_sources: usize,
    pub truncated_targets: usize,
}

impl TrainingReport {
    /// First 1-based step whose loss is below `threshold`.
    pub fn steps_to_reach(&self, threshold: f64) -> Option<usize> {
        self.losses.iter().position(|&l| l < threshold).map(|i| i + 1)
    }
}

/// Mean teacher-forced loss of `batch` and its gradient for every
/// parameter tensor, in store order.
pub fn batch_gradients<T: Real>(params: &SeqToSeqParams<T>, batch: &[&EncodedPair]) -> Result<(f64, Vec<Vec<T>>)> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, true);
    let src: Vec<&[u32]> = batch.iter().map(|p| p.src.as_slice()).collect();
    let tgt: Vec<&[u32]> = batch.iter().map(|p| p.tgt.as_slice()).collect();
    let loss = params.loss(&mut tape, &bound, &src, &tgt)?;
    let value = tape.value(loss).data()[0].as_f64();
    let mut grads = tape.backward(loss)?;
    let out = bound
        .vars()
        .iter()
        .zip(params.iter())
        .map(|(&v, (_, t))| grads.take(v).unwrap_or_else(|| vec![T::zero(); t.len()]))
        .collect();
    Ok((value, out))
}

/// Scales `grads` so their joint L2 norm is at most `max_norm`. Returns the
/// norm before scaling.
pub fn clip_global_norm<T: Real>(grads: &mut [Vec<T>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flatten()
        .map(|g| g.as_f64() * g.as_f64())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = T::lit(max_norm / norm);
        for g in grads.iter_mut().flatten() {
            *g *= s;
        }
    }
    norm
}

/// Example indices for one epoch, grouped into batches. The order is a
/// permutation seeded by `seed + epoch`; with bucketing, each window of a
/// few batches is sorted by source length before it is cut.
pub fn epoch_batches(src_lens: &[usize], batch_size: usize, seed: u64, epoch: u64, bucketing: bool) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..src_lens.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(epoch)));
    if bucketing {
        for window in order.chunks_mut(batch_size * BUCKET_WINDOW) {
            window.sort_by_key(|&i| src_lens[i]);
        }
    }
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Adam state and step counter for one run.
pub struct Trainer {
    config: TrainingConfig,
    states: Vec<AdamState<f32>>,
    step: usize,
}

impl Trainer {
    pub fn new(params: &SeqToSeqParams<f32>, config: &TrainingConfig) -> Result<Self> {
        config.validate()?;
        Ok(Trainer {
            config: config.clone(),
            states: params
                .iter()
                .map(|(_, t)| AdamState::new(t.len(), config.learning_rate))
                .collect(),
            step: 0,
        })
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    /// One clipped Adam update on `batch`; returns the loss before it.
    pub fn step(&mut self, params: &mut SeqToSeqParams<f32>, batch: &[&EncodedPair]) -> Result<f64> {
        let (loss, mut grads) = batch_gradients(params, batch)?;
        if !loss.is_finite() {
            return Err(Error::invalid(format!("non-finite loss at step {}", self.step)));
        }
        clip_global_norm(&mut grads, self.config.clip_norm);
        let lr = self.config.learning_rate_at(self.step);
        for (id, (state, g)) in self.states.iter_mut().zip(&grads).enumerate() {
            state.learning_rate = lr;
            adam_step(params.tensor_mut(id).data_mut(), g, state)?;
        }
        self.step += 1;
        Ok(loss)
    }
}

/// Runs `config.max_steps` optimizer steps over `data`, reshuffling at
/// every epoch boundary.
pub fn train(params: &mut SeqToSeqParams<f32>, data: &[EncodedPair], config: &TrainingConfig) -> Result<TrainingReport> {
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let started = Instant::now();
    let mut trainer = Trainer::new(params, config)?;
    let src_lens: Vec<usize> = data.iter().map(|p| p.src.len()).collect();
    let truncated_sources = data.iter().filter(|p| p.src_truncated).count();
    let truncated_targets = data.iter().filter(|p| p.tgt_truncated).count();
    if truncated_sources + truncated_targets > 0 {
        log::info!("{truncated_sources} sources and {truncated_targets} targets were truncated");
    }
    let log_every = (config.max_steps / 20).max(1);
    let mut losses = Vec::with_capacity(config.max_steps);
    let mut epoch = 0u64;
    'outer: loop {
        for idx in epoch_batches(&src_lens, config.batch_size, config.seed, epoch, config.bucketing) {
            let batch: Vec<&EncodedPair> = idx.iter().map(|&i| &data[i]).collect();
            let loss = trainer.step(params, &batch)?;
            losses.push(loss);
            if losses.len() % log_every == 0 {
                log::info!("step {} loss {loss:.4}", losses.len());
            }
            if losses.len() == config.max_steps {
                break 'outer;
            }
        }
        epoch += 1;
    }
    if !params.all_finite() {
        return Err(Error::invalid("parameters became non-finite during training"));
    }
    Ok(TrainingReport {
        final_loss: *losses.last().expect("at least one step"),
        steps: losses.len(),
        losses,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        config: config.clone(),
        checkpoint: None,
        examples: data.len(),
        truncated_sources,
        truncated_targets,
    })
}
