//! Tuple sampling, Adam, the step learning-rate schedule, hard-sample
//! mining and the training loop.

mod adam;
mod sampler;

pub use adam::{adam_step, AdamState};
pub use sampler::{SampledTuple, TupleSampler};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::model::{
    Direction, ModelParams, Objective, DEFAULT_CONTRASTIVE_MARGIN, DEFAULT_EMBED_DIM,
    DEFAULT_HIDDEN_DIM,
};
use crate::numerics::Rng;

/// Training hyperparameters. Defaults are the full-scale schedule
/// (240k iterations, decay ×0.1 every 80k, mining from 120k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub hard_mining_start: usize,
    pub hard_mining_pool: usize,
    pub hard_mining_keep: usize,
    pub direction: Direction,
    pub objective: Objective,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub margin: f32,
    /// Scale every feature vector to unit L2 norm before training.
    pub normalize_features: bool,
    pub seed: u64,
    /// Emit a checkpoint every this many iterations; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 240_000,
            batch_size: 8,
            lr: 1e-3,
            lr_decay_factor: 0.1,
            lr_decay_every: 80_000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            hard_mining_start: 120_000,
            hard_mining_pool: 16,
            hard_mining_keep: 8,
            direction: Direction::V2F,
            objective: Objective::Triplet,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            embed_dim: DEFAULT_EMBED_DIM,
            margin: DEFAULT_CONTRASTIVE_MARGIN,
            normalize_features: false,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    /// The shipped desk-scale schedule: 2000 iterations, decay every 800,
    /// mining from 1000.
    pub fn desk() -> Self {
        Self {
            iterations: 2000,
            lr_decay_every: 800,
            hard_mining_start: 1000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if self.hard_mining_keep == 0 || self.hard_mining_keep > self.hard_mining_pool {
            return fail("hard_mining_keep must lie in 1..=hard_mining_pool");
        }
        if self.hard_mining_keep != self.batch_size {
            return fail("hard_mining_keep must equal batch_size");
        }
        if !(self.lr > 0.0) || !(self.lr_decay_factor > 0.0) || self.lr_decay_every == 0 {
            return fail("learning-rate schedule must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("Adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return fail("epsilon must be positive");
        }
        if !(self.margin > 0.0) {
            return fail("contrastive margin must be positive");
        }
        Ok(())
    }
}

/// Step schedule: `lr · decay^⌊iteration / decay_every⌋`.
pub fn lr_at(config: &TrainConfig, iteration: usize) -> f64 {
    let steps = (iteration / config.lr_decay_every) as i32;
    config.lr * config.lr_decay_factor.powi(steps)
}

/// Indices of the `keep` largest losses, ties broken by draw order, returned
/// in draw order.
pub fn select_hardest(losses: &[f32], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    order.truncate(keep);
    order.sort_unstable();
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iteration: usize,
    pub lr: f64,
    pub loss: f32,
    pub mining: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
    /// Tuples whose positive fell back to the anchor's own clip.
    pub positive_fallbacks: usize,
}

impl TrainLog {
    pub fn mean_loss(&self, range: std::ops::Range<usize>) -> f32 {
        let slice = &self.records[range];
        slice.iter().map(|r| r.loss).sum::<f32>() / slice.len() as f32
    }

    /// One JSON object per line.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(fs::File::create(path)?);
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn train(
    dataset: &Dataset,
    split: &SplitSpec,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainLog)> {
    train_with_checkpoints(dataset, split, config, |_, _| Ok(()))
}

/// Runs the full loop. `on_checkpoint(iterations_done, params)` is called
/// every `checkpoint_every` iterations.
pub fn train_with_checkpoints(
    dataset: &Dataset,
    split: &SplitSpec,
    config: &TrainConfig,
    mut on_checkpoint: impl FnMut(usize, &ModelParams) -> Result<()>,
) -> Result<(ModelParams, TrainLog)> {
    config.validate()?;
    let normalized;
    let dataset = if config.normalize_features {
        normalized = dataset.l2_normalized();
        &normalized
    } else {
        dataset
    };
    let mut rng = Rng::new(config.seed);
    let init_seed = rng.next_u64();
    let mut params = ModelParams::init(
        dataset.feature_dim(),
        config.hidden_dim,
        config.embed_dim,
        config.objective,
        config.direction,
        init_seed,
    )?;
    let mut log = TrainLog::default();
    if config.iterations == 0 {
        return Ok((params, log));
    }
    let mut sampler = TupleSampler::new(dataset, &split.train_set(), config.direction)?;
    let mut adam = AdamState::new(&params, config.beta1, config.beta2, config.epsilon);
    let mut grads = params.zeros_like();
    let mut pool = Vec::with_capacity(config.hard_mining_pool);

    for iteration in 0..config.iterations {
        let lr = lr_at(config, iteration);
        let mining = iteration >= config.hard_mining_start;
        let draw = if mining {
            config.hard_mining_pool
        } else {
            config.batch_size
        };
        pool.clear();
        for _ in 0..draw {
            pool.push(sampler.sample(&mut rng)?);
        }
        let kept: Vec<SampledTuple> = if mining {
            let losses = pool
                .iter()
                .map(|t| params.tuple_loss(&sampler.resolve(t)?, config.margin))
                .collect::<Result<Vec<f32>>>()?;
            select_hardest(&losses, config.hard_mining_keep)
                .into_iter()
                .map(|i| pool[i])
                .collect()
        } else {
            pool.clone()
        };

        for (_, block) in grads.blocks_mut() {
            block.fill(0.0);
        }
        let scale = 1.0 / kept.len() as f32;
        let mut loss_sum = 0.0f32;
        for t in &kept {
            loss_sum +=
                params.tuple_backward(&sampler.resolve(t)?, config.margin, scale, &mut grads)?;
        }
        adam_step(&mut params, &grads, &mut adam, lr)?;
        log.records.push(LogRecord {
            iteration,
            lr,
            loss: loss_sum * scale,
            mining,
        });
        if config.checkpoint_every > 0 && (iteration + 1) % config.checkpoint_every == 0 {
            on_checkpoint(iteration + 1, &params)?;
        }
    }
    log.positive_fallbacks = sampler.fallbacks();
    Ok((params, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lr_schedule_points() {
        let c = TrainConfig::default();
        let close = |a: f64, b: f64| ((a - b) / b).abs() < 1e-12;
        assert!(close(lr_at(&c, 0), 1e-3));
        assert!(close(lr_at(&c, 79_999), 1e-3));
        assert!(close(lr_at(&c, 80_000), 1e-4));
        assert!(close(lr_at(&c, 160_000), 1e-5));
        assert!(close(lr_at(&c, 239_999), 1e-5));
    }

    #[test]
    fn lr_is_piecewise_constant_and_nonincreasing() {
        let c = TrainConfig::default();
        let mut prev = lr_at(&c, 0);
        for it in 1..c.iterations {
            let lr = lr_at(&c, it);
            assert!(lr <= prev);
            if lr != prev {
                assert_eq!(it % 80_000, 0, "break at {it}");
            }
            prev = lr;
        }
    }

    #[test]
    fn hardest_selection() {
        let losses: Vec<f32> = (0..16).map(|i| ((i * 7) % 16) as f32).collect();
        let kept = select_hardest(&losses, 8);
        assert_eq!(kept.len(), 8);
        let mut picked: Vec<f32> = kept.iter().map(|&i| losses[i]).collect();
        picked.sort_by(f32::total_cmp);
        assert_eq!(picked, (8..16).map(|v| v as f32).collect::<Vec<_>>());

        // Ties: earlier draws win.
        assert_eq!(select_hardest(&[1.0, 2.0, 2.0, 2.0], 2), vec![1, 2]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            hard_mining_keep: 17,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            batch_size: 4,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            lr_decay_every: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
