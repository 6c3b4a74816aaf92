//! Training by backpropagation through the unrolled automaton.
//!
//! Each iteration samples a batch of shapes with replacement, one rollout
//! length shared by the batch, and independent per-cell update masks that
//! drop a fraction of updates at every step. Per-element gradients are
//! averaged in batch order and applied with one Adam step.

mod adam;
mod backprop;

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use adam::{adam_step, adam_step_params, AdamConfig, AdamMoments};
pub use backprop::{gradients, loss, rollout_with_tape, Tape};

use crate::error::{Error, Result};
use crate::nca::{init_grid, Lattice, Nca};
use crate::params::{init_params, ModelParams, ParamGrads};
use crate::shape::ShapeGrid;

/// Synchronous steps used when scoring a trained model.
pub const EVAL_STEPS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub t_min: usize,
    pub t_max: usize,
    /// Probability that a single cell update is dropped at a step.
    pub drop_rate: f64,
    pub adam: AdamConfig,
    pub rng_seed: u64,
    /// Rescale the batch gradient to at most this global norm.
    pub clip_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2500,
            batch_size: 128,
            t_min: 9,
            t_max: 29,
            drop_rate: 0.5,
            adam: AdamConfig::default(),
            rng_seed: 1,
            clip_grad_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Validity("batch_size must be positive".into()));
        }
        if self.t_min == 0 || self.t_min > self.t_max {
            return Err(Error::Validity(format!(
                "need 1 <= t_min <= t_max, got {}..={}",
                self.t_min, self.t_max
            )));
        }
        if !(0.0..=1.0).contains(&self.drop_rate) {
            return Err(Error::Validity(format!(
                "drop_rate {} outside [0, 1]",
                self.drop_rate
            )));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Batch-mean loss.
    pub loss: f64,
    pub steps: usize,
}

impl fmt::Display for IterationLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "iter={} loss={} T={}", self.iteration, self.loss, self.steps)
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub losses: Vec<f64>,
    pub steps: Vec<usize>,
    /// `(label, fraction of cells predicting it)` after [`EVAL_STEPS`] synchronous steps.
    pub accuracy: Vec<(u8, f64)>,
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// Shapes whose every cell predicts the label after evaluation.
    pub fn shapes_classified(&self) -> usize {
        self.accuracy.iter().filter(|(_, a)| *a == 1.0).count()
    }
}

impl fmt::Display for TrainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.losses.last().copied().unwrap_or(f64::NAN);
        writeln!(
            f,
            "iterations={} final_loss={} wall_time={:.1}s",
            self.losses.len(),
            last,
            self.wall_time_secs
        )?;
        for (label, acc) in &self.accuracy {
            writeln!(f, "shape {label}: cell accuracy {acc:.3}")?;
        }
        write!(
            f,
            "classified {}/{} shapes after {} synchronous steps",
            self.shapes_classified(),
            self.accuracy.len(),
            EVAL_STEPS
        )
    }
}

/// Trains from [`init_params`] of the configured seed.
pub fn train(config: &TrainConfig, shapes: &[ShapeGrid]) -> Result<(ModelParams, TrainReport)> {
    train_with_log(config, shapes, |_| {})
}

/// Like [`train`], calling `log` once per iteration.
pub fn train_with_log(
    config: &TrainConfig,
    shapes: &[ShapeGrid],
    log: impl FnMut(&IterationLog),
) -> Result<(ModelParams, TrainReport)> {
    train_from(config, shapes, init_params(config.rng_seed), log)
}

/// Trains starting from `initial` instead of [`init_params`].
///
/// Diagonal taps of `initial` are zeroed first.
pub fn train_from(
    config: &TrainConfig,
    shapes: &[ShapeGrid],
    mut initial: ModelParams,
    mut log: impl FnMut(&IterationLog),
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    if shapes.is_empty() {
        return Err(Error::Validity("training needs at least one shape".into()));
    }
    let started = Instant::now();
    initial.zero_corners();
    let mut master = initial.to_f64();
    let mut moments = AdamMoments::for_params();
    let lattices: Vec<Lattice> = shapes.iter().map(Lattice::new).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    // Keep the sampling stream apart from the one used for initial weights.
    rng.set_stream(1);

    let mut losses = Vec::with_capacity(config.iterations);
    let mut steps_log = Vec::with_capacity(config.iterations);
    for iteration in 1..=config.iterations {
        let picks: Vec<usize> = (0..config.batch_size)
            .map(|_| rng.random_range(0..shapes.len()))
            .collect();
        let steps = rng.random_range(config.t_min..=config.t_max);
        let mask_seeds: Vec<u64> = (0..config.batch_size).map(|_| rng.random()).collect();

        let nca = Nca::new(&master);
        let results: Vec<(f64, ParamGrads)> = picks
            .par_iter()
            .zip(mask_seeds.par_iter())
            .map(|(&pick, &seed)| {
                let masks = sample_masks(lattices[pick].len(), steps, config.drop_rate, seed);
                let tape = rollout_with_tape(&nca, &shapes[pick], &masks);
                let label = shapes[pick].label();
                (tape.loss(label), gradients(&tape, label))
            })
            .collect();

        let mut batch_loss = 0.0;
        let mut grad = ParamGrads::zeros();
        for (l, g) in &results {
            batch_loss += l;
            grad.add_assign(g);
        }
        let scale = 1.0 / config.batch_size as f64;
        batch_loss *= scale;
        grad.scale(scale);

        if !batch_loss.is_finite() || !grad.is_finite() {
            return Err(Error::Diverged {
                iteration,
                loss: batch_loss,
            });
        }
        if let Some(max_norm) = config.clip_grad_norm {
            let norm = grad.norm();
            if norm > max_norm {
                grad.scale(max_norm / norm);
            }
        }
        adam_step_params(&mut master, &grad, &mut moments, &config.adam, iteration as u64);

        let entry = IterationLog {
            iteration,
            loss: batch_loss,
            steps,
        };
        log(&entry);
        losses.push(batch_loss);
        steps_log.push(steps);
    }

    let params = if config.iterations == 0 {
        initial
    } else {
        master.to_model()
    };
    let accuracy = evaluate_accuracy(&Nca::new(&params), shapes, EVAL_STEPS);
    let report = TrainReport {
        losses,
        steps: steps_log,
        accuracy,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok((params, report))
}

/// Bernoulli keep-masks, `steps × cells`, keeping each update with probability `1 - drop_rate`.
pub fn sample_masks(cells: usize, steps: usize, drop_rate: f64, seed: u64) -> Vec<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| {
            (0..cells)
                .map(|_| rng.random::<f64>() >= drop_rate)
                .collect()
        })
        .collect()
}

/// Fraction of each shape's cells predicting its label after `steps` full synchronous steps.
pub fn evaluate_accuracy(nca: &Nca, shapes: &[ShapeGrid], steps: usize) -> Vec<(u8, f64)> {
    shapes
        .iter()
        .map(|shape| {
            let grid = nca.run_sync(&init_grid(shape), steps);
            let preds = grid.predictions();
            let hits = preds.iter().filter(|&&p| p == shape.label()).count();
            (shape.label(), hits as f64 / preds.len() as f64)
        })
        .collect()
}
