use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    argmax, forward_batch, loss_and_backward_flat, AdamState, Architecture, Gradients, Mode, NetworkParams, NetworkSpec,
};
use crate::mix_seed as mix;
use crate::oracle::Example;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub keep_prob: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Fraction of examples used for training; the rest is held out.
    pub split: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 200,
            epochs: 500,
            keep_prob: 0.7,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            split: 0.8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::invalid("keep probability must be in (0,1]"));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::invalid("split must be in (0,1)"));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0) {
            return Err(Error::invalid("invalid Adam constants"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Mean training-mode loss over the epoch's batches.
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best held-out accuracy (earliest on
    /// ties); the initialization when no epoch ran.
    pub params: NetworkParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

fn gather(examples: &[Example], idx: &[usize], out: &mut Vec<f64>, labels: &mut Vec<usize>) {
    out.clear();
    labels.clear();
    for &i in idx {
        out.extend(examples[i].grid.iter().map(|&p| p as f64));
        labels.push(examples[i].label as usize);
    }
}

/// Fraction of `idx` classified correctly in eval mode.
pub fn evaluate_accuracy(params: &NetworkParams, examples: &[Example], idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Ok(0.0);
    }
    let edge = examples[idx[0]].edge;
    let shape = [1, edge, edge, edge];
    let classes = params.classes();
    let (mut data, mut labels) = (Vec::new(), Vec::new());
    let mut correct = 0;
    for chunk in idx.chunks(64) {
        gather(examples, chunk, &mut data, &mut labels);
        let logits = forward_batch(params, &data, chunk.len(), shape, Mode::Eval)?;
        correct += logits.chunks(classes).zip(&labels).filter(|(row, &l)| argmax(row) == l).count();
    }
    Ok(correct as f64 / idx.len() as f64)
}

/// Seeded 80/20 split, shuffled mini-batch Adam, best-held-out selection.
pub fn train(
    examples: &[Example],
    classes: usize,
    arch: Architecture,
    cfg: &TrainConfig,
    mut sink: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if examples.len() < 2 {
        return Err(Error::invalid(format!("training needs >= 2 examples, got {}", examples.len())));
    }
    let edge = examples[0].edge;
    if let Some(e) = examples.iter().find(|e| e.edge != edge || e.grid.len() != edge * edge * edge) {
        return Err(Error::invalid(format!("example grids differ in size (object {}, run {})", e.object_id, e.run_id)));
    }
    if let Some(e) = examples.iter().find(|e| e.label as usize >= classes) {
        return Err(Error::invalid(format!("label {} out of range for {classes} classes", e.label)));
    }
    let spec = NetworkSpec::for_arch(arch, edge, classes, cfg.keep_prob)?;
    let params = NetworkParams::init(spec, cfg.seed)?;
    train_from(examples, params, cfg, &mut sink)
}

/// As [`train`], starting from given parameters.
pub fn train_from(
    examples: &[Example],
    mut params: NetworkParams,
    cfg: &TrainConfig,
    sink: &mut dyn FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    params.set_keep(cfg.keep_prob)?;
    let n = examples.len();
    if n < 2 {
        return Err(Error::invalid(format!("training needs >= 2 examples, got {n}")));
    }
    let edge = examples[0].edge;
    let shape = [1, edge, edge, edge];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_train = ((cfg.split * n as f64).round() as usize).clamp(1, n - 1);
    let test_indices = order.split_off(n_train);
    let train_indices = order;

    let mut state = AdamState::new(&params);
    let mut grads = Gradients::zeros_like(&params);
    let mut best = params.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_epoch = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    let (mut data, mut labels) = (Vec::new(), Vec::new());
    let mut epoch_order = train_indices.clone();
    for epoch in 1..=cfg.epochs {
        epoch_order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(cfg.seed, epoch as u64)));
        let mut loss_sum = 0.0;
        for (b, chunk) in epoch_order.chunks(cfg.batch_size).enumerate() {
            gather(examples, chunk, &mut data, &mut labels);
            let seed = mix(mix(cfg.seed, epoch as u64), b as u64 + 1);
            let loss = loss_and_backward_flat(&params, &data, shape, &labels, Mode::Train(seed), &mut grads)?;
            loss_sum += loss * chunk.len() as f64;
            super::adam_step(&mut params, &grads, &mut state, cfg)?;
        }
        let stats = EpochStats {
            epoch,
            train_acc: evaluate_accuracy(&params, examples, &train_indices)?,
            test_acc: evaluate_accuracy(&params, examples, &test_indices)?,
            loss: loss_sum / train_indices.len() as f64,
        };
        if stats.test_acc > best_acc {
            best_acc = stats.test_acc;
            best = params.clone();
            best_epoch = Some(epoch);
        }
        sink(&stats);
        history.push(stats);
    }
    Ok(TrainOutcome { params: best, history, best_epoch, train_indices, test_indices })
}
