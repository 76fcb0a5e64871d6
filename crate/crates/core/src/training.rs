//! Adam with mini-batches and early stopping on validation loss.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{model_by_name, Dataset, Trajectory};
use crate::networks::{accumulate_gradients, Arch, GradientSet, NetworkConfig, NetworkParams, Tape, Weights};
use crate::seed::{derive, stream};
use crate::{Error, Result};

/// A validation loss counts as an improvement only if it beats the best so far by this much.
pub const MIN_IMPROVEMENT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// Chunk length for truncated backpropagation; `None` backpropagates through whole sequences.
    pub truncation_window: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 10,
            max_epochs: 100,
            patience: 10,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-7,
            seed: 0,
            truncation_window: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, train_len: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.batch_size > train_len {
            return bad(format!("batch size must be in 1..={train_len}, got {}", self.batch_size));
        }
        if self.patience == 0 {
            return bad("patience must be >= 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || self.adam_eps <= 0.0 {
            return bad("Adam constants must satisfy 0 <= beta < 1 and eps > 0".into());
        }
        if self.truncation_window == Some(0) {
            return bad("truncation window must be >= 1".into());
        }
        Ok(())
    }
}

/// First and second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub first: GradientSet,
    pub second: GradientSet,
}

impl AdamMoments {
    pub fn new(like: &Weights) -> Self {
        AdamMoments {
            first: GradientSet::zeros_like(like),
            second: GradientSet::zeros_like(like),
        }
    }
}

/// One bias-corrected Adam step at step index `t` (starting from 1), in place.
pub fn adam_update(
    params: &mut Weights,
    grads: &GradientSet,
    moments: &mut AdamMoments,
    t: u64,
    cfg: &TrainConfig,
) -> Result<()> {
    if t == 0 {
        return Err(Error::InvalidConfig("Adam step index starts at 1".into()));
    }
    if !params.same_shape(grads) || !params.same_shape(&moments.first) || !params.same_shape(&moments.second) {
        return Err(Error::ShapeMismatch("Adam buffers do not match the parameters".into()));
    }
    if !grads.is_finite() {
        return Err(Error::DivergedTraining {
            epoch: 0,
            record: Box::default(),
        });
    }
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powf(t as f64);
    let c2 = 1.0 - b2.powf(t as f64);
    let lr = cfg.learning_rate;
    let eps = cfg.adam_eps;
    let [m1, m2, m3, m4, m5] = moments.first.arrays_mut();
    let [v1, v2, v3, v4, v5] = moments.second.arrays_mut();
    let slots = params.arrays_mut().into_iter().zip(grads.arrays()).zip([m1, m2, m3, m4, m5]).zip([v1, v2, v3, v4, v5]);
    for (((p, g), m), v) in slots {
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Patience-based stopping on a stream of validation losses.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            epoch: 0,
            stale: 0,
        }
    }

    /// Record the next epoch's loss; returns true when it is a new best.
    pub fn observe(&mut self, loss: f64) -> bool {
        self.epoch += 1;
        if loss < self.best - MIN_IMPROVEMENT {
            self.best = loss;
            self.best_epoch = self.epoch;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Wall-clock seconds since the start of training at the end of each epoch.
    pub elapsed: Vec<f64>,
    /// 1-based epoch with the lowest validation loss.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_epoch: usize,
    pub seconds: f64,
}

impl TrainRecord {
    pub fn epochs(&self) -> usize {
        self.val_loss.len()
    }

    /// First 1-based epoch whose validation loss is at or below `threshold`.
    pub fn first_epoch_below(&self, threshold: f64) -> Option<usize> {
        self.val_loss.iter().position(|&l| l <= threshold).map(|i| i + 1)
    }

    /// Equal up to the wall-clock fields.
    pub fn same_losses(&self, other: &TrainRecord) -> bool {
        self.train_loss == other.train_loss
            && self.val_loss == other.val_loss
            && self.best_epoch == other.best_epoch
            && self.best_val_loss == other.best_val_loss
            && self.stopped_epoch == other.stopped_epoch
    }
}

/// Progress for one finished epoch.
#[derive(Debug, Clone, Copy)]
pub struct EpochReport<'a> {
    /// Parameters at the end of the epoch.
    pub params: &'a NetworkParams,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub elapsed: f64,
    pub improved: bool,
}

/// Mean sequence loss of `params` over `set`.
pub fn mean_loss(params: &NetworkParams, set: &[Trajectory]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidConfig("cannot evaluate the loss of an empty split".into()));
    }
    let init = params.initial_state();
    let losses: Vec<f64> = set
        .par_iter()
        .map(|traj| Tape::record(params, &traj.measurements, &init)?.loss(traj.targets()))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / set.len() as f64)
}

/// Mean loss and mean gradient over a batch.
///
/// Per-sequence gradients are computed independently (possibly in parallel)
/// and summed in batch order, so the result does not depend on the thread count.
fn batch_gradient(
    params: &NetworkParams,
    batch: &[&Trajectory],
    window: Option<usize>,
) -> Result<(f64, GradientSet)> {
    let init = params.initial_state();
    let parts: Vec<(f64, GradientSet)> = batch
        .par_iter()
        .map(|traj| {
            let tape = Tape::record(params, &traj.measurements, &init)?;
            let mut g = GradientSet::zeros_like(&params.weights);
            let loss = accumulate_gradients(params, &tape, traj.targets(), window, &mut g)?;
            Ok((loss, g))
        })
        .collect::<Result<_>>()?;
    let mut iter = parts.into_iter();
    let (mut loss, mut total) = iter.next().expect("batch is non-empty");
    for (l, g) in iter {
        loss += l;
        total.axpy(1.0, &g);
    }
    let inv = 1.0 / batch.len() as f64;
    total.scale(inv);
    Ok((loss * inv, total))
}

pub fn train(dataset: &Dataset, init: NetworkParams, tcfg: &TrainConfig) -> Result<(NetworkParams, TrainRecord)> {
    train_with(dataset, init, tcfg, |_| Ok(()))
}

/// Train from `init` on `dataset.train`, stopping early on `dataset.val`.
///
/// Each epoch reshuffles the training sequences, takes one Adam step per
/// batch, then evaluates the validation loss. Returns the parameters of the
/// best validation epoch. An error from `observer` aborts training.
pub fn train_with<F>(
    dataset: &Dataset,
    init: NetworkParams,
    tcfg: &TrainConfig,
    mut observer: F,
) -> Result<(NetworkParams, TrainRecord)>
where
    F: FnMut(&EpochReport<'_>) -> Result<()>,
{
    tcfg.validate(dataset.train.len())?;
    if dataset.val.is_empty() {
        return Err(Error::InvalidConfig("validation split is empty".into()));
    }
    let cfg = &init.config;
    if cfg.m != dataset.system.m || cfg.n != dataset.system.n {
        return Err(Error::DimensionMismatch(format!(
            "network maps {} -> {}, dataset `{}` has m = {}, n = {}",
            cfg.m, cfg.n, dataset.system.name, dataset.system.m, dataset.system.n
        )));
    }
    let start = Instant::now();
    let mut params = init;
    let mut best = params.clone();
    let mut moments = AdamMoments::new(&params.weights);
    let mut stopper = EarlyStopping::new(tcfg.patience);
    let mut record = TrainRecord::default();
    let mut shuffle_rng = stream(tcfg.seed, 0);
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
    let mut step = 0u64;

    let diverged = |epoch: usize, record: &TrainRecord| Error::DivergedTraining {
        epoch,
        record: Box::new(record.clone()),
    };

    for epoch in 1..=tcfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(tcfg.batch_size) {
            let batch: Vec<&Trajectory> = chunk.iter().map(|&i| &dataset.train[i]).collect();
            let (loss, grads) = batch_gradient(&params, &batch, tcfg.truncation_window)?;
            if !loss.is_finite() {
                return Err(diverged(epoch, &record));
            }
            epoch_loss += loss * batch.len() as f64;
            step += 1;
            adam_update(&mut params.weights, &grads, &mut moments, step, tcfg).map_err(|e| match e {
                Error::DivergedTraining { .. } => diverged(epoch, &record),
                other => other,
            })?;
        }
        let train_loss = epoch_loss / dataset.train.len() as f64;
        let val_loss = mean_loss(&params, &dataset.val)?;
        if !val_loss.is_finite() {
            return Err(diverged(epoch, &record));
        }
        let improved = stopper.observe(val_loss);
        if improved {
            best = params.clone();
        }
        let elapsed = start.elapsed().as_secs_f64();
        record.train_loss.push(train_loss);
        record.val_loss.push(val_loss);
        record.elapsed.push(elapsed);
        record.best_epoch = stopper.best_epoch();
        record.best_val_loss = stopper.best();
        record.stopped_epoch = epoch;
        observer(&EpochReport {
            params: &params,
            epoch,
            train_loss,
            val_loss,
            elapsed,
            improved,
        })?;
        if stopper.should_stop() {
            break;
        }
    }
    record.seconds = start.elapsed().as_secs_f64();
    Ok((best, record))
}

/// Network and training settings for one architecture on one benchmark system.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

/// Published hyperparameters for `system` and `arch`, seeded from `seed`.
///
/// All systems use 50 hidden units. Simple recurrent networks reuse the
/// settings of their LSTM counterpart.
pub fn preset(system: &str, arch: Arch, seed: u64) -> Result<Preset> {
    let model = model_by_name(system)?;
    let jordan = arch.is_jordan();
    let (batch_size, patience, max_epochs, learning_rate) = match system {
        "springs" => (10, 50, 8000, 1e-3),
        "pendulum" => (20, 50, 3000, if jordan { 1e-3 } else { 1e-4 }),
        "vdp" => (20, 15, 3000, if jordan { 1e-2 } else { 1e-3 }),
        other => return Err(Error::UnknownSystem(other.to_string())),
    };
    let network = NetworkConfig::new(
        arch,
        model.m,
        model.n,
        NetworkConfig::DEFAULT_HIDDEN,
        derive(seed, &format!("{arch}/init")),
    )
    .with_initial_estimate(model.init_region.centroid().as_slice().to_vec());
    let train = TrainConfig {
        learning_rate,
        batch_size,
        max_epochs,
        patience,
        seed: derive(seed, &format!("{arch}/shuffle")),
        ..TrainConfig::default()
    };
    Ok(Preset { network, train })
}

/// Presets for the two LSTM estimators, Jordan first.
pub fn preset_configs(system: &str, seed: u64) -> Result<Vec<(Arch, Preset)>> {
    [Arch::Jlstm, Arch::Elstm]
        .into_iter()
        .map(|arch| Ok((arch, preset(system, arch, seed)?)))
        .collect()
}
