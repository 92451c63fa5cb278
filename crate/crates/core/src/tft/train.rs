//! Training loop with gradient clipping and early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::Mode;
use super::model::{InputSchema, TftHyperParams, TftModel};
use super::params::Adam;
use crate::panel::SampleWindow;
use crate::{Error, Result};

/// What the stopping rule decided after an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    /// New best validation loss.
    Improved,
    /// No improvement but still within patience.
    Continue,
    /// Patience exhausted.
    Stop,
}

/// Patience-based early stopping on validation loss.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopping {
    /// Stop once more than `patience` consecutive epochs fail to improve.
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0, bad_epochs: 0 }
    }

    /// Record an epoch's validation loss.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            StopDecision::Improved
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs > self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    /// Best loss so far.
    pub fn best(&self) -> f64 {
        self.best
    }

    /// Epoch (1-based) of the best loss, 0 before any observation.
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// One epoch of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch.
    pub epoch: usize,
    /// Mean training loss over the epoch's batches.
    pub train_loss: f64,
    /// Validation loss after the epoch.
    pub val_loss: f64,
    /// Mean pre-clip gradient norm.
    pub grad_norm: f64,
}

/// Training history.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// Per-epoch records.
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    /// True when early stopping ended training.
    pub stopped_early: bool,
}

impl TrainingLog {
    /// CSV with header `epoch,train_loss,val_loss,grad_norm`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,grad_norm\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{},{},{}\n", r.epoch, r.train_loss, r.val_loss, r.grad_norm));
        }
        s
    }
}

/// Mean eval-mode loss over windows, weighted by batch size.
pub fn evaluate_loss(model: &TftModel, windows: &[SampleWindow]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::InsufficientData("no windows to evaluate".into()));
    }
    let refs: Vec<&SampleWindow> = windows.iter().collect();
    let mut total = 0.0;
    for chunk in refs.chunks(model.hyperparams().batch_size) {
        let batch = model.batch(chunk)?;
        total += model.loss(&batch)? * chunk.len() as f64;
    }
    Ok(total / windows.len() as f64)
}

/// Train a fresh model. Returns the parameters of the best validation
/// epoch and the log.
pub fn train_tft(
    schema: InputSchema,
    hp: &TftHyperParams,
    train: &[SampleWindow],
    val: &[SampleWindow],
) -> Result<(TftModel, TrainingLog)> {
    hp.validate()?;
    if train.is_empty() {
        return Err(Error::InsufficientData("no training windows".into()));
    }
    if val.is_empty() {
        return Err(Error::InsufficientData("no validation windows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut model = TftModel::init(schema, hp.clone(), &mut rng);
    let mut adam = Adam::new(model.params(), hp.learning_rate);
    let mut stopper = EarlyStopping::new(hp.patience);
    let mut best = model.params().clone();
    let mut log = TrainingLog::default();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=hp.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut norm_sum, mut n_batches) = (0.0, 0.0, 0usize);
        for idx in order.chunks(hp.batch_size) {
            let windows: Vec<&SampleWindow> = idx.iter().map(|&i| &train[i]).collect();
            let batch = model.batch(&windows)?;
            let mut mode = Mode { dropout: hp.dropout, rng: Some(&mut rng) };
            let (loss, mut grads) = model.loss_and_gradients(&batch, &mut mode)?;
            let norm = grads.clip(hp.gradient_clip_norm);
            if !norm.is_finite() {
                return Err(Error::Diverged(format!("non-finite gradient norm in epoch {epoch}")));
            }
            adam.update(model.params_mut(), &grads);
            loss_sum += loss * idx.len() as f64;
            norm_sum += norm;
            n_batches += 1;
        }
        let val_loss = evaluate_loss(&model, val)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite validation loss in epoch {epoch}")));
        }
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss,
            grad_norm: norm_sum / n_batches as f64,
        });
        log::debug!("epoch {epoch}: train {:.5} val {val_loss:.5}", loss_sum / train.len() as f64);
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => best = model.params().clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                log.stopped_early = true;
                break;
            }
        }
    }
    log.best_epoch = stopper.best_epoch();
    model.set_params(best);
    Ok((model, log))
}
