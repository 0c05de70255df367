use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::optim::{adam_step, cosine_lr, AdamConfig, OptimizerState};
use crate::autograd::{backward, mse_loss, narrow, Tape};
use crate::datagen::SequenceBatch;
use crate::error::{Result, TctnError};
use crate::kv::Entries;
use crate::model::{forward_teacher_forced, Phase, TctnModel};
use crate::tensor::{Scalar, Tensor};

/// Which teacher-forced outputs enter the loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LossScope {
    /// Every shifted position `t = 1..J+K-1`.
    #[default]
    All,
    /// Only the `K` positions that predict future frames.
    FutureOnly,
}

impl fmt::Display for LossScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossScope::All => "all",
            LossScope::FutureOnly => "future",
        })
    }
}

impl FromStr for LossScope {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all" => Ok(LossScope::All),
            "future" => Ok(LossScope::FutureOnly),
            other => Err(format!(
                "unknown loss scope {other:?} (expected all or future)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub base_lr: f64,
    pub min_lr: f64,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub loss_scope: LossScope,
    /// Stops after this many optimizer steps when set.
    pub max_steps: Option<usize>,
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            base_lr: 1e-4,
            min_lr: 0.0,
            epochs: 80,
            adam: AdamConfig::default(),
            seed: 0,
            loss_scope: LossScope::All,
            max_steps: None,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub const KEYS: &'static [&'static str] = &[
        "batch_size",
        "lr",
        "min_lr",
        "epochs",
        "beta1",
        "beta2",
        "adam_eps",
        "train_seed",
        "loss_scope",
        "max_steps",
        "threads",
    ];

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(TctnError::config("batch_size must be positive"));
        }
        if self.epochs == 0 {
            return Err(TctnError::config("epochs must be positive"));
        }
        if self.threads == 0 {
            return Err(TctnError::config("threads must be positive"));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite())
            || !(self.min_lr >= 0.0)
            || self.min_lr > self.base_lr
        {
            return Err(TctnError::config("need 0 <= min_lr <= lr with lr positive"));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(TctnError::config(
                "adam betas must lie in [0, 1) and eps must be positive",
            ));
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("batch_size", self.batch_size.to_string()),
            ("lr", self.base_lr.to_string()),
            ("min_lr", self.min_lr.to_string()),
            ("epochs", self.epochs.to_string()),
            ("beta1", self.adam.beta1.to_string()),
            ("beta2", self.adam.beta2.to_string()),
            ("adam_eps", self.adam.eps.to_string()),
            ("train_seed", self.seed.to_string()),
            ("loss_scope", self.loss_scope.to_string()),
        ];
        if let Some(n) = self.max_steps {
            out.push(("max_steps", n.to_string()));
        }
        out.push(("threads", self.threads.to_string()));
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Overwrites the fields named in `entries`, consuming those keys.
    pub fn apply(&mut self, entries: &mut Entries) -> Result<()> {
        entries.take_into("batch_size", &mut self.batch_size)?;
        entries.take_into("lr", &mut self.base_lr)?;
        entries.take_into("min_lr", &mut self.min_lr)?;
        entries.take_into("epochs", &mut self.epochs)?;
        entries.take_into("beta1", &mut self.adam.beta1)?;
        entries.take_into("beta2", &mut self.adam.beta2)?;
        entries.take_into("adam_eps", &mut self.adam.eps)?;
        entries.take_into("train_seed", &mut self.seed)?;
        entries.take_into("loss_scope", &mut self.loss_scope)?;
        if let Some(n) = entries.take("max_steps")? {
            self.max_steps = Some(n);
        }
        entries.take_into("threads", &mut self.threads)?;
        self.validate()
    }
}

/// One optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

pub struct TrainReport<T> {
    pub log: Vec<LogRecord>,
    /// Mean batch loss of each completed epoch.
    pub epoch_losses: Vec<f64>,
    /// Parameters at the end of the epoch with the lowest mean loss.
    pub best: TctnModel<T>,
    pub best_epoch: usize,
    pub steps: usize,
}

impl<T> TrainReport<T> {
    /// CSV with header `epoch,step,loss,lr`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("epoch,step,loss,lr\n");
        for r in &self.log {
            let _ = writeln!(out, "{},{},{},{}", r.epoch, r.step, r.loss, r.lr);
        }
        out
    }
}

/// Splits `[J+K, H, W, C]` into the `J+K-1` teacher-forced inputs and their
/// one-step-ahead targets.
pub fn shifted_pair<T: Scalar>(sequence: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let len = sequence.shape()[0];
    if len < 2 {
        return Err(TctnError::Data(format!(
            "sequence of length {len} has no target"
        )));
    }
    Ok((sequence.narrow(0, len - 1)?, sequence.narrow(1, len)?))
}

fn check_dataset<T: Scalar>(model: &TctnModel<T>, data: &SequenceBatch) -> Result<()> {
    let c = &model.config;
    if data.seq_len() != c.sequence_len() {
        return Err(TctnError::Data(format!(
            "sequences hold {} frames, model expects {} + {}",
            data.seq_len(),
            c.input_len,
            c.horizon
        )));
    }
    if data.frame_shape() != (c.height, c.width, c.channels) {
        return Err(TctnError::Data(format!(
            "frames are {:?}, model expects ({}, {}, {})",
            data.frame_shape(),
            c.height,
            c.width,
            c.channels
        )));
    }
    Ok(())
}

fn dropout_rng(seed: u64, step: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0D50_0BAD_5EED_0001);
    rng.set_stream(((step as u64) << 20) | slot as u64);
    rng
}

fn shuffled_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Loss and parameter gradients for one sequence. Dropout is active when
/// `rng` is given.
pub fn sequence_gradients<T: Scalar>(
    model: &TctnModel<T>,
    sequence: &Tensor<T>,
    scope: LossScope,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Vec<Tensor<T>>)> {
    let (input, target) = shifted_pair(sequence)?;
    let tape = Tape::new();
    let bound = model.bind(&tape, true);
    let mut phase = match rng {
        Some(r) => Phase::train(r),
        None => Phase::eval(),
    };
    let out = forward_teacher_forced(tape.constant(input), &bound, &mut phase)?;
    let target = tape.constant(target);
    let (out, target) = match scope {
        LossScope::All => (out, target),
        LossScope::FutureOnly => {
            let t = out.shape()[0];
            let from = t - model.config.horizon;
            (narrow(out, from, t)?, narrow(target, from, t)?)
        }
    };
    let loss = mse_loss(out, target)?;
    backward(loss)?;
    let grads = bound
        .weights
        .slots()
        .iter()
        .map(|v| v.grad().unwrap_or_else(|| Tensor::zeros(&v.shape())))
        .collect();
    Ok((loss.value().item()?.as_f64(), grads))
}

/// Eval-mode mean teacher-forced loss over every sequence.
pub fn dataset_loss<T: Scalar>(
    model: &TctnModel<T>,
    data: &SequenceBatch,
    scope: LossScope,
) -> Result<f64> {
    check_dataset(model, data)?;
    let losses = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let seq = data.sequence(i)?.cast::<T>();
            let (input, target) = shifted_pair(&seq)?;
            let out = model.predict_frames(&input)?;
            let (out, target) = match scope {
                LossScope::All => (out, target),
                LossScope::FutureOnly => {
                    let t = out.shape()[0];
                    let from = t - model.config.horizon;
                    (out.narrow(from, t)?, target.narrow(from, t)?)
                }
            };
            let sq: f64 = out
                .data()
                .iter()
                .zip(target.data())
                .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
                .sum();
            Ok(sq / out.numel() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Mini-batch Adam with a per-epoch cosine schedule. Per-sequence gradients
/// are computed in parallel and reduced in a fixed order. A run is
/// reproducible for a given seed at any thread count.
pub fn train<T: Scalar>(
    model: &mut TctnModel<T>,
    data: &SequenceBatch,
    config: &TrainConfig,
    mut on_step: impl FnMut(&LogRecord),
) -> Result<TrainReport<T>> {
    config.validate()?;
    check_dataset(model, data)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| TctnError::config(format!("thread pool: {e}")))?;

    let sequences: Vec<Tensor<T>> = (0..data.len())
        .map(|i| data.sequence(i).map(|s| s.cast()))
        .collect::<Result<_>>()?;
    let training = model.config.dropout > 0.0;
    let mut state = OptimizerState::new();
    let mut log = Vec::new();
    let mut epoch_losses = Vec::new();
    let mut best = (f64::INFINITY, model.clone(), 0usize);
    let mut step = 0usize;

    let budget_left = |step: usize| config.max_steps.is_none_or(|m| step < m);
    for epoch in 0..config.epochs {
        if !budget_left(step) {
            break;
        }
        let lr = cosine_lr(epoch, config.epochs, config.base_lr, config.min_lr)?;
        let order = shuffled_order(config.seed, epoch, sequences.len());
        let mut epoch_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            if !budget_left(step) {
                break;
            }
            let frozen = &*model;
            let results: Vec<(f64, Vec<Tensor<T>>)> = pool.install(|| {
                batch
                    .par_iter()
                    .enumerate()
                    .map(|(slot, &i)| {
                        let mut rng = training.then(|| dropout_rng(config.seed, step, slot));
                        sequence_gradients(frozen, &sequences[i], config.loss_scope, rng.as_mut())
                    })
                    .collect::<Result<_>>()
            })?;

            let inv = T::of(1.0 / batch.len() as f64);
            let mut loss = 0.0;
            model.zero_grad();
            for (l, grads) in &results {
                loss += l;
                for (p, g) in model.parameters_mut().into_iter().zip(grads) {
                    p.accumulate_grad(&g.map(|x| x * inv))?;
                }
            }
            loss /= batch.len() as f64;
            adam_step(&mut model.parameters_mut(), &mut state, lr, &config.adam)?;
            model.zero_grad();

            let record = LogRecord {
                epoch,
                step,
                loss,
                lr,
            };
            on_step(&record);
            log.push(record);
            epoch_sum += loss;
            batches += 1;
            step += 1;
        }
        let mean = epoch_sum / batches as f64;
        epoch_losses.push(mean);
        if mean < best.0 {
            best = (mean, model.clone(), epoch);
        }
    }

    Ok(TrainReport {
        log,
        epoch_losses,
        best: best.1,
        best_epoch: best.2,
        steps: step,
    })
}
