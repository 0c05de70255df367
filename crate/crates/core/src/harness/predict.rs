use rayon::prelude::*;

use crate::datagen::SequenceBatch;
use crate::error::{Result, TctnError};
use crate::metrics::{FrameMetrics, MetricAccumulator, MetricReport};
use crate::model::TctnModel;
use crate::tensor::{Scalar, Tensor};

/// Autoregressive rollout. Starts from `J` context frames and appends each
/// clamped prediction to the input window, which grows to `J + K - 1`
/// frames. `observe` sees the window fed at every step.
pub fn predict_autoregressive_observed<T: Scalar>(
    model: &TctnModel<T>,
    context: &Tensor<T>,
    mut observe: impl FnMut(usize, &Tensor<T>),
) -> Result<Tensor<T>> {
    let c = &model.config;
    let expected = [c.input_len, c.height, c.width, c.channels];
    if context.shape() != expected {
        return Err(TctnError::argument(format!(
            "context {:?} must be {expected:?}",
            context.shape()
        )));
    }
    let mut window = context.clone();
    let mut produced = Vec::with_capacity(c.horizon);
    for k in 0..c.horizon {
        observe(k, &window);
        let out = model.predict_frames(&window)?;
        let t = out.shape()[0];
        let next = out
            .narrow(t - 1, t)?
            .map(|v| v.max(T::zero()).min(T::one()));
        window = Tensor::concat(&[&window, &next])?;
        produced.push(next);
    }
    Tensor::concat(&produced.iter().collect::<Vec<_>>())
}

/// `K` future frames from `J` context frames, values clamped to `[0, 1]`.
pub fn predict_autoregressive<T: Scalar>(
    model: &TctnModel<T>,
    context: &Tensor<T>,
) -> Result<Tensor<T>> {
    predict_autoregressive_observed(model, context, |_, _| {})
}

/// Anything that forecasts `horizon()` frames from `context_len()` frames.
pub trait FramePredictor: Sync {
    fn context_len(&self) -> usize;
    fn horizon(&self) -> usize;
    /// `(H, W, C)` when the predictor only accepts one frame size.
    fn frame_shape(&self) -> Option<(usize, usize, usize)> {
        None
    }
    /// `[J, H, W, C]` in, `[K, H, W, C]` out.
    fn predict(&self, context: &Tensor<f32>) -> Result<Tensor<f32>>;
}

impl<T: Scalar> FramePredictor for TctnModel<T> {
    fn context_len(&self) -> usize {
        self.config.input_len
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn frame_shape(&self) -> Option<(usize, usize, usize)> {
        Some((self.config.height, self.config.width, self.config.channels))
    }

    fn predict(&self, context: &Tensor<f32>) -> Result<Tensor<f32>> {
        Ok(predict_autoregressive(self, &context.cast::<T>())?.cast())
    }
}

/// Repeats the last context frame.
#[derive(Clone, Copy, Debug)]
pub struct Persistence {
    pub context_len: usize,
    pub horizon: usize,
}

impl FramePredictor for Persistence {
    fn context_len(&self) -> usize {
        self.context_len
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn predict(&self, context: &Tensor<f32>) -> Result<Tensor<f32>> {
        let t = context.shape()[0];
        let last = context.narrow(t - 1, t)?;
        Tensor::concat(&vec![&last; self.horizon])
    }
}

/// Per-step PSNR, SSIM and MAE of `predictor` on every sequence of `data`.
pub fn evaluate<P: FramePredictor + ?Sized>(
    predictor: &P,
    data: &SequenceBatch,
) -> Result<MetricReport> {
    let (j, k) = (predictor.context_len(), predictor.horizon());
    if data.seq_len() != j + k {
        return Err(TctnError::Data(format!(
            "sequences hold {} frames, predictor needs {j} + {k}",
            data.seq_len()
        )));
    }
    if data.is_empty() {
        return Err(TctnError::argument("empty dataset"));
    }
    let (h, w, c) = data.frame_shape();
    if let Some(expected) = predictor.frame_shape().filter(|&s| s != (h, w, c)) {
        return Err(TctnError::Data(format!(
            "frames are {:?}, predictor expects {expected:?}",
            (h, w, c)
        )));
    }
    let per_sequence = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let seq = data.sequence(i)?;
            let pred = predictor.predict(&seq.narrow(0, j)?)?;
            if pred.shape() != [k, h, w, c] {
                return Err(TctnError::shape(format!(
                    "predictor returned {:?}, expected {:?}",
                    pred.shape(),
                    [k, h, w, c]
                )));
            }
            (0..k)
                .map(|s| {
                    let p = pred.narrow(s, s + 1)?.reshape(vec![h, w, c])?;
                    let t = seq.narrow(j + s, j + s + 1)?.reshape(vec![h, w, c])?;
                    FrameMetrics::compute(&p, &t)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = MetricAccumulator::new(k);
    for m in &per_sequence {
        acc.push(m)?;
    }
    acc.finish()
}
