//! Forward pass: spatial embedding, positional encoding, temporal-convolution
//! transformer blocks and the linear frame forecaster.

use rand::rngs::mock::StepRng;
use rand::RngCore;

use super::params::{BlockWeights, BoundModel, TctnModel};
use crate::autograd::{
    add, causal_conv3d, conv2d_same, dropout, layer_norm, leaky_relu, linear,
    masked_temporal_attention, Tape, Var, LAYER_NORM_EPS,
};
use crate::error::{Result, TctnError};
use crate::tensor::{Scalar, Tensor};

/// Whether dropout is active, and the generator that drives it.
pub enum Phase<'r> {
    Eval(StepRng),
    Train(&'r mut dyn RngCore),
}

impl<'r> Phase<'r> {
    pub fn eval() -> Self {
        Phase::Eval(StepRng::new(0, 0))
    }

    pub fn train(rng: &'r mut dyn RngCore) -> Self {
        Phase::Train(rng)
    }

    pub fn is_training(&self) -> bool {
        matches!(self, Phase::Train(_))
    }

    fn rng(&mut self) -> &mut dyn RngCore {
        match self {
            Phase::Eval(r) => r,
            Phase::Train(r) => &mut **r,
        }
    }
}

/// `G = LReLU(W_E1 * X)`, `M = LReLU(W_E2 * G) + G`.
pub fn spatial_embed<'t, T: Scalar>(
    frames: Var<'t, T>,
    model: &BoundModel<'t, T>,
) -> Result<Var<'t, T>> {
    let slope = T::of(model.config.lrelu_slope);
    let w = &model.weights;
    let g = leaky_relu(conv2d_same(frames, w.embed1_w, w.embed1_b)?, slope)?;
    let m = leaky_relu(conv2d_same(g, w.embed2_w, w.embed2_b)?, slope)?;
    add(m, g)
}

/// Sinusoidal encoding indexed by frame position `j = 1..=T`:
/// channel `2d` holds `sin(j / 10000^(2d/D))`, channel `2d+1` the cosine.
/// Identical at every spatial location.
pub fn positional_encoding<T: Scalar>(
    frames: usize,
    height: usize,
    width: usize,
    dim: usize,
) -> Result<Tensor<T>> {
    if !dim.is_multiple_of(2) {
        return Err(TctnError::config(format!(
            "positional encoding needs even D, got {dim}"
        )));
    }
    let mut table = Vec::with_capacity(frames * dim);
    for j in 1..=frames {
        for pair in 0..dim / 2 {
            let angle = j as f64 / 10000f64.powf((2 * pair) as f64 / dim as f64);
            table.push(T::of(angle.sin()));
            table.push(T::of(angle.cos()));
        }
    }
    let mut data = Vec::with_capacity(frames * height * width * dim);
    for row in table.chunks_exact(dim) {
        for _ in 0..height * width {
            data.extend_from_slice(row);
        }
    }
    Tensor::from_vec(data, vec![frames, height, width, dim])
}

/// `E = M + P`.
pub fn fuse_embedding<'t, T: Scalar>(m: Var<'t, T>, p: Var<'t, T>) -> Result<Var<'t, T>> {
    add(m, p)
}

/// One pre-normalization block:
/// `S = E + Drop(W_O · Attn(Q, K, V))` with `Q/K/V = W_{q,k,v} * LN1(E)`,
/// then `out = S + Drop(W_F2 * LReLU(W_F1 * LN2(S)))`.
pub fn transformer_block<'t, T: Scalar>(
    e: Var<'t, T>,
    block: &BlockWeights<Var<'t, T>>,
    model: &BoundModel<'t, T>,
    phase: &mut Phase<'_>,
    index: usize,
) -> Result<Var<'t, T>> {
    let p = model.config.dropout;
    let training = phase.is_training();
    let zero = model.zero_bias;
    let slope = T::of(model.config.lrelu_slope);
    let at = |e: TctnError, part: &str| e.in_sublayer(format!("block{index}.{part}"));

    let attn = (|| {
        let e_hat = layer_norm(e, block.ln1_gamma, block.ln1_beta, LAYER_NORM_EPS)?;
        let q = causal_conv3d(e_hat, block.wq, block.bq.unwrap_or(zero))?;
        let k = causal_conv3d(e_hat, block.wk, block.bk.unwrap_or(zero))?;
        let v = causal_conv3d(e_hat, block.wv, block.bv.unwrap_or(zero))?;
        let a = masked_temporal_attention(q, k, v, p, training, phase.rng())?;
        let a_hat = linear(a, block.wo, block.bo)?;
        dropout(a_hat, p, training, phase.rng())
    })()
    .map_err(|err| at(err, "attn"))?;
    let s = add(e, attn).map_err(|err| at(err, "attn.residual"))?;

    let ff = (|| {
        let s_hat = layer_norm(s, block.ln2_gamma, block.ln2_beta, LAYER_NORM_EPS)?;
        let hidden = leaky_relu(causal_conv3d(s_hat, block.wf1, block.bf1)?, slope)?;
        let f = causal_conv3d(hidden, block.wf2, block.bf2)?;
        dropout(f, p, training, phase.rng())
    })()
    .map_err(|err| at(err, "ff"))?;
    add(s, ff).map_err(|err| at(err, "ff.residual"))
}

/// Embedding, positional encoding and every block; returns `Z`.
pub fn encode<'t, T: Scalar>(
    frames: Var<'t, T>,
    model: &BoundModel<'t, T>,
    phase: &mut Phase<'_>,
) -> Result<Var<'t, T>> {
    let c = &model.config;
    let shape = frames.shape();
    let expected = [c.height, c.width, c.channels];
    if shape.len() != 4 || shape[1..] != expected {
        return Err(TctnError::shape(format!(
            "frames {shape:?} do not match [T, {}, {}, {}]",
            c.height, c.width, c.channels
        )));
    }
    let m = spatial_embed(frames, model).map_err(|e| e.in_sublayer("embedding"))?;
    let pe = positional_encoding(shape[0], c.height, c.width, c.embed_dim)?;
    let mut z = fuse_embedding(m, frames.tape().constant(pe))?;
    for (i, block) in model.weights.blocks.iter().enumerate() {
        z = transformer_block(z, block, model, phase, i)?;
    }
    Ok(z)
}

/// Maps `T` input frames to `T` predictions; output `t` predicts input frame
/// `t + 1`. Causal end to end.
pub fn forward_teacher_forced<'t, T: Scalar>(
    frames: Var<'t, T>,
    model: &BoundModel<'t, T>,
    phase: &mut Phase<'_>,
) -> Result<Var<'t, T>> {
    let z = encode(frames, model, phase)?;
    linear(z, model.weights.head_w, model.weights.head_b).map_err(|e| e.in_sublayer("forecaster"))
}

impl<T: Scalar> TctnModel<T> {
    /// Teacher-forced forward pass without gradient recording or dropout.
    pub fn predict_frames(&self, frames: &Tensor<T>) -> Result<Tensor<T>> {
        let tape = Tape::new();
        let bound = self.bind(&tape, false);
        let x = tape.constant(frames.clone());
        let out = forward_teacher_forced(x, &bound, &mut Phase::eval())?;
        let value = out.value();
        Ok((*value).clone())
    }
}
