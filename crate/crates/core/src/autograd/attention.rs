//! Single-head masked scaled dot-product attention along the time axis.
//!
//! Each spatial location `(h, w)` attends independently over its own time
//! series; the dot product contracts the channel axis. Query `t` sees keys
//! `0..=t` only. Masked entries are never evaluated, which is equivalent to a
//! score of negative infinity.

use rand::RngCore;

use super::elementwise::{check_probability, check_tape, dropout_mask};
use super::tape::{BackwardOp, Var};
use crate::error::{Result, TctnError};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy)]
struct Layout {
    t: usize,
    locations: usize,
    d: usize,
}

impl Layout {
    fn of(shape: &[usize]) -> Result<Self> {
        let [t, h, w, d] = *shape else {
            return Err(TctnError::shape(format!(
                "attention operands must be [T,H,W,D], got {shape:?}"
            )));
        };
        if d == 0 {
            return Err(TctnError::config("attention needs D > 0"));
        }
        Ok(Layout {
            t,
            locations: h * w,
            d,
        })
    }

    #[inline]
    fn row(&self, t: usize, loc: usize) -> std::ops::Range<usize> {
        let start = (t * self.locations + loc) * self.d;
        start..start + self.d
    }

    /// Offset of the weight for query `t`, key `s` at `loc` in a `[L, T, T]` buffer.
    #[inline]
    fn weight(&self, loc: usize, t: usize, s: usize) -> usize {
        (loc * self.t + t) * self.t + s
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Softmax-normalized causal weights, `[L, T, T]` with zeros above the diagonal.
fn causal_softmax<T: Scalar>(lay: &Layout, q: &[T], k: &[T]) -> Result<Vec<T>> {
    let scale = T::one() / T::of(lay.d as f64).sqrt();
    let mut probs = vec![T::zero(); lay.locations * lay.t * lay.t];
    for loc in 0..lay.locations {
        for t in 0..lay.t {
            let qrow = &q[lay.row(t, loc)];
            let base = lay.weight(loc, t, 0);
            let row = &mut probs[base..base + t + 1];
            for (s, slot) in row.iter_mut().enumerate() {
                *slot = dot(qrow, &k[lay.row(s, loc)]) * scale;
            }
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            if !max.is_finite() {
                return Err(TctnError::Numeric {
                    op: "masked_temporal_attention",
                    location: None,
                });
            }
            let mut total = T::zero();
            for slot in row.iter_mut() {
                *slot = (*slot - max).exp();
                total += *slot;
            }
            for slot in row.iter_mut() {
                *slot = *slot / total;
            }
        }
    }
    Ok(probs)
}

/// Visible-entry softmax weights, shaped `[H, W, T, T]` (query, key) with
/// zeros where the key lies in the future.
pub fn causal_attention_weights<T: Scalar>(q: &Tensor<T>, k: &Tensor<T>) -> Result<Tensor<T>> {
    if q.shape() != k.shape() {
        return Err(TctnError::shape("query and key shapes differ"));
    }
    let lay = Layout::of(q.shape())?;
    let probs = causal_softmax(&lay, q.data(), k.data())?;
    let s = q.shape();
    Tensor::from_vec(probs, vec![s[1], s[2], s[0], s[0]])
}

struct AttentionOp<T> {
    lay: Layout,
    probs: Vec<T>,
    /// Inverted-dropout multipliers on the weights, when training.
    mask: Option<Vec<T>>,
}

impl<T: Scalar> AttentionOp<T> {
    #[inline]
    fn effective(&self, idx: usize) -> T {
        match &self.mask {
            Some(m) => self.probs[idx] * m[idx],
            None => self.probs[idx],
        }
    }
}

impl<T: Scalar> BackwardOp<T> for AttentionOp<T> {
    fn backward(
        &self,
        grad: &Tensor<T>,
        inputs: &[&Tensor<T>],
        _: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let lay = self.lay;
        let (q, k, v) = (inputs[0].data(), inputs[1].data(), inputs[2].data());
        let g = grad.data();
        let scale = T::one() / T::of(lay.d as f64).sqrt();
        let mut gq = vec![T::zero(); q.len()];
        let mut gk = vec![T::zero(); k.len()];
        let mut gv = vec![T::zero(); v.len()];
        let mut dprob = vec![T::zero(); lay.t];

        for loc in 0..lay.locations {
            for t in 0..lay.t {
                let grow = &g[lay.row(t, loc)];
                for s in 0..=t {
                    let idx = lay.weight(loc, t, s);
                    let w = self.effective(idx);
                    for (acc, &gv_) in gv[lay.row(s, loc)].iter_mut().zip(grow) {
                        *acc += w * gv_;
                    }
                    let dw = dot(grow, &v[lay.row(s, loc)]);
                    dprob[s] = match &self.mask {
                        Some(m) => dw * m[idx],
                        None => dw,
                    };
                }
                let base = lay.weight(loc, t, 0);
                let p = &self.probs[base..base + t + 1];
                let inner: T = p.iter().zip(&dprob[..=t]).map(|(&a, &b)| a * b).sum();
                for s in 0..=t {
                    let dscore = p[s] * (dprob[s] - inner) * scale;
                    if dscore == T::zero() {
                        continue;
                    }
                    let (qr, kr) = (lay.row(t, loc), lay.row(s, loc));
                    for i in 0..lay.d {
                        gq[qr.start + i] += dscore * k[kr.start + i];
                        gk[kr.start + i] += dscore * q[qr.start + i];
                    }
                }
            }
        }
        let shape = inputs[0].shape().to_vec();
        [gq, gk, gv]
            .into_iter()
            .zip(needs)
            .map(|(d, &n)| n.then(|| Tensor::from_vec(d, shape.clone()).expect("shape")))
            .collect()
    }
}

/// Causal single-head attention over time for every spatial location.
/// When `training` and `dropout_p > 0`, inverted dropout is applied to the
/// post-softmax weights.
pub fn masked_temporal_attention<'t, T: Scalar>(
    q: Var<'t, T>,
    k: Var<'t, T>,
    v: Var<'t, T>,
    dropout_p: f64,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<Var<'t, T>> {
    check_tape(&q, &k)?;
    check_tape(&q, &v)?;
    check_probability(dropout_p)?;
    let (qv, kv, vv) = (q.value(), k.value(), v.value());
    if qv.shape() != kv.shape() || qv.shape() != vv.shape() {
        return Err(TctnError::shape(format!(
            "Q {:?}, K {:?}, V {:?} must share a shape",
            qv.shape(),
            kv.shape(),
            vv.shape()
        )));
    }
    let lay = Layout::of(qv.shape())?;
    let probs = causal_softmax(&lay, qv.data(), kv.data())?;
    let mask =
        (training && dropout_p > 0.0).then(|| dropout_mask::<T>(probs.len(), dropout_p, rng));
    let op = AttentionOp { lay, probs, mask };

    let vdata = vv.data();
    let mut out = vec![T::zero(); vdata.len()];
    for loc in 0..lay.locations {
        for t in 0..lay.t {
            let orow = lay.row(t, loc);
            for s in 0..=t {
                let w = op.effective(lay.weight(loc, t, s));
                let vrow = &vdata[lay.row(s, loc)];
                for (acc, &x) in out[orow.clone()].iter_mut().zip(vrow) {
                    *acc += w * x;
                }
            }
        }
    }
    let out = Tensor::from_vec(out, qv.shape().to_vec())?;
    q.tape()
        .record("masked_temporal_attention", &[q, k, v], out, op)
}
