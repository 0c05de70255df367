//! Element-wise ops, reductions and the per-position channel map.

use rand::{Rng, RngCore};

use super::tape::{BackwardOp, Var};
use crate::error::{Result, TctnError};
use crate::tensor::{ensure_same_shape, Scalar, Tensor};

pub(crate) fn check_tape<T: Scalar>(a: &Var<'_, T>, b: &Var<'_, T>) -> Result<()> {
    if !a.same_tape(b) {
        return Err(TctnError::InvalidState(
            "operands recorded on different tapes".into(),
        ));
    }
    Ok(())
}

struct AddOp;

impl<T: Scalar> BackwardOp<T> for AddOp {
    fn backward(
        &self,
        grad: &Tensor<T>,
        _: &[&Tensor<T>],
        _: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        needs.iter().map(|&n| n.then(|| grad.clone())).collect()
    }
}

pub fn add<'t, T: Scalar>(a: Var<'t, T>, b: Var<'t, T>) -> Result<Var<'t, T>> {
    check_tape(&a, &b)?;
    let (av, bv) = (a.value(), b.value());
    ensure_same_shape(&av, &bv, "add")?;
    let data = av
        .data()
        .iter()
        .zip(bv.data())
        .map(|(&x, &y)| x + y)
        .collect();
    let out = Tensor::from_vec(data, av.shape().to_vec())?;
    a.tape().record("add", &[a, b], out, AddOp)
}

struct SubOp;

impl<T: Scalar> BackwardOp<T> for SubOp {
    fn backward(
        &self,
        grad: &Tensor<T>,
        _: &[&Tensor<T>],
        _: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        vec![
            needs[0].then(|| grad.clone()),
            needs[1].then(|| grad.map(|g| -g)),
        ]
    }
}

pub fn sub<'t, T: Scalar>(a: Var<'t, T>, b: Var<'t, T>) -> Result<Var<'t, T>> {
    check_tape(&a, &b)?;
    let (av, bv) = (a.value(), b.value());
    ensure_same_shape(&av, &bv, "sub")?;
    let data = av
        .data()
        .iter()
        .zip(bv.data())
        .map(|(&x, &y)| x - y)
        .collect();
    let out = Tensor::from_vec(data, av.shape().to_vec())?;
    a.tape().record("sub", &[a, b], out, SubOp)
}

struct MulOp;

impl<T: Scalar> BackwardOp<T> for MulOp {
    fn backward(
        &self,
        grad: &Tensor<T>,
        inputs: &[&Tensor<T>],
        _: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let scaled = |other: &Tensor<T>| {
            let data = grad
                .data()
                .iter()
                .zip(other.data())
                .map(|(&g, &o)| g * o)
                .collect();
            Tensor::from_vec(data, grad.shape().to_vec()).expect("same shape")
        };
        vec![
            needs[0].then(|| scaled(inputs[1])),
            needs[1].then(|| scaled(inputs[0])),
        ]
    }
}

/// Element-wise (Hadamard) product.
pub fn mul<'t, T: Scalar>(a: Var<'t, T>, b: Var<'t, T>) -> Result<Var<'t, T>> {
    check_tape(&a, &b)?;
    let (av, bv) = (a.value(), b.value());
    ensure_same_shape(&av, &bv, "mul")?;
    let data = av
        .data()
        .iter()
        .zip(bv.data())
        .map(|(&x, &y)| x * y)
        .collect();
    let out = Tensor::from_vec(data, av.shape().to_vec())?;
    a.tape().record("mul", &[a, b], out, MulOp)
}

struct ScaleOp<T>(T);

impl<T: Scalar> BackwardOp<T> for ScaleOp<T> {
    fn backward(
        &self,
        grad: &Tensor<T>,
        _: &[&Tensor<T>],
        _: &Tensor<T>,
        _: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        vec![Some(grad.map(|g| g * self.0))]
    }
}

pub fn scale<'t, T: Scalar>(a: Var<'t, T>, factor: T) -> Result<Var<'t, T>> {
    let out = a.value().map(|x| x * factor);
    a.tape().record("scale", &[a], out, ScaleOp(factor))
}

struct SumOp;

impl<T: Scalar> BackwardOp<T> for SumOp {
    fn backward(
        &self,
        grad: &Tensor<T>,
        inputs: &[&Tensor<T>],
        _: &Tensor<T>,
        _: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        vec![Some(Tensor::full(inputs[0].shape(), grad.data()[0]))]
    }
}

/// Sum of all elements, as a one-element tensor.
pub fn sum<'t, T: Scalar>(a: Var<'t, T>) -> Result<Var<'t, T>> {
    let total: T = a.value().data().iter().copied().sum();
    a.tape().record("sum", &[a], Tensor::scalar(total), SumOp)
}

pub fn mean<'t, T: Scalar>(a: Var<'t, T>) -> Result<Var<'t, T>> {
    let n = a.value().numel();
    scale(sum(a)?, T::one() / T::of(n as f64))
}

struct LeakyReluOp<T>(T);

impl<T: Scalar> BackwardOp<T> for LeakyReluOp<T> {
    fn backward(
        &self,
        grad: &Tensor<T>,
        inputs: &[&Tensor<T>],
        _: &Tensor<T>,
        _: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let data = grad
            .data()
            .iter()
            .zip(inputs[0].data())
            .map(|(&g, &x)| if x >= T::zero() { g } else { g * self.0 })
            .collect();
        vec![Some(
            Tensor::from_vec(data, grad.shape().to_vec()).expect("same shape"),
        )]
    }
}

pub fn leaky_relu<T: Scalar>(a: Var<'_, T>, slope: T) -> Result<Var<'_, T>> {
    let out = a
        .value()
        .map(|x| if x >= T::zero() { x } else { x * slope });
    a.tape().record("leaky_relu", &[a], out, LeakyReluOp(slope))
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(TctnError::config(format!(
            "dropout probability {p} outside [0, 1)"
        )));
    }
    Ok(())
}

/// Draws an inverted-dropout mask: zero with probability `p`, `1/(1-p)`
/// otherwise.
pub(crate) fn dropout_mask<T: Scalar>(len: usize, p: f64, rng: &mut dyn RngCore) -> Vec<T> {
    let keep = T::of(1.0 / (1.0 - p));
    (0..len)
        .map(|_| {
            if rng.gen::<f64>() < p {
                T::zero()
            } else {
                keep
            }
        })
        .collect()
}

struct MaskOp<T>(Vec<T>);

impl<T: Scalar> BackwardOp<T> for MaskOp<T> {
    fn backward(
        &self,
        grad: &Tensor<T>,
        _: &[&Tensor<T>],
        _: &Tensor<T>,
        _: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let data = grad
            .data()
            .iter()
            .zip(&self.0)
            .map(|(&g, &m)| g * m)
            .collect();
        vec![Some(
            Tensor::from_vec(data, grad.shape().to_vec()).expect("same shape"),
        )]
    }
}

/// Inverted dropout. Identity when not training or when `p == 0`.
pub fn dropout<'t, T: Scalar>(
    a: Var<'t, T>,
    p: f64,
    training: bool,
    rng: &mut dyn RngCore,
) -> Result<Var<'t, T>> {
    check_probability(p)?;
    if !training || p == 0.0 {
        return Ok(a);
    }
    let value = a.value();
    let mask = dropout_mask::<T>(value.numel(), p, rng);
    let data = value
        .data()
        .iter()
        .zip(&mask)
        .map(|(&x, &m)| x * m)
        .collect();
    let out = Tensor::from_vec(data, value.shape().to_vec())?;
    a.tape().record("dropout", &[a], out, MaskOp(mask))
}

struct MseOp;

impl<T: Scalar> BackwardOp<T> for MseOp {
    fn backward(
        &self,
        grad: &Tensor<T>,
        inputs: &[&Tensor<T>],
        _: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let (pred, target) = (inputs[0], inputs[1]);
        let factor = T::of(2.0) * grad.data()[0] / T::of(pred.numel() as f64);
        let diff: Vec<T> = pred
            .data()
            .iter()
            .zip(target.data())
            .map(|(&p, &t)| (p - t) * factor)
            .collect();
        let shape = pred.shape().to_vec();
        vec![
            needs[0].then(|| Tensor::from_vec(diff.clone(), shape.clone()).expect("shape")),
            needs[1].then(|| {
                Tensor::from_vec(diff.iter().map(|&d| -d).collect(), shape.clone()).expect("shape")
            }),
        ]
    }
}

/// Mean over all elements of the squared difference.
pub fn mse_loss<'t, T: Scalar>(pred: Var<'t, T>, target: Var<'t, T>) -> Result<Var<'t, T>> {
    check_tape(&pred, &target)?;
    let (pv, tv) = (pred.value(), target.value());
    ensure_same_shape(&pv, &tv, "mse_loss")?;
    let total: T = pv
        .data()
        .iter()
        .zip(tv.data())
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    let loss = Tensor::scalar(total / T::of(pv.numel() as f64));
    pred.tape().record("mse_loss", &[pred, target], loss, MseOp)
}

struct NarrowOp {
    start: usize,
    full_shape: Vec<usize>,
}

impl<T: Scalar> BackwardOp<T> for NarrowOp {
    fn backward(
        &self,
        grad: &Tensor<T>,
        _: &[&Tensor<T>],
        _: &Tensor<T>,
        _: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let mut full = Tensor::zeros(&self.full_shape);
        let row = grad.row_len();
        full.data_mut()[self.start * row..self.start * row + grad.numel()]
            .copy_from_slice(grad.data());
        vec![Some(full)]
    }
}

/// Slices `[start, end)` along the leading (time) axis.
pub fn narrow<T: Scalar>(a: Var<'_, T>, start: usize, end: usize) -> Result<Var<'_, T>> {
    let value = a.value();
    let out = value.narrow(start, end)?;
    let op = NarrowOp {
        start,
        full_shape: value.shape().to_vec(),
    };
    a.tape().record("narrow", &[a], out, op)
}

struct LinearOp {
    din: usize,
    dout: usize,
}

impl<T: Scalar> BackwardOp<T> for LinearOp {
    fn backward(
        &self,
        grad: &Tensor<T>,
        inputs: &[&Tensor<T>],
        _: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let (x, w) = (inputs[0], inputs[1]);
        let (din, dout) = (self.din, self.dout);
        let rows = x.numel() / din;
        let mut gx = needs[0].then(|| vec![T::zero(); x.numel()]);
        let mut gw = needs[1].then(|| vec![T::zero(); din * dout]);
        let mut gb = needs[2].then(|| vec![T::zero(); dout]);
        for r in 0..rows {
            let g = &grad.data()[r * dout..(r + 1) * dout];
            let xr = &x.data()[r * din..(r + 1) * din];
            if let Some(gx) = gx.as_mut() {
                let gxr = &mut gx[r * din..(r + 1) * din];
                for (i, gxi) in gxr.iter_mut().enumerate() {
                    let wr = &w.data()[i * dout..(i + 1) * dout];
                    *gxi = wr.iter().zip(g).map(|(&a, &b)| a * b).sum();
                }
            }
            if let Some(gw) = gw.as_mut() {
                for (i, &xi) in xr.iter().enumerate() {
                    for (acc, &gj) in gw[i * dout..(i + 1) * dout].iter_mut().zip(g) {
                        *acc += xi * gj;
                    }
                }
            }
            if let Some(gb) = gb.as_mut() {
                for (acc, &gj) in gb.iter_mut().zip(g) {
                    *acc += gj;
                }
            }
        }
        vec![
            gx.map(|d| Tensor::from_vec(d, x.shape().to_vec()).expect("shape")),
            gw.map(|d| Tensor::from_vec(d, vec![din, dout]).expect("shape")),
            gb.map(|d| Tensor::from_vec(d, vec![dout]).expect("shape")),
        ]
    }
}

/// Per-position channel map: `y[..., j] = b[j] + sum_i x[..., i] * w[i, j]`.
pub fn linear<'t, T: Scalar>(
    x: Var<'t, T>,
    weight: Var<'t, T>,
    bias: Var<'t, T>,
) -> Result<Var<'t, T>> {
    check_tape(&x, &weight)?;
    check_tape(&x, &bias)?;
    let (xv, wv, bv) = (x.value(), weight.value(), bias.value());
    let din = *xv.shape().last().expect("rank >= 1");
    if wv.rank() != 2 || wv.shape()[0] != din {
        return Err(TctnError::shape(format!(
            "linear: weight {:?} incompatible with input channels {din}",
            wv.shape()
        )));
    }
    let dout = wv.shape()[1];
    if bv.shape() != [dout] {
        return Err(TctnError::shape(format!(
            "linear: bias {:?} should be [{dout}]",
            bv.shape()
        )));
    }
    let rows = xv.numel() / din;
    let mut out = Vec::with_capacity(rows * dout);
    for r in 0..rows {
        let mut acc = bv.data().to_vec();
        for (i, &xi) in xv.data()[r * din..(r + 1) * din].iter().enumerate() {
            for (a, &wij) in acc.iter_mut().zip(&wv.data()[i * dout..(i + 1) * dout]) {
                *a += xi * wij;
            }
        }
        out.extend(acc);
    }
    let mut shape = xv.shape().to_vec();
    *shape.last_mut().expect("rank >= 1") = dout;
    let out = Tensor::from_vec(out, shape)?;
    x.tape()
        .record("linear", &[x, weight, bias], out, LinearOp { din, dout })
}
