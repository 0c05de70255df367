use super::elementwise::check_tape;
use super::tape::{BackwardOp, Var};
use crate::error::{Result, TctnError};
use crate::tensor::{Scalar, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-5;

struct LayerNormOp<T> {
    d: usize,
    normalized: Vec<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> BackwardOp<T> for LayerNormOp<T> {
    fn backward(
        &self,
        grad: &Tensor<T>,
        inputs: &[&Tensor<T>],
        _: &Tensor<T>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<T>>> {
        let d = self.d;
        let gamma = inputs[1].data();
        let g = grad.data();
        let inv_d = T::one() / T::of(d as f64);
        let mut gx = needs[0].then(|| vec![T::zero(); g.len()]);
        let mut ggamma = vec![T::zero(); d];
        let mut gbeta = vec![T::zero(); d];
        let mut dxhat = vec![T::zero(); d];

        for (r, grow) in g.chunks_exact(d).enumerate() {
            let xhat = &self.normalized[r * d..(r + 1) * d];
            for i in 0..d {
                ggamma[i] += grow[i] * xhat[i];
                gbeta[i] += grow[i];
                dxhat[i] = grow[i] * gamma[i];
            }
            if let Some(gx) = gx.as_mut() {
                let mean_dxhat: T = dxhat.iter().copied().sum::<T>() * inv_d;
                let mean_dxhat_xhat: T =
                    dxhat.iter().zip(xhat).map(|(&a, &b)| a * b).sum::<T>() * inv_d;
                let inv_std = self.inv_std[r];
                for i in 0..d {
                    gx[r * d + i] = inv_std * (dxhat[i] - mean_dxhat - xhat[i] * mean_dxhat_xhat);
                }
            }
        }
        vec![
            gx.map(|v| Tensor::from_vec(v, inputs[0].shape().to_vec()).expect("shape")),
            needs[1].then(|| Tensor::from_vec(ggamma, vec![d]).expect("shape")),
            needs[2].then(|| Tensor::from_vec(gbeta, vec![d]).expect("shape")),
        ]
    }
}

/// Normalizes over the trailing axis with the biased variance, then applies
/// the per-channel scale `gamma` and shift `beta`.
pub fn layer_norm<'t, T: Scalar>(
    input: Var<'t, T>,
    gamma: Var<'t, T>,
    beta: Var<'t, T>,
    eps: f64,
) -> Result<Var<'t, T>> {
    check_tape(&input, &gamma)?;
    check_tape(&input, &beta)?;
    let (xv, gv, bv) = (input.value(), gamma.value(), beta.value());
    let d = *xv.shape().last().unwrap_or(&0);
    if d == 0 {
        return Err(TctnError::config(
            "layer_norm needs a non-empty channel axis",
        ));
    }
    if gv.shape() != [d] || bv.shape() != [d] {
        return Err(TctnError::shape(format!(
            "layer_norm scale {:?} / shift {:?} should be [{d}]",
            gv.shape(),
            bv.shape()
        )));
    }
    let inv_d = T::one() / T::of(d as f64);
    let rows = xv.numel() / d;
    let mut normalized = Vec::with_capacity(xv.numel());
    let mut inv_std = Vec::with_capacity(rows);
    let mut out = Vec::with_capacity(xv.numel());
    for row in xv.data().chunks_exact(d) {
        let mean = row.iter().copied().sum::<T>() * inv_d;
        let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() * inv_d;
        let rstd = T::one() / (var + T::of(eps)).sqrt();
        inv_std.push(rstd);
        for (i, &x) in row.iter().enumerate() {
            let xhat = (x - mean) * rstd;
            normalized.push(xhat);
            out.push(xhat * gv.data()[i] + bv.data()[i]);
        }
    }
    let out = Tensor::from_vec(out, xv.shape().to_vec())?;
    let op = LayerNormOp {
        d,
        normalized,
        inv_std,
    };
    input
        .tape()
        .record("layer_norm", &[input, gamma, beta], out, op)
}
