use std::f64::consts::PI;

use crate::error::{Result, TctnError};
use crate::model::Parameter;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizerState<T> {
    pub first: Vec<Tensor<T>>,
    pub second: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new() -> Self {
        OptimizerState {
            first: Vec::new(),
            second: Vec::new(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. Every parameter must carry a gradient.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut Parameter<T>],
    state: &mut OptimizerState<T>,
    lr: f64,
    config: &AdamConfig,
) -> Result<()> {
    if let Some(p) = params.iter().find(|p| p.grad.is_none()) {
        return Err(TctnError::InvalidState(format!(
            "parameter {} has no gradient",
            p.name
        )));
    }
    if state.first.is_empty() {
        state.first = params
            .iter()
            .map(|p| Tensor::zeros(p.value.shape()))
            .collect();
        state.second = state.first.clone();
    }
    if state.first.len() != params.len()
        || params
            .iter()
            .zip(&state.first)
            .any(|(p, m)| p.value.shape() != m.shape())
    {
        return Err(TctnError::InvalidState(
            "optimizer moments do not match the parameter set".into(),
        ));
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of(config.beta1), T::of(config.beta2));
    let (one_b1, one_b2) = (T::of(1.0 - config.beta1), T::of(1.0 - config.beta2));
    let correction1 = T::of(1.0 - config.beta1.powi(t));
    let correction2 = T::of(1.0 - config.beta2.powi(t));
    let (lr, eps) = (T::of(lr), T::of(config.eps));

    for ((p, m), v) in params
        .iter_mut()
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        let grad = p.grad.take().expect("checked above");
        let values = p.value.data_mut();
        for (((w, &g), mi), vi) in values
            .iter_mut()
            .zip(grad.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = b1 * *mi + one_b1 * g;
            *vi = b2 * *vi + one_b2 * g * g;
            let m_hat = *mi / correction1;
            let v_hat = *vi / correction2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        p.grad = Some(grad);
    }
    Ok(())
}

/// Cosine annealing from `base_lr` at epoch 0 to `min_lr` at `total`.
pub fn cosine_lr(epoch: usize, total: usize, base_lr: f64, min_lr: f64) -> Result<f64> {
    if total == 0 {
        return Err(TctnError::argument(
            "cosine schedule needs at least one epoch",
        ));
    }
    if epoch > total {
        return Err(TctnError::argument(format!(
            "epoch {epoch} beyond schedule length {total}"
        )));
    }
    let phase = PI * epoch as f64 / total as f64;
    Ok(min_lr + (base_lr - min_lr) * (1.0 + phase.cos()) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(values: &[f64], grad: Option<&[f64]>) -> Parameter<f64> {
        let mut p = Parameter::new(
            "w",
            Tensor::from_vec(values.to_vec(), vec![values.len()]).unwrap(),
        );
        p.grad = grad.map(|g| Tensor::from_vec(g.to_vec(), vec![g.len()]).unwrap());
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = param(&[0.5, -1.0], Some(&[0.0, 0.0]));
        let mut state = OptimizerState::new();
        adam_step(&mut [&mut p], &mut state, 1e-3, &AdamConfig::default()).unwrap();
        assert_eq!(p.value.data(), &[0.5, -1.0]);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g and v_hat = g^2 after one step, so the update is
        // lr * g / (|g| + eps).
        let g = 0.3;
        let lr = 1e-2;
        let mut p = param(&[1.0], Some(&[g]));
        let mut state = OptimizerState::new();
        let cfg = AdamConfig::default();
        adam_step(&mut [&mut p], &mut state, lr, &cfg).unwrap();
        let expected = 1.0 - lr * g / (g.abs() + cfg.eps);
        assert!((p.value.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn missing_gradient_is_invalid_state() {
        let mut p = param(&[1.0], None);
        let err = adam_step(
            &mut [&mut p],
            &mut OptimizerState::new(),
            1e-3,
            &AdamConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, TctnError::InvalidState(_)));
    }

    #[test]
    fn repeated_runs_agree() {
        let run = || {
            let mut p = param(&[0.2, -0.4, 0.9], None);
            let mut state = OptimizerState::new();
            for k in 0..10 {
                let g: Vec<f64> = p
                    .value
                    .data()
                    .iter()
                    .map(|w| 2.0 * w + k as f64 * 0.01)
                    .collect();
                p.grad = Some(Tensor::from_vec(g, vec![3]).unwrap());
                adam_step(&mut [&mut p], &mut state, 1e-2, &AdamConfig::default()).unwrap();
            }
            p.value
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_lr(0, 10, 1e-4, 1e-6).unwrap(), 1e-4);
        assert!((cosine_lr(10, 10, 1e-4, 1e-6).unwrap() - 1e-6).abs() < 1e-18);
        assert!((cosine_lr(5, 10, 1e-4, 1e-6).unwrap() - (1e-4 + 1e-6) / 2.0).abs() < 1e-18);
        assert!(cosine_lr(0, 0, 1e-4, 0.0).is_err());
        assert!(cosine_lr(11, 10, 1e-4, 0.0).is_err());
    }
}
