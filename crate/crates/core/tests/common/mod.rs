#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tctn_core::model::{TctnConfig, TctnModel};
use tctn_core::{Scalar, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform<T: Scalar>(rng: &mut impl Rng, shape: &[usize], bound: f64) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::of(rng.gen_range(-bound..bound)))
}

/// J=3, K=2, 8x8 frames, D=8, two blocks, no dropout.
pub fn toy_config() -> TctnConfig {
    TctnConfig {
        input_len: 3,
        horizon: 2,
        height: 8,
        width: 8,
        channels: 1,
        embed_dim: 8,
        blocks: 2,
        embed_kernel: 3,
        dropout: 0.0,
        ..TctnConfig::default()
    }
}

/// A model whose every parameter, biases and norm gains included, is random.
pub fn scrambled<T: Scalar>(config: &TctnConfig, seed: u64) -> TctnModel<T> {
    let mut model = TctnModel::<T>::new(config).unwrap();
    let mut r = rng(seed);
    for p in model.parameters_mut() {
        let jitter: Tensor<T> = uniform(&mut r, p.value.shape(), 0.3);
        for (w, j) in p.value.data_mut().iter_mut().zip(jitter.data()) {
            *w += *j;
        }
    }
    model
}
