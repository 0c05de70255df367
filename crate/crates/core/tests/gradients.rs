mod common;

use common::{rng, scrambled, toy_config, uniform};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tctn_core::autograd::*;
use tctn_core::gradcheck::{finite_diff_check_many, model_gradcheck};
use tctn_core::Tensor;

const TRIALS: u64 = 20;
const STEP: f64 = 1e-4;
const OP_TOL: f64 = 1e-4;
const MODEL_STEP: f64 = 1e-6;

/// Weighted sum with a fixed random cotangent.
fn project<'t>(y: Var<'t, f64>, seed: u64) -> tctn_core::Result<Var<'t, f64>> {
    let w = uniform(&mut rng(seed), &y.shape(), 1.0);
    sum(mul(y, y.tape().constant(w))?)
}

fn check<F>(name: &str, f: F, inputs: impl Fn(&mut ChaCha8Rng) -> Vec<Tensor<f64>>)
where
    F: for<'t> Fn(&[Var<'t, f64>]) -> tctn_core::Result<Var<'t, f64>>,
{
    for trial in 0..TRIALS {
        let mut r = rng(1000 + trial);
        let xs = inputs(&mut r);
        let err = finite_diff_check_many(&f, &xs, STEP).unwrap();
        assert!(err < OP_TOL, "{name} trial {trial}: relative error {err:e}");
    }
}

fn away_from_zero(t: Tensor<f64>) -> Tensor<f64> {
    t.map(|x| x.signum() * (0.05 + x.abs()))
}

#[test]
fn elementwise_ops() {
    let two = |r: &mut ChaCha8Rng| {
        let n = r.gen_range(1..6);
        vec![uniform(r, &[n, 3], 1.0), uniform(r, &[n, 3], 1.0)]
    };
    check("add", |v| project(add(v[0], v[1])?, 1), two);
    check("sub", |v| project(sub(v[0], v[1])?, 2), two);
    check("mul", |v| project(mul(v[0], v[1])?, 3), two);
    check("scale", |v| project(scale(v[0], -1.7)?, 4), two);
    check("mean", |v| mean(mul(v[0], v[1])?), two);
    check("mse_loss", |v| mse_loss(v[0], v[1]), two);
    check("narrow", |v| project(narrow(v[0], 0, 1)?, 5), two);
    check(
        "leaky_relu",
        |v| project(leaky_relu(v[0], 0.01)?, 6),
        |r| vec![away_from_zero(uniform(r, &[4, 5], 1.0))],
    );
}

#[test]
fn dropout_with_fixed_mask() {
    check(
        "dropout",
        |v| {
            let mut r = rng(77);
            project(dropout(v[0], 0.3, true, &mut r)?, 7)
        },
        |r| vec![uniform(r, &[6, 4], 1.0)],
    );
}

#[test]
fn linear_map() {
    check(
        "linear",
        |v| project(linear(v[0], v[1], v[2])?, 8),
        |r| {
            let (din, dout) = (r.gen_range(1..5), r.gen_range(1..5));
            vec![
                uniform(r, &[2, 3, din], 1.0),
                uniform(r, &[din, dout], 1.0),
                uniform(r, &[dout], 1.0),
            ]
        },
    );
}

#[test]
fn layer_norm_all_inputs() {
    check(
        "layer_norm",
        |v| project(layer_norm(v[0], v[1], v[2], LAYER_NORM_EPS)?, 9),
        |r| {
            let d = r.gen_range(2..7);
            vec![
                uniform(r, &[3, d], 2.0),
                uniform(r, &[d], 1.5),
                uniform(r, &[d], 1.0),
            ]
        },
    );
}

#[test]
fn conv2d_same_all_inputs() {
    check(
        "conv2d_same",
        |v| project(conv2d_same(v[0], v[1], v[2])?, 10),
        |r| {
            let (cin, cout) = (r.gen_range(1..3), r.gen_range(1..3));
            let k = [1, 3][r.gen_range(0..2)];
            vec![
                uniform(r, &[2, 4, 5, cin], 1.0),
                uniform(r, &[k, k, cin, cout], 1.0),
                uniform(r, &[cout], 1.0),
            ]
        },
    );
}

#[test]
fn causal_conv3d_all_inputs() {
    check(
        "causal_conv3d",
        |v| project(causal_conv3d(v[0], v[1], v[2])?, 11),
        |r| {
            let (cin, cout) = (r.gen_range(1..3), r.gen_range(1..3));
            let (kt, t) = (r.gen_range(1..4), r.gen_range(1..5));
            vec![
                uniform(r, &[t, 4, 3, cin], 1.0),
                uniform(r, &[kt, 3, 3, cin, cout], 1.0),
                uniform(r, &[cout], 1.0),
            ]
        },
    );
}

#[test]
fn attention_all_inputs() {
    let inputs = |r: &mut ChaCha8Rng| {
        let shape = [r.gen_range(1..6), 2, 3, r.gen_range(1..5)];
        vec![
            uniform(r, &shape, 1.5),
            uniform(r, &shape, 1.5),
            uniform(r, &shape, 1.0),
        ]
    };
    check(
        "masked_temporal_attention",
        |v| {
            let mut r = rng(0);
            project(
                masked_temporal_attention(v[0], v[1], v[2], 0.0, false, &mut r)?,
                12,
            )
        },
        inputs,
    );
    check(
        "masked_temporal_attention with dropout",
        |v| {
            let mut r = rng(5);
            project(
                masked_temporal_attention(v[0], v[1], v[2], 0.25, true, &mut r)?,
                13,
            )
        },
        inputs,
    );
}

#[test]
fn full_toy_model() {
    let config = toy_config();
    let frames_len = config.input_len + config.horizon - 1;
    for trial in 0..TRIALS {
        let model = scrambled::<f64>(&config, 500 + trial);
        let mut r = rng(900 + trial);
        let frames: Tensor<f64> =
            uniform::<f64>(&mut r, &[frames_len, 8, 8, 1], 1.0).map(|x| x.abs());
        let probe: Tensor<f64> = uniform(&mut r, &[frames_len, 8, 8, 1], 1.0);
        let report = model_gradcheck(&model, &frames, &probe, 2, MODEL_STEP, trial).unwrap();
        assert!(
            report.max_error < 1e-3,
            "trial {trial}: {} has relative error {:e}",
            report.worst,
            report.max_error
        );
    }
}
