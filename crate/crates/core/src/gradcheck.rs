//! Central finite-difference oracle for tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{backward, mul, sum, Tape, Var};
use crate::error::{Result, TctnError};
use crate::model::{forward_teacher_forced, Phase, TctnModel};
use crate::tensor::Tensor;

/// Relative error used by the checks: `|analytic - numeric| / max(1, |numeric|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1.0)
}

fn evaluate<F>(f: &F, inputs: &[Tensor<f64>]) -> Result<f64>
where
    F: for<'t> Fn(&[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|x| tape.constant(x.clone())).collect();
    f(&vars)?.value().item()
}

/// Compares tape gradients of the scalar function `f` against central
/// differences for every element of every input. Returns the maximum relative
/// error. `f` must be deterministic; this is checked by evaluating it twice.
pub fn finite_diff_check_many<F>(f: F, inputs: &[Tensor<f64>], step: f64) -> Result<f64>
where
    F: for<'t> Fn(&[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    if !(step > 0.0) {
        return Err(TctnError::argument(format!(
            "step must be positive, got {step}"
        )));
    }
    let first = evaluate(&f, inputs)?;
    let second = evaluate(&f, inputs)?;
    if first.to_bits() != second.to_bits() {
        return Err(TctnError::InvalidOracle(format!(
            "function is not deterministic: {first} vs {second}"
        )));
    }

    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|x| tape.leaf(x.clone(), true)).collect();
    backward(f(&vars)?)?;
    let analytic: Vec<Tensor<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(v, x)| v.grad().unwrap_or_else(|| Tensor::zeros(x.shape())))
        .collect();

    let mut worst = 0.0f64;
    let mut probe = inputs.to_vec();
    for (which, grad) in analytic.iter().enumerate() {
        for i in 0..grad.numel() {
            let orig = probe[which].data()[i];
            probe[which].data_mut()[i] = orig + step;
            let plus = evaluate(&f, &probe)?;
            probe[which].data_mut()[i] = orig - step;
            let minus = evaluate(&f, &probe)?;
            probe[which].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            worst = worst.max(relative_error(grad.data()[i], numeric));
        }
    }
    Ok(worst)
}

/// Single-input form of [`finite_diff_check_many`].
pub fn finite_diff_check<F>(f: F, x: &Tensor<f64>, step: f64) -> Result<f64>
where
    F: for<'t> Fn(Var<'t, f64>) -> Result<Var<'t, f64>>,
{
    finite_diff_check_many(|v| f(v[0]), std::slice::from_ref(x), step)
}

/// Adds uniform noise in `(-bound, bound)` to every parameter.
pub fn jitter_parameters(model: &mut TctnModel<f64>, bound: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in model.parameters_mut() {
        for w in p.value.data_mut() {
            *w += rng.gen_range(-bound..bound);
        }
    }
}

/// Outcome of [`model_gradcheck`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGradReport {
    pub max_error: f64,
    /// Parameter holding the worst element.
    pub worst: String,
    pub checked: usize,
}

fn probe_loss(model: &TctnModel<f64>, frames: &Tensor<f64>, probe: &Tensor<f64>) -> Result<f64> {
    let tape = Tape::new();
    let bound = model.bind(&tape, false);
    let out = forward_teacher_forced(tape.constant(frames.clone()), &bound, &mut Phase::eval())?;
    sum(mul(out, tape.constant(probe.clone()))?)?.value().item()
}

/// Checks parameter gradients of the full forward pass (dropout off) against
/// central differences. The scalar loss is `sum(output * probe)`; `samples`
/// elements of every parameter tensor are drawn with `seed`.
pub fn model_gradcheck(
    model: &TctnModel<f64>,
    frames: &Tensor<f64>,
    probe: &Tensor<f64>,
    samples: usize,
    step: f64,
    seed: u64,
) -> Result<ModelGradReport> {
    if !(step > 0.0) {
        return Err(TctnError::argument(format!(
            "step must be positive, got {step}"
        )));
    }
    let base = probe_loss(model, frames, probe)?;
    if base.to_bits() != probe_loss(model, frames, probe)?.to_bits() {
        return Err(TctnError::InvalidOracle(
            "forward pass is not deterministic".into(),
        ));
    }

    let tape = Tape::new();
    let bound = model.bind(&tape, true);
    let out = forward_teacher_forced(tape.constant(frames.clone()), &bound, &mut Phase::eval())?;
    backward(sum(mul(out, tape.constant(probe.clone()))?)?)?;
    let grads: Vec<Option<Tensor<f64>>> = bound.weights.slots().iter().map(|v| v.grad()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe_model = model.clone();
    let mut report = ModelGradReport {
        max_error: 0.0,
        worst: String::new(),
        checked: 0,
    };
    for (k, grad) in grads.iter().enumerate() {
        let numel = model.parameters()[k].value.numel();
        for _ in 0..samples.min(numel) {
            let i = rng.gen_range(0..numel);
            let analytic = grad.as_ref().map_or(0.0, |g| g.data()[i]);
            let orig = model.parameters()[k].value.data()[i];
            probe_model.parameters_mut()[k].value.data_mut()[i] = orig + step;
            let plus = probe_loss(&probe_model, frames, probe)?;
            probe_model.parameters_mut()[k].value.data_mut()[i] = orig - step;
            let minus = probe_loss(&probe_model, frames, probe)?;
            probe_model.parameters_mut()[k].value.data_mut()[i] = orig;
            let err = relative_error(analytic, (plus - minus) / (2.0 * step));
            if err > report.max_error || report.worst.is_empty() {
                report.max_error = report.max_error.max(err);
                if err >= report.max_error {
                    report.worst = model.parameters()[k].name.clone();
                }
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
