use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TctnConfig;
use crate::autograd::{Tape, Var};
use crate::error::{Result, TctnError};
use crate::tensor::{Scalar, Tensor};

/// A named trainable tensor and its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Option<Tensor<T>>,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        Parameter {
            name: name.into(),
            value,
            grad: None,
        }
    }

    pub fn accumulate_grad(&mut self, g: &Tensor<T>) -> Result<()> {
        if g.shape() != self.value.shape() {
            return Err(TctnError::shape(format!(
                "gradient {:?} does not match parameter {} {:?}",
                g.shape(),
                self.name,
                self.value.shape()
            )));
        }
        match &mut self.grad {
            Some(acc) => {
                for (a, &b) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += b;
                }
            }
            None => self.grad = Some(g.clone()),
        }
        Ok(())
    }
}

/// Weights of one transformer block. Generic over the slot type: the same
/// layout holds stored [`Parameter`]s and their tape-bound [`Var`]s.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockWeights<P> {
    pub ln1_gamma: P,
    pub ln1_beta: P,
    pub wq: P,
    pub bq: Option<P>,
    pub wk: P,
    pub bk: Option<P>,
    pub wv: P,
    pub bv: Option<P>,
    /// Channel map producing the attention sublayer output, `[D, D]`.
    pub wo: P,
    pub bo: P,
    pub ln2_gamma: P,
    pub ln2_beta: P,
    pub wf1: P,
    pub bf1: P,
    pub wf2: P,
    pub bf2: P,
}

impl<P> BlockWeights<P> {
    fn slots(&self) -> Vec<&P> {
        let mut out = vec![&self.ln1_gamma, &self.ln1_beta, &self.wq];
        out.extend(self.bq.as_ref());
        out.push(&self.wk);
        out.extend(self.bk.as_ref());
        out.push(&self.wv);
        out.extend(self.bv.as_ref());
        out.extend([
            &self.wo,
            &self.bo,
            &self.ln2_gamma,
            &self.ln2_beta,
            &self.wf1,
            &self.bf1,
            &self.wf2,
            &self.bf2,
        ]);
        out
    }

    fn slots_mut(&mut self) -> Vec<&mut P> {
        let mut out = vec![&mut self.ln1_gamma, &mut self.ln1_beta, &mut self.wq];
        out.extend(self.bq.as_mut());
        out.push(&mut self.wk);
        out.extend(self.bk.as_mut());
        out.push(&mut self.wv);
        out.extend(self.bv.as_mut());
        out.extend([
            &mut self.wo,
            &mut self.bo,
            &mut self.ln2_gamma,
            &mut self.ln2_beta,
            &mut self.wf1,
            &mut self.bf1,
            &mut self.wf2,
            &mut self.bf2,
        ]);
        out
    }

    fn map<Q>(&self, f: &mut impl FnMut(&P) -> Q) -> BlockWeights<Q> {
        BlockWeights {
            ln1_gamma: f(&self.ln1_gamma),
            ln1_beta: f(&self.ln1_beta),
            wq: f(&self.wq),
            bq: self.bq.as_ref().map(&mut *f),
            wk: f(&self.wk),
            bk: self.bk.as_ref().map(&mut *f),
            wv: f(&self.wv),
            bv: self.bv.as_ref().map(&mut *f),
            wo: f(&self.wo),
            bo: f(&self.bo),
            ln2_gamma: f(&self.ln2_gamma),
            ln2_beta: f(&self.ln2_beta),
            wf1: f(&self.wf1),
            bf1: f(&self.bf1),
            wf2: f(&self.wf2),
            bf2: f(&self.bf2),
        }
    }
}

/// All weights of the network in a fixed order: embedding, blocks, forecaster.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights<P> {
    pub embed1_w: P,
    pub embed1_b: P,
    pub embed2_w: P,
    pub embed2_b: P,
    pub blocks: Vec<BlockWeights<P>>,
    /// Forecaster channel map `[D, C]`.
    pub head_w: P,
    pub head_b: P,
}

impl<P> ModelWeights<P> {
    /// Slots in canonical order. Checkpoints and optimizer state follow it.
    pub fn slots(&self) -> Vec<&P> {
        let mut out = vec![
            &self.embed1_w,
            &self.embed1_b,
            &self.embed2_w,
            &self.embed2_b,
        ];
        for b in &self.blocks {
            out.extend(b.slots());
        }
        out.extend([&self.head_w, &self.head_b]);
        out
    }

    pub fn slots_mut(&mut self) -> Vec<&mut P> {
        let mut out = vec![
            &mut self.embed1_w,
            &mut self.embed1_b,
            &mut self.embed2_w,
            &mut self.embed2_b,
        ];
        for b in &mut self.blocks {
            out.extend(b.slots_mut());
        }
        out.extend([&mut self.head_w, &mut self.head_b]);
        out
    }

    pub fn map<Q>(&self, mut f: impl FnMut(&P) -> Q) -> ModelWeights<Q> {
        ModelWeights {
            embed1_w: f(&self.embed1_w),
            embed1_b: f(&self.embed1_b),
            embed2_w: f(&self.embed2_w),
            embed2_b: f(&self.embed2_b),
            blocks: self.blocks.iter().map(|b| b.map(&mut f)).collect(),
            head_w: f(&self.head_w),
            head_b: f(&self.head_b),
        }
    }
}

/// How a parameter is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `[-sqrt(1/fan_in), sqrt(1/fan_in)]`.
    FanIn(usize),
    Zeros,
    Ones,
}

/// Name, shape and initializer of every parameter implied by `config`, in
/// canonical order.
pub fn parameter_layout(config: &TctnConfig) -> ModelWeights<(String, Vec<usize>, Init)> {
    let d = config.embed_dim;
    let c = config.channels;
    let ke = config.embed_kernel;
    let tk = config.tc_kernel;
    let conv3 = vec![tk.time, tk.height, tk.width, d, d];
    let conv3_fan = tk.time * tk.height * tk.width * d;
    let spec = |name: String, shape: Vec<usize>, init: Init| (name, shape, init);

    let blocks = (0..config.blocks)
        .map(|i| {
            let p = |s: &str| format!("block{i}.{s}");
            let qkv_bias = |s: &str| config.qkv_bias.then(|| spec(p(s), vec![d], Init::Zeros));
            BlockWeights {
                ln1_gamma: spec(p("ln1.gamma"), vec![d], Init::Ones),
                ln1_beta: spec(p("ln1.beta"), vec![d], Init::Zeros),
                wq: spec(p("attn.wq"), conv3.clone(), Init::FanIn(conv3_fan)),
                bq: qkv_bias("attn.bq"),
                wk: spec(p("attn.wk"), conv3.clone(), Init::FanIn(conv3_fan)),
                bk: qkv_bias("attn.bk"),
                wv: spec(p("attn.wv"), conv3.clone(), Init::FanIn(conv3_fan)),
                bv: qkv_bias("attn.bv"),
                wo: spec(p("attn.wo"), vec![d, d], Init::FanIn(d)),
                bo: spec(p("attn.bo"), vec![d], Init::Zeros),
                ln2_gamma: spec(p("ln2.gamma"), vec![d], Init::Ones),
                ln2_beta: spec(p("ln2.beta"), vec![d], Init::Zeros),
                wf1: spec(p("ff.w1"), conv3.clone(), Init::FanIn(conv3_fan)),
                bf1: spec(p("ff.b1"), vec![d], Init::Zeros),
                wf2: spec(p("ff.w2"), conv3.clone(), Init::FanIn(conv3_fan)),
                bf2: spec(p("ff.b2"), vec![d], Init::Zeros),
            }
        })
        .collect();

    ModelWeights {
        embed1_w: spec(
            "embed.conv1.weight".into(),
            vec![ke, ke, c, d],
            Init::FanIn(ke * ke * c),
        ),
        embed1_b: spec("embed.conv1.bias".into(), vec![d], Init::Zeros),
        embed2_w: spec(
            "embed.conv2.weight".into(),
            vec![ke, ke, d, d],
            Init::FanIn(ke * ke * d),
        ),
        embed2_b: spec("embed.conv2.bias".into(), vec![d], Init::Zeros),
        blocks,
        head_w: spec("head.weight".into(), vec![d, c], Init::FanIn(d)),
        head_b: spec("head.bias".into(), vec![c], Init::Zeros),
    }
}

/// The network: a config and the parameters it implies.
#[derive(Clone, Debug, PartialEq)]
pub struct TctnModel<T> {
    pub config: TctnConfig,
    pub weights: ModelWeights<Parameter<T>>,
}

/// Draws fresh parameters for `config` from `seed`.
pub fn init_parameters<T: Scalar>(config: &TctnConfig, seed: u64) -> Result<TctnModel<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = parameter_layout(config).map(|(name, shape, init)| {
        let value = match *init {
            Init::Zeros => Tensor::zeros(shape),
            Init::Ones => Tensor::ones(shape),
            Init::FanIn(fan_in) => {
                let bound = (1.0 / fan_in as f64).sqrt();
                Tensor::from_fn(shape, |_| T::of(rng.gen_range(-bound..=bound)))
            }
        };
        Parameter::new(name.clone(), value)
    });
    Ok(TctnModel {
        config: config.clone(),
        weights,
    })
}

impl<T: Scalar> TctnModel<T> {
    /// Initializes from `config.seed`.
    pub fn new(config: &TctnConfig) -> Result<Self> {
        init_parameters(config, config.seed)
    }

    pub fn parameters(&self) -> Vec<&Parameter<T>> {
        self.weights.slots()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        self.weights.slots_mut()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.value.numel()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.parameters_mut() {
            p.grad = None;
        }
    }

    /// Records every parameter on `tape` as a leaf.
    pub fn bind<'t>(&self, tape: &'t Tape<T>, requires_grad: bool) -> BoundModel<'t, T> {
        let weights = self
            .weights
            .map(|p| tape.leaf(p.value.clone(), requires_grad));
        let zero_bias = tape.constant(Tensor::zeros(&[self.config.embed_dim]));
        BoundModel {
            config: self.config.clone(),
            weights,
            zero_bias,
        }
    }

    /// Adds the tape gradients of `bound` into the stored parameters.
    pub fn accumulate_grads(&mut self, bound: &BoundModel<'_, T>) -> Result<()> {
        for (param, var) in self
            .weights
            .slots_mut()
            .into_iter()
            .zip(bound.weights.slots())
        {
            if let Some(g) = var.grad() {
                param.accumulate_grad(&g)?;
            }
        }
        Ok(())
    }

    /// Converts the element type of every parameter.
    pub fn cast<U: Scalar>(&self) -> TctnModel<U> {
        TctnModel {
            config: self.config.clone(),
            weights: self.weights.map(|p| Parameter {
                name: p.name.clone(),
                value: p.value.cast(),
                grad: p.grad.as_ref().map(|g| g.cast()),
            }),
        }
    }
}

/// Parameters of a model recorded on one tape.
pub struct BoundModel<'t, T> {
    pub config: TctnConfig,
    pub weights: ModelWeights<Var<'t, T>>,
    pub(crate) zero_bias: Var<'t, T>,
}

/// Total parameter count implied by `config`.
pub fn parameter_count(config: &TctnConfig) -> usize {
    parameter_layout(config)
        .slots()
        .iter()
        .map(|(_, shape, _)| shape.iter().product::<usize>())
        .sum()
}
