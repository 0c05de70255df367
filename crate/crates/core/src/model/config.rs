use std::fmt;
use std::str::FromStr;

use crate::error::{Result, TctnError};
use crate::kv::Entries;

/// Temporal × spatial kernel extents of the causal 3D convolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelSize {
    pub time: usize,
    pub height: usize,
    pub width: usize,
}

impl KernelSize {
    pub const fn cube(k: usize) -> Self {
        KernelSize {
            time: k,
            height: k,
            width: k,
        }
    }
}

impl fmt::Display for KernelSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.time, self.height, self.width)
    }
}

impl FromStr for KernelSize {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<usize> = s
            .split('x')
            .map(|p| p.trim().parse::<usize>().map_err(|e| e.to_string()))
            .collect::<std::result::Result<_, _>>()?;
        match parts[..] {
            [t, h, w] => Ok(KernelSize {
                time: t,
                height: h,
                width: w,
            }),
            _ => Err(format!("expected TxHxW, got {s:?}")),
        }
    }
}

/// Architecture hyperparameters. Defaults are the MovingMNIST setting:
/// 10 input frames, 10 predicted, 64×64×1, D = 128, six blocks, 3×3×3
/// temporal kernels, dropout 0.1.
#[derive(Clone, Debug, PartialEq)]
pub struct TctnConfig {
    /// J: observed frames.
    pub input_len: usize,
    /// K: predicted frames.
    pub horizon: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// D: embedding channels. Must be even.
    pub embed_dim: usize,
    /// N: transformer blocks.
    pub blocks: usize,
    /// Spatial extent of the two embedding convolutions.
    pub embed_kernel: usize,
    pub tc_kernel: KernelSize,
    pub dropout: f64,
    pub lrelu_slope: f64,
    /// Learn biases on the query/key/value convolutions.
    pub qkv_bias: bool,
    pub seed: u64,
}

impl Default for TctnConfig {
    fn default() -> Self {
        TctnConfig {
            input_len: 10,
            horizon: 10,
            height: 64,
            width: 64,
            channels: 1,
            embed_dim: 128,
            blocks: 6,
            embed_kernel: 5,
            tc_kernel: KernelSize::cube(3),
            dropout: 0.1,
            lrelu_slope: 0.01,
            qkv_bias: true,
            seed: 0,
        }
    }
}

impl TctnConfig {
    /// Frames fed to the network during teacher-forced training: `J + K - 1`.
    pub fn train_len(&self) -> usize {
        self.input_len + self.horizon - 1
    }

    /// Full sequence length `J + K`.
    pub fn sequence_len(&self) -> usize {
        self.input_len + self.horizon
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_len", self.input_len),
            ("horizon", self.horizon),
            ("height", self.height),
            ("width", self.width),
            ("channels", self.channels),
            ("embed_dim", self.embed_dim),
            ("blocks", self.blocks),
            ("embed_kernel", self.embed_kernel),
            ("tc_kernel time", self.tc_kernel.time),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(TctnError::config(format!("{name} must be at least 1")));
            }
        }
        if !self.embed_dim.is_multiple_of(2) {
            return Err(TctnError::config(format!(
                "embed_dim must be even, got {}",
                self.embed_dim
            )));
        }
        for (name, k) in [
            ("embed_kernel", self.embed_kernel),
            ("tc_kernel height", self.tc_kernel.height),
            ("tc_kernel width", self.tc_kernel.width),
        ] {
            if k % 2 == 0 {
                return Err(TctnError::config(format!("{name} must be odd, got {k}")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TctnError::config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(self.lrelu_slope >= 0.0) {
            return Err(TctnError::config("lrelu_slope must be non-negative"));
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 13] = [
        "input_len",
        "horizon",
        "height",
        "width",
        "channels",
        "embed_dim",
        "blocks",
        "embed_kernel",
        "tc_kernel",
        "dropout",
        "lrelu_slope",
        "qkv_bias",
        "seed",
    ];

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let values = [
            self.input_len.to_string(),
            self.horizon.to_string(),
            self.height.to_string(),
            self.width.to_string(),
            self.channels.to_string(),
            self.embed_dim.to_string(),
            self.blocks.to_string(),
            self.embed_kernel.to_string(),
            self.tc_kernel.to_string(),
            self.dropout.to_string(),
            self.lrelu_slope.to_string(),
            self.qkv_bias.to_string(),
            self.seed.to_string(),
        ];
        Self::KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    /// Overrides fields present in `entries`, consuming those keys.
    pub fn apply(&mut self, entries: &mut Entries) -> Result<()> {
        entries.take_into("input_len", &mut self.input_len)?;
        entries.take_into("horizon", &mut self.horizon)?;
        entries.take_into("height", &mut self.height)?;
        entries.take_into("width", &mut self.width)?;
        entries.take_into("channels", &mut self.channels)?;
        entries.take_into("embed_dim", &mut self.embed_dim)?;
        entries.take_into("blocks", &mut self.blocks)?;
        entries.take_into("embed_kernel", &mut self.embed_kernel)?;
        entries.take_into("tc_kernel", &mut self.tc_kernel)?;
        entries.take_into("dropout", &mut self.dropout)?;
        entries.take_into("lrelu_slope", &mut self.lrelu_slope)?;
        entries.take_into("qkv_bias", &mut self.qkv_bias)?;
        entries.take_into("seed", &mut self.seed)?;
        Ok(())
    }

    pub fn from_pairs(pairs: Vec<(String, String)>) -> Result<Self> {
        let mut entries = Entries::new(pairs)?;
        let mut config = TctnConfig::default();
        config.apply(&mut entries)?;
        entries.finish()?;
        config.validate()?;
        Ok(config)
    }
}
