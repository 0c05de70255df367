use std::path::{Path, PathBuf};

use tctn_core::datagen::GeneratorConfig;
use tctn_core::kv::{self, Entries};
use tctn_core::{TctnConfig, TctnError, TrainConfig};

use crate::error::{CliError, CliResult};

/// Sequence generation settings. Frame extents and sequence length come
/// from the model section.
#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub count: usize,
    pub seed: u64,
    pub sprites_per_sequence: usize,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Side of the square fallback sprite when no IDX file is given.
    pub sprite_size: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            count: 100,
            seed: 0,
            sprites_per_sequence: 2,
            speed_min: 3.0,
            speed_max: 5.0,
            sprite_size: 28,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckConfig {
    pub trials: usize,
    /// Elements sampled from each parameter tensor per trial.
    pub samples: usize,
    pub step: f64,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            trials: 20,
            samples: 2,
            step: 1e-6,
            tolerance: 1e-3,
        }
    }
}

/// Every setting of a run: model, training, data, checks and file paths.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub model: TctnConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub gradcheck: GradcheckConfig,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub idx: Option<PathBuf>,
    /// Sequence of the dataset that `predict` rolls out.
    pub predict_index: usize,
}

impl RunConfig {
    pub fn from_pairs(pairs: Vec<(String, String)>) -> CliResult<Self> {
        let mut e = Entries::new(pairs)?;
        let mut c = RunConfig::default();
        c.model.apply(&mut e)?;
        c.model.validate()?;
        c.train.apply(&mut e)?;
        let d = &mut c.data;
        e.take_into("count", &mut d.count)?;
        e.take_into("data_seed", &mut d.seed)?;
        e.take_into("sprites_per_sequence", &mut d.sprites_per_sequence)?;
        e.take_into("speed_min", &mut d.speed_min)?;
        e.take_into("speed_max", &mut d.speed_max)?;
        e.take_into("sprite_size", &mut d.sprite_size)?;
        let g = &mut c.gradcheck;
        e.take_into("gradcheck_trials", &mut g.trials)?;
        e.take_into("gradcheck_samples", &mut g.samples)?;
        e.take_into("gradcheck_step", &mut g.step)?;
        e.take_into("gradcheck_tolerance", &mut g.tolerance)?;
        c.dataset = e.take::<PathBuf>("dataset")?;
        c.checkpoint = e.take::<PathBuf>("checkpoint")?;
        c.idx = e.take::<PathBuf>("idx")?;
        e.take_into("predict_index", &mut c.predict_index)?;
        e.finish()?;
        Ok(c)
    }

    /// Defaults, then `file`, then `overrides` in order.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut pairs = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::File {
                    what: "config",
                    path: path.to_path_buf(),
                    source: TctnError::Io(e),
                })?;
                kv::parse(&text)?
            }
            None => Vec::new(),
        };
        for raw in overrides {
            let (k, v) = raw
                .split_once('=')
                .ok_or_else(|| CliError::BadOverride(raw.clone()))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            pairs.retain(|(key, _)| *key != k);
            pairs.push((k, v));
        }
        RunConfig::from_pairs(pairs)
    }

    /// One seed for initialization, shuffling, dropout and generation.
    pub fn set_seed(&mut self, seed: u64) {
        self.model.seed = seed;
        self.train.seed = seed;
        self.data.seed = seed;
    }

    pub fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            seq_len: self.model.sequence_len(),
            height: self.model.height,
            width: self.model.width,
            sprites_per_sequence: self.data.sprites_per_sequence,
            speed_min: self.data.speed_min,
            speed_max: self.data.speed_max,
        }
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out = self.model.to_pairs();
        out.extend(self.train.to_pairs());
        let d = &self.data;
        let g = &self.gradcheck;
        for (k, v) in [
            ("count", d.count.to_string()),
            ("data_seed", d.seed.to_string()),
            ("sprites_per_sequence", d.sprites_per_sequence.to_string()),
            ("speed_min", d.speed_min.to_string()),
            ("speed_max", d.speed_max.to_string()),
            ("sprite_size", d.sprite_size.to_string()),
            ("gradcheck_trials", g.trials.to_string()),
            ("gradcheck_samples", g.samples.to_string()),
            ("gradcheck_step", g.step.to_string()),
            ("gradcheck_tolerance", g.tolerance.to_string()),
            ("predict_index", self.predict_index.to_string()),
        ] {
            out.push((k.to_string(), v));
        }
        for (k, p) in [
            ("dataset", &self.dataset),
            ("checkpoint", &self.checkpoint),
            ("idx", &self.idx),
        ] {
            if let Some(p) = p {
                out.push((k.to_string(), p.display().to_string()));
            }
        }
        out
    }

    pub fn render(&self) -> String {
        kv::render(&self.to_pairs())
    }
}
