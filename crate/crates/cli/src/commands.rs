use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::Rng;
use sha2::{Digest, Sha256};
use tctn_core::datagen::{
    generate_dataset, load_dataset, load_idx, save_dataset, square_sprites, SequenceBatch,
};
use tctn_core::gradcheck::{jitter_parameters, model_gradcheck};
use tctn_core::harness::{evaluate, predict_autoregressive, train};
use tctn_core::model::{init_parameters, load_checkpoint, save_checkpoint};
use tctn_core::{MetricReport, TctnModel, Tensor};

use crate::config::RunConfig;
use crate::error::{io_err, CliError, CliResult};
use crate::pgm::write_pgm;

/// Name of the echoed effective config inside the output directory.
pub const CONFIG_ECHO: &str = "config.txt";

fn prepare_out(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(io_err)?;
    fs::write(out.join(CONFIG_ECHO), cfg.render()).map_err(io_err)
}

fn required<'a>(slot: &'a Option<PathBuf>, key: &'static str) -> CliResult<&'a Path> {
    slot.as_deref().ok_or(CliError::MissingKey(key))
}

fn open_dataset(cfg: &RunConfig) -> CliResult<SequenceBatch> {
    let path = required(&cfg.dataset, "dataset")?;
    load_dataset(path).map_err(|source| CliError::File {
        what: "dataset",
        path: path.into(),
        source,
    })
}

fn open_checkpoint(cfg: &RunConfig) -> CliResult<TctnModel<f32>> {
    let path = required(&cfg.checkpoint, "checkpoint")?;
    load_checkpoint(path).map_err(|source| CliError::File {
        what: "checkpoint",
        path: path.into(),
        source,
    })
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(io_err)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub struct DatagenSummary {
    pub path: PathBuf,
    pub count: usize,
    pub extents: Vec<usize>,
    pub sha256: String,
}

pub fn datagen(cfg: &RunConfig, out: &Path) -> CliResult<DatagenSummary> {
    if cfg.model.channels != 1 {
        return Err(tctn_core::TctnError::Argument(
            "generated sequences have one channel; set channels = 1".into(),
        )
        .into());
    }
    let sprites = match &cfg.idx {
        Some(p) => load_idx(p).map_err(|source| CliError::File {
            what: "IDX file",
            path: p.clone(),
            source,
        })?,
        None => square_sprites(cfg.data.sprite_size)?,
    };
    let batch = generate_dataset(&sprites, cfg.data.count, &cfg.generator(), cfg.data.seed)?;
    prepare_out(cfg, out)?;
    let path = out.join("dataset.tctd");
    save_dataset(&batch, &path)?;
    Ok(DatagenSummary {
        sha256: sha256_file(&path)?,
        count: batch.len(),
        extents: batch.tensor.shape().to_vec(),
        path,
    })
}

pub struct TrainSummary {
    pub steps: usize,
    pub final_loss: Option<f64>,
    pub best_epoch: usize,
}

/// Trains from fresh parameters and writes `checkpoint.tctn` (final),
/// `best.tctn` (lowest epoch loss) and `train_log.csv`.
pub fn train_cmd(
    cfg: &RunConfig,
    out: &Path,
    mut progress: impl FnMut(&str),
) -> CliResult<TrainSummary> {
    let data = open_dataset(cfg)?;
    let mut model = TctnModel::<f32>::new(&cfg.model)?;
    prepare_out(cfg, out)?;
    let report = train(&mut model, &data, &cfg.train, |r| {
        progress(&format!(
            "epoch {} step {} loss {:.6} lr {:.3e}",
            r.epoch, r.step, r.loss, r.lr
        ))
    })?;
    save_checkpoint(&model, out.join("checkpoint.tctn"))?;
    save_checkpoint(&report.best, out.join("best.tctn"))?;
    fs::write(out.join("train_log.csv"), report.log_csv()).map_err(io_err)?;
    Ok(TrainSummary {
        steps: report.steps,
        final_loss: report.log.last().map(|r| r.loss),
        best_epoch: report.best_epoch,
    })
}

/// Writes `metrics.csv`.
pub fn eval_cmd(cfg: &RunConfig, out: &Path) -> CliResult<MetricReport> {
    let model = open_checkpoint(cfg)?;
    let data = open_dataset(cfg)?;
    let report = evaluate(&model, &data)?;
    prepare_out(cfg, out)?;
    fs::write(out.join("metrics.csv"), report.to_csv()).map_err(io_err)?;
    Ok(report)
}

/// Rolls out sequence `predict_index` and writes one PGM per predicted
/// frame plus `prediction.tctd` holding all of them.
pub fn predict_cmd(cfg: &RunConfig, out: &Path) -> CliResult<Vec<PathBuf>> {
    let model = open_checkpoint(cfg)?;
    let data = open_dataset(cfg)?;
    let c = &model.config;
    if cfg.predict_index >= data.len() {
        return Err(tctn_core::TctnError::Argument(format!(
            "predict_index {} out of range for {} sequences",
            cfg.predict_index,
            data.len()
        ))
        .into());
    }
    if data.seq_len() < c.input_len || data.frame_shape() != (c.height, c.width, c.channels) {
        return Err(tctn_core::TctnError::Data(format!(
            "dataset frames {:?} x {} do not fit the checkpoint ({} context frames of {}x{}x{})",
            data.frame_shape(),
            data.seq_len(),
            c.input_len,
            c.height,
            c.width,
            c.channels
        ))
        .into());
    }
    let context = data.sequence(cfg.predict_index)?.narrow(0, c.input_len)?;
    let preds = predict_autoregressive(&model, &context)?;
    prepare_out(cfg, out)?;
    let mut written = Vec::new();
    for k in 0..c.horizon {
        let frame = preds
            .narrow(k, k + 1)?
            .reshape(vec![c.height, c.width, c.channels])?;
        let path = out.join(format!("pred_{:02}.pgm", k + 1));
        let file = fs::File::create(&path).map_err(io_err)?;
        write_pgm(&frame, BufWriter::new(file)).map_err(io_err)?;
        written.push(path);
    }
    let mut shape = vec![1];
    shape.extend_from_slice(preds.shape());
    save_dataset(
        &SequenceBatch::new(preds.reshape(shape)?)?,
        out.join("prediction.tctd"),
    )?;
    Ok(written)
}

pub struct GradcheckSummary {
    pub max_error: f64,
    pub worst: String,
    pub checked: usize,
}

/// Full-model finite-difference check in double precision with dropout off.
/// Each trial jitters the parameters and draws fresh frames.
pub fn gradcheck_cmd(
    cfg: &RunConfig,
    out: &Path,
    mut progress: impl FnMut(&str),
) -> CliResult<GradcheckSummary> {
    prepare_out(cfg, out)?;
    let g = &cfg.gradcheck;
    let mut model_cfg = cfg.model.clone();
    model_cfg.dropout = 0.0;
    let c = &model_cfg;
    let frame_shape = [c.train_len(), c.height, c.width, c.channels];
    let mut summary = GradcheckSummary {
        max_error: 0.0,
        worst: String::new(),
        checked: 0,
    };
    for trial in 0..g.trials as u64 {
        let seed = c.seed.wrapping_add(trial);
        let mut model = init_parameters::<f64>(c, seed)?;
        jitter_parameters(&mut model, 0.3, seed);
        let mut rng = tctn_core::datagen::sequence_rng(seed, 1 << 32);
        let frames = Tensor::from_fn(&frame_shape, |_| rng.gen_range(0.0..1.0));
        let probe = Tensor::from_fn(&frame_shape, |_| rng.gen_range(-1.0..1.0));
        let r = model_gradcheck(&model, &frames, &probe, g.samples, g.step, seed)?;
        progress(&format!(
            "trial {trial}: max relative error {:.3e} ({})",
            r.max_error, r.worst
        ));
        if r.max_error >= summary.max_error {
            summary.max_error = r.max_error;
            summary.worst = r.worst;
        }
        summary.checked += r.checked;
    }
    if !(summary.max_error < g.tolerance) {
        return Err(CliError::GradcheckFailed {
            error: summary.max_error,
            worst: summary.worst,
            tolerance: g.tolerance,
        });
    }
    Ok(summary)
}
