//! Frame quality metrics: PSNR, SSIM and per-frame absolute-error sums.
//! Frames are `[H, W]` or `[H, W, C]` tensors in `[0, 1]`.

use std::fmt::Write as _;

use crate::error::{Result, TctnError};
use crate::tensor::{ensure_same_shape, Tensor};

/// PSNR reported for identical frames.
pub const PSNR_CAP_DB: f64 = 100.0;

fn frame_dims(frame: &Tensor<f32>) -> Result<(usize, usize, usize)> {
    match *frame.shape() {
        [h, w] => Ok((h, w, 1)),
        [h, w, c] => Ok((h, w, c)),
        ref s => Err(TctnError::shape(format!(
            "frame must be [H,W] or [H,W,C], got {s:?}"
        ))),
    }
}

pub fn mse(pred: &Tensor<f32>, truth: &Tensor<f32>) -> Result<f64> {
    ensure_same_shape(pred, truth, "mse")?;
    let total: f64 = pred
        .data()
        .iter()
        .zip(truth.data())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    Ok(total / pred.numel() as f64)
}

/// `10 log10(1 / mse)` with peak 1, capped at [`PSNR_CAP_DB`].
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

pub fn psnr(pred: &Tensor<f32>, truth: &Tensor<f32>) -> Result<f64> {
    Ok(psnr_from_mse(mse(pred, truth)?))
}

/// Sum of absolute pixel differences over the frame.
pub fn mae(pred: &Tensor<f32>, truth: &Tensor<f32>) -> Result<f64> {
    ensure_same_shape(pred, truth, "mae")?;
    Ok(pred
        .data()
        .iter()
        .zip(truth.data())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let center = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable valid-mode Gaussian filter of an `h × w` plane.
fn blur_valid(plane: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, &g)| g * plane[y * w + x + i])
                .sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, &g)| g * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all valid Gaussian windows, averaged across channels.
pub fn ssim_with(pred: &Tensor<f32>, truth: &Tensor<f32>, params: &SsimParams) -> Result<f64> {
    ensure_same_shape(pred, truth, "ssim")?;
    let (h, w, c) = frame_dims(pred)?;
    if h < params.window || w < params.window {
        return Err(TctnError::argument(format!(
            "{h}x{w} frame is smaller than the {0}x{0} SSIM window",
            params.window
        )));
    }
    let kernel = gaussian_kernel(params.window, params.sigma);
    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);

    let mut total = 0.0;
    for ch in 0..c {
        let plane = |t: &Tensor<f32>| -> Vec<f64> {
            t.data()
                .iter()
                .skip(ch)
                .step_by(c)
                .map(|&v| v as f64)
                .collect()
        };
        let (x, y) = (plane(pred), plane(truth));
        let product =
            |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p * q).collect() };
        let mu_x = blur_valid(&x, h, w, &kernel);
        let mu_y = blur_valid(&y, h, w, &kernel);
        let xx = blur_valid(&product(&x, &x), h, w, &kernel);
        let yy = blur_valid(&product(&y, &y), h, w, &kernel);
        let xy = blur_valid(&product(&x, &y), h, w, &kernel);
        let mut sum = 0.0;
        for i in 0..mu_x.len() {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = xx[i] - mx * mx;
            let var_y = yy[i] - my * my;
            let cov = xy[i] - mx * my;
            sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (var_x + var_y + c2));
        }
        total += sum / mu_x.len() as f64;
    }
    Ok(total / c as f64)
}

pub fn ssim(pred: &Tensor<f32>, truth: &Tensor<f32>) -> Result<f64> {
    ssim_with(pred, truth, &SsimParams::default())
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrameMetrics {
    pub psnr: f64,
    pub ssim: f64,
    pub mae: f64,
}

impl FrameMetrics {
    pub fn compute(pred: &Tensor<f32>, truth: &Tensor<f32>) -> Result<Self> {
        Ok(FrameMetrics {
            psnr: psnr(pred, truth)?,
            ssim: ssim(pred, truth)?,
            mae: mae(pred, truth)?,
        })
    }
}

/// Metrics per prediction step `k = 1..=K` (averaged over sequences) and
/// their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub per_frame: Vec<FrameMetrics>,
    pub aggregate: FrameMetrics,
    pub sequences: usize,
}

impl MetricReport {
    /// CSV with header `frame_index,psnr,ssim,mae`, one row per step and a
    /// final row labelled `mean`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_index,psnr,ssim,mae\n");
        for (k, m) in self.per_frame.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", k + 1, m.psnr, m.ssim, m.mae);
        }
        let a = self.aggregate;
        let _ = writeln!(out, "mean,{},{},{}", a.psnr, a.ssim, a.mae);
        out
    }
}

/// Running sums of per-step metrics over sequences.
#[derive(Clone, Debug)]
pub struct MetricAccumulator {
    sums: Vec<FrameMetrics>,
    sequences: usize,
}

impl MetricAccumulator {
    pub fn new(horizon: usize) -> Self {
        MetricAccumulator {
            sums: vec![FrameMetrics::default(); horizon],
            sequences: 0,
        }
    }

    /// Adds one sequence worth of per-step metrics.
    pub fn push(&mut self, per_step: &[FrameMetrics]) -> Result<()> {
        if per_step.len() != self.sums.len() {
            return Err(TctnError::shape(format!(
                "expected {} steps, got {}",
                self.sums.len(),
                per_step.len()
            )));
        }
        for (acc, m) in self.sums.iter_mut().zip(per_step) {
            acc.psnr += m.psnr;
            acc.ssim += m.ssim;
            acc.mae += m.mae;
        }
        self.sequences += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<MetricReport> {
        if self.sequences == 0 {
            return Err(TctnError::argument("no sequences evaluated"));
        }
        let n = self.sequences as f64;
        let per_frame: Vec<FrameMetrics> = self
            .sums
            .iter()
            .map(|s| FrameMetrics {
                psnr: s.psnr / n,
                ssim: s.ssim / n,
                mae: s.mae / n,
            })
            .collect();
        let k = per_frame.len() as f64;
        let aggregate = FrameMetrics {
            psnr: per_frame.iter().map(|m| m.psnr).sum::<f64>() / k,
            ssim: per_frame.iter().map(|m| m.ssim).sum::<f64>() / k,
            mae: per_frame.iter().map(|m| m.mae).sum::<f64>() / k,
        };
        Ok(MetricReport {
            per_frame,
            aggregate,
            sequences: self.sequences,
        })
    }
}
