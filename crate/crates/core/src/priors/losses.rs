use serde::{Deserialize, Serialize};

use super::ssim::{check_images, ssim};
use crate::error::{Error, Result};
use crate::geometry::{is_valid_normal, ColorImage, DepthMap, NormalMap};

/// Weight of the structural term in the color loss.
pub const SSIM_WEIGHT: f64 = 0.2;

/// Step thresholds and weights of the regularisation terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSchedule {
    /// Depth target switches from raw to filtered at this step.
    pub t_d: u64,
    /// Normal target switches from prior to filtered at this step.
    pub t_n: u64,
    /// Normal loss is zero before this step.
    pub normal_start: u64,
    pub total_steps: u64,
    pub lambda_d: f64,
    pub lambda_n: f64,
}

impl Default for LossSchedule {
    fn default() -> Self {
        Self {
            t_d: 7000,
            t_n: 15000,
            normal_start: 7000,
            total_steps: 30000,
            lambda_d: 0.2,
            lambda_n: 0.1,
        }
    }
}

impl LossSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.normal_start <= self.t_n && self.t_n <= self.total_steps) {
            return Err(Error::invalid(format!(
                "schedule requires normal_start <= t_n <= total_steps, got {} / {} / {}",
                self.normal_start, self.t_n, self.total_steps
            )));
        }
        if self.t_d > self.total_steps {
            return Err(Error::invalid(format!(
                "t_d ({}) exceeds total_steps ({})",
                self.t_d, self.total_steps
            )));
        }
        if !(self.lambda_d >= 0.0 && self.lambda_n >= 0.0)
            || !self.lambda_d.is_finite()
            || !self.lambda_n.is_finite()
        {
            return Err(Error::invalid(
                "loss weights must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// Loss values at one step, with the number of pixels each term averaged
/// over.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub step: u64,
    pub depth_loss: f64,
    pub normal_loss: f64,
    pub color_loss: f64,
    pub total: f64,
    pub depth_pixels: usize,
    pub normal_pixels: usize,
    pub color_pixels: usize,
}

/// Masked mean L1 depth loss and the number of supervised pixels. Pixels
/// whose target is 0 are excluded.
pub fn depth_loss_counted(
    d_hat: &DepthMap,
    d_raw: &DepthMap,
    d_filtered: &DepthMap,
    step: u64,
    sched: &LossSchedule,
) -> Result<(f64, usize)> {
    d_raw.check_same_size(d_hat.width(), d_hat.height(), "depth_loss")?;
    d_filtered.check_same_size(d_hat.width(), d_hat.height(), "depth_loss")?;
    let target = if step < sched.t_d { d_raw } else { d_filtered };
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, t) in d_hat.values().iter().zip(target.values()) {
        if *t > 0.0 {
            sum += (p - t).abs();
            count += 1;
        }
    }
    Ok((if count == 0 { 0.0 } else { sum / count as f64 }, count))
}

pub fn depth_loss(
    d_hat: &DepthMap,
    d_raw: &DepthMap,
    d_filtered: &DepthMap,
    step: u64,
    sched: &LossSchedule,
) -> Result<f64> {
    depth_loss_counted(d_hat, d_raw, d_filtered, step, sched).map(|(l, _)| l)
}

/// Masked mean of the per-pixel component-wise L1 normal difference.
pub fn normal_loss_counted(
    n_hat: &NormalMap,
    n_p: &NormalMap,
    n_f: &NormalMap,
    step: u64,
    sched: &LossSchedule,
) -> Result<(f64, usize)> {
    n_hat.check_compatible(n_p, "normal_loss")?;
    n_hat.check_compatible(n_f, "normal_loss")?;
    if step < sched.normal_start {
        return Ok((0.0, 0));
    }
    let target = if step < sched.t_n { n_p } else { n_f };
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, t) in n_hat.values().iter().zip(target.values()) {
        if is_valid_normal(t) {
            sum += (p - t).abs().sum();
            count += 1;
        }
    }
    Ok((if count == 0 { 0.0 } else { sum / count as f64 }, count))
}

pub fn normal_loss(
    n_hat: &NormalMap,
    n_p: &NormalMap,
    n_f: &NormalMap,
    step: u64,
    sched: &LossSchedule,
) -> Result<f64> {
    normal_loss_counted(n_hat, n_p, n_f, step, sched).map(|(l, _)| l)
}

/// `(1 − λ)·L1 + λ·(1 − SSIM)/2` with λ = 0.2.
pub fn color_loss(rendered: &ColorImage, reference: &ColorImage) -> Result<f64> {
    check_images(rendered, reference)?;
    let mut l1 = 0.0;
    for (a, b) in rendered.pixels().iter().zip(reference.pixels()) {
        l1 += (a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs();
    }
    l1 /= (3 * rendered.pixels().len()) as f64;
    let s = ssim(rendered, reference)?;
    Ok((1.0 - SSIM_WEIGHT) * l1 + SSIM_WEIGHT * (1.0 - s) / 2.0)
}

pub fn total_loss(color: f64, depth: f64, normal: f64, sched: &LossSchedule) -> f64 {
    color + sched.lambda_d * depth + sched.lambda_n * normal
}

/// Maps consumed by [`evaluate_losses`].
pub struct LossInputs<'a> {
    pub d_hat: &'a DepthMap,
    pub d_raw: &'a DepthMap,
    pub d_filtered: &'a DepthMap,
    pub n_hat: &'a NormalMap,
    pub n_p: &'a NormalMap,
    pub n_f: &'a NormalMap,
    /// Rendered and reference color; the color term is 0 without them.
    pub color: Option<(&'a ColorImage, &'a ColorImage)>,
}

pub fn evaluate_losses(
    inputs: &LossInputs<'_>,
    step: u64,
    sched: &LossSchedule,
) -> Result<LossReport> {
    sched.validate()?;
    let (depth, depth_pixels) =
        depth_loss_counted(inputs.d_hat, inputs.d_raw, inputs.d_filtered, step, sched)?;
    let (normal, normal_pixels) =
        normal_loss_counted(inputs.n_hat, inputs.n_p, inputs.n_f, step, sched)?;
    let (color, color_pixels) = match inputs.color {
        Some((r, g)) => (color_loss(r, g)?, r.pixels().len()),
        None => (0.0, 0),
    };
    Ok(LossReport {
        step,
        depth_loss: depth,
        normal_loss: normal,
        color_loss: color,
        total: total_loss(color, depth, normal, sched),
        depth_pixels,
        normal_pixels,
        color_pixels,
    })
}
