use serde::{Deserialize, Serialize};

use super::normals::{depth_normals_knn, CovarianceCenter};
use crate::error::{Error, Result};
use crate::geometry::{
    angle_deg_unchecked, is_valid_normal, CameraIntrinsics, DepthMap, NormalFrame, NormalMap,
    RigidPose,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DncConfig {
    /// Neighbours per PCA normal.
    pub k: usize,
    /// Degrees.
    pub tau_d: f64,
    pub center: CovarianceCenter,
}

impl Default for DncConfig {
    fn default() -> Self {
        Self {
            k: 200,
            tau_d: 10.0,
            center: CovarianceCenter::default(),
        }
    }
}

impl DncConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::invalid(format!("k must be >= 3, got {}", self.k)));
        }
        if !(self.tau_d > 0.0 && self.tau_d < 90.0) {
            return Err(Error::invalid(format!(
                "tau_d must be in (0, 90), got {}",
                self.tau_d
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnrConfig {
    /// Degrees.
    pub tau_n: f64,
}

impl Default for AnrConfig {
    fn default() -> Self {
        Self { tau_n: 10.0 }
    }
}

impl AnrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_n > 0.0 && self.tau_n < 90.0) {
            return Err(Error::invalid(format!(
                "tau_n must be in (0, 90), got {}",
                self.tau_n
            )));
        }
        Ok(())
    }
}

/// Outcome of a per-pixel filter.
///
/// `kept + removed + invalid == width * height`. `invalid` counts pixels
/// that lacked the inputs to be tested at all.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub width: usize,
    pub height: usize,
    pub kept: usize,
    pub removed: usize,
    pub invalid: usize,
    #[serde(skip)]
    pub mask: Vec<bool>,
}

impl FilterReport {
    fn from_states(width: usize, height: usize, states: &[PixelState]) -> Self {
        let mut report = Self {
            width,
            height,
            kept: 0,
            removed: 0,
            invalid: 0,
            mask: Vec::with_capacity(states.len()),
        };
        for s in states {
            match s {
                PixelState::Kept => report.kept += 1,
                PixelState::Removed => report.removed += 1,
                PixelState::Invalid => report.invalid += 1,
            }
            report.mask.push(*s == PixelState::Kept);
        }
        report
    }

    /// Fraction of testable pixels that were removed.
    pub fn removed_fraction(&self) -> f64 {
        let tested = self.kept + self.removed;
        if tested == 0 {
            0.0
        } else {
            self.removed as f64 / tested as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PixelState {
    Kept,
    Removed,
    Invalid,
}

fn classify(a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>, tau: f64) -> PixelState {
    if !is_valid_normal(a) || !is_valid_normal(b) {
        PixelState::Invalid
    } else if angle_deg_unchecked(a, b) <= tau {
        PixelState::Kept
    } else {
        PixelState::Removed
    }
}

/// Zeroes depth wherever the depth-derived normal `n_d` and the prior `n_p`
/// disagree by more than `tau_d`, or where either normal is missing.
pub fn dnc_filter_depth(
    depth: &DepthMap,
    n_d: &NormalMap,
    n_p: &NormalMap,
    cfg: &DncConfig,
) -> Result<(DepthMap, FilterReport)> {
    cfg.validate()?;
    n_d.check_compatible(n_p, "dnc_filter_depth")?;
    depth.check_same_size(n_d.width(), n_d.height(), "dnc_filter_depth")?;
    let states: Vec<PixelState> = depth
        .values()
        .iter()
        .zip(n_d.values().iter().zip(n_p.values()))
        .map(|(&d, (a, b))| {
            if d <= 0.0 {
                PixelState::Invalid
            } else {
                classify(a, b, cfg.tau_d)
            }
        })
        .collect();
    let report = FilterReport::from_states(depth.width(), depth.height(), &states);
    Ok((depth.masked(&report.mask), report))
}

/// Full per-frame depth filter: back-project, estimate KNN normals in world
/// space, bring the prior into world space, then apply
/// [`dnc_filter_depth`]. Also returns the depth-derived normals.
pub fn dnc_filter_frame(
    depth: &DepthMap,
    intr: &CameraIntrinsics,
    pose: &RigidPose,
    n_p: &NormalMap,
    cfg: &DncConfig,
) -> Result<(DepthMap, NormalMap, FilterReport)> {
    cfg.validate()?;
    let n_d = depth_normals_knn(depth, intr, pose, cfg.k, cfg.center)?;
    let n_p = match n_p.frame() {
        NormalFrame::World => n_p.clone(),
        NormalFrame::Camera => n_p.to_world(pose),
    };
    let (filtered, report) = dnc_filter_depth(depth, &n_d, &n_p, cfg)?;
    Ok((filtered, n_d, report))
}

/// Keeps the prior normal only where it agrees with the rendered normal
/// `n_hat` within `tau_n`; every surviving pixel is an exact copy of `n_p`.
pub fn anr_filter_normals(
    n_hat: &NormalMap,
    n_p: &NormalMap,
    cfg: &AnrConfig,
) -> Result<(NormalMap, FilterReport)> {
    cfg.validate()?;
    n_hat.check_compatible(n_p, "anr_filter_normals")?;
    let states: Vec<PixelState> = n_hat
        .values()
        .iter()
        .zip(n_p.values())
        .map(|(a, b)| classify(a, b, cfg.tau_n))
        .collect();
    let report = FilterReport::from_states(n_p.width(), n_p.height(), &states);
    Ok((n_p.masked(&report.mask), report))
}
