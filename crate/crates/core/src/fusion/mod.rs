//! Depth-aware truncated signed distance isofunction over posed depth and
//! normal maps.
//!
//! For a world point `x` and frame `j` with center `p_j` and principal axis
//! `c_z`, `s_j = d_j(x) − (x − p_j)·c_z` where `d_j(x)` is the interpolated
//! depth at the projection of `x`. Contributions with `s_j < −τ·d_j(x)` are
//! dropped and positive ones are clamped to `τ·d_j(x)`. The isofunction is
//! `f(x) = Σ_j w_j s_j`, positive in observed free space.

mod edge;

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

pub use edge::{edge_filter_depth, edge_filter_frame, edge_mask};

use crate::error::{Error, Result};
use crate::geometry::{
    backproject, is_valid_normal, sample_depth, sample_normal, CameraIntrinsics, DepthMap, Frame,
    NormalFrame, NormalMap, PointCloud, RigidPose, Vec3,
};
use crate::isooctree::ScalarField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Truncation distance as a fraction of observed depth.
    pub tau_rel: f64,
    /// Depth-discontinuity threshold as a fraction of depth.
    pub edge_rel: f64,
    /// Frames whose normal deviates more than this from the reference
    /// normal get zero weight, in degrees.
    pub normal_cutoff_deg: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            tau_rel: 0.05,
            edge_rel: 0.02,
            normal_cutoff_deg: 60.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_rel > 0.0 && self.tau_rel < 1.0) {
            return Err(Error::invalid(format!(
                "tau_rel must be in (0, 1), got {}",
                self.tau_rel
            )));
        }
        if !(self.edge_rel > 0.0 && self.edge_rel.is_finite()) {
            return Err(Error::invalid(format!(
                "edge_rel must be positive, got {}",
                self.edge_rel
            )));
        }
        if !(self.normal_cutoff_deg > 0.0 && self.normal_cutoff_deg <= 90.0) {
            return Err(Error::invalid(format!(
                "normal_cutoff_deg must be in (0, 90], got {}",
                self.normal_cutoff_deg
            )));
        }
        Ok(())
    }
}

/// One frame ready for fusion: depth and world-frame normals share a
/// validity mask that has already been edge-filtered.
#[derive(Clone, Debug)]
pub struct FusionFrame {
    pub id: String,
    pub intrinsics: CameraIntrinsics,
    pub pose: RigidPose,
    pub depth: DepthMap,
    pub normals: NormalMap,
}

impl FusionFrame {
    /// Edge-filters depth and normals with one mask and moves the normals to
    /// the world frame.
    pub fn prepare(
        id: impl Into<String>,
        intrinsics: CameraIntrinsics,
        pose: RigidPose,
        depth: &DepthMap,
        normals: &NormalMap,
        cfg: &FusionConfig,
    ) -> Result<Self> {
        intrinsics.validate()?;
        depth.check_same_size(intrinsics.width, intrinsics.height, "fusion depth")?;
        depth.check_same_size(normals.width(), normals.height(), "fusion normals")?;
        let (depth, normals, _) = edge_filter_frame(depth, normals, cfg.edge_rel);
        let normals = match normals.frame() {
            NormalFrame::World => normals,
            NormalFrame::Camera => normals.to_world(&pose),
        };
        Ok(Self {
            id: id.into(),
            intrinsics,
            pose,
            depth,
            normals,
        })
    }

    pub fn from_frame(frame: &Frame, cfg: &FusionConfig) -> Result<Self> {
        Self::prepare(
            frame.id.clone(),
            frame.intrinsics,
            frame.pose,
            &frame.depth,
            &frame.normals,
            cfg,
        )
    }

    /// Truncated signed difference at `x` and the observed depth, or `None`
    /// when `x` is not observed or lies too far behind the surface.
    pub fn tsdf(&self, x: &Vec3, tau_rel: f64) -> Option<(f64, f64)> {
        let cam = self.pose.inverse_transform_point(x);
        let (u, v, z) = self.intrinsics.project(&cam)?;
        let d = sample_depth(&self.depth, u, v)?;
        let s = d - z;
        let band = tau_rel * d;
        if s < -band {
            return None;
        }
        Some((s.min(band), d))
    }

    /// Full per-frame observation of `x`, including the interpolated normal
    /// and viewing ray.
    pub fn observe(&self, x: &Vec3, tau_rel: f64) -> Option<Observation> {
        let cam = self.pose.inverse_transform_point(x);
        let (u, v, z) = self.intrinsics.project(&cam)?;
        let d = sample_depth(&self.depth, u, v)?;
        let s = d - z;
        let band = tau_rel * d;
        if s < -band {
            return None;
        }
        let normal = sample_normal(&self.normals, u, v)?;
        let ray = (x - self.pose.center()).normalize();
        Some(Observation {
            s: s.min(band),
            depth: d,
            normal,
            ray,
        })
    }
}

/// Per-frame quantities entering the weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    /// Truncated signed difference.
    pub s: f64,
    /// Observed depth `d_j(x)`.
    pub depth: f64,
    /// World-frame unit normal.
    pub normal: Vec3,
    /// Unit ray from the camera center to `x`.
    pub ray: Vec3,
}

impl Observation {
    /// First-pass weight `s·(−r·n)/d²`.
    #[inline]
    pub fn selection_weight(&self) -> f64 {
        self.s * (-self.ray.dot(&self.normal)) / (self.depth * self.depth)
    }
}

/// Weight of one observation given the reference normal chosen in the
/// first pass.
pub trait SecondPassWeight: Send + Sync + Debug {
    fn weight(&self, obs: &Observation, reference: &Vec3, cfg: &FusionConfig) -> f64;
}

/// `max(0, n_j·n)·max(0, −r_j·n)/d_j²`, zero beyond the normal cutoff.
#[derive(Clone, Copy, Debug, Default)]
pub struct NormalAgreementWeight;

impl SecondPassWeight for NormalAgreementWeight {
    fn weight(&self, obs: &Observation, n: &Vec3, cfg: &FusionConfig) -> f64 {
        let agree = obs.normal.dot(n);
        if agree < cfg.normal_cutoff_deg.to_radians().cos() {
            return 0.0;
        }
        agree.max(0.0) * (-obs.ray.dot(n)).max(0.0) / (obs.depth * obs.depth)
    }
}

/// Frames plus parameters defining the isofunction.
#[derive(Debug)]
pub struct FusionVolume {
    frames: Vec<FusionFrame>,
    config: FusionConfig,
    weight: Box<dyn SecondPassWeight>,
}

impl FusionVolume {
    pub fn new(frames: Vec<FusionFrame>, config: FusionConfig) -> Result<Self> {
        Self::with_weight(frames, config, Box::new(NormalAgreementWeight))
    }

    pub fn with_weight(
        frames: Vec<FusionFrame>,
        config: FusionConfig,
        weight: Box<dyn SecondPassWeight>,
    ) -> Result<Self> {
        config.validate()?;
        for f in &frames {
            f.depth
                .check_same_size(f.intrinsics.width, f.intrinsics.height, "fusion frame")?;
            if f.normals.frame() != NormalFrame::World {
                return Err(Error::invalid(format!(
                    "frame {}: fusion normals must be in world frame",
                    f.id
                )));
            }
        }
        Ok(Self {
            frames,
            config,
            weight,
        })
    }

    pub fn frames(&self) -> &[FusionFrame] {
        &self.frames
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    /// Back-projection of every frame's depth, tagged with its frame index.
    pub fn hint_cloud(&self) -> Result<PointCloud> {
        let mut parts = Vec::with_capacity(self.frames.len());
        for (i, f) in self.frames.iter().enumerate() {
            let mut c = backproject(&f.depth, &f.intrinsics, &f.pose)?;
            c.sources = Some(vec![i as u32; c.len()]);
            parts.push(c);
        }
        Ok(PointCloud::concat(&parts))
    }

    fn observations(&self, x: &Vec3) -> Vec<Observation> {
        self.frames
            .iter()
            .filter_map(|f| f.observe(x, self.config.tau_rel))
            .collect()
    }

    /// Two-pass evaluation of `f(x)`; `None` when no frame contributes
    /// positive weight.
    pub fn eval(&self, x: &Vec3) -> Option<f64> {
        let obs = self.observations(x);
        let n = select_normal(&obs)?;
        let mut sum_w = 0.0;
        let mut f = 0.0;
        for o in &obs {
            let w = self.weight.weight(o, &n, &self.config);
            sum_w += w;
            f += w * o.s;
        }
        (sum_w > 0.0).then_some(f)
    }
}

impl ScalarField for FusionVolume {
    fn value(&self, p: &Vec3) -> Option<f64> {
        self.eval(p)
    }
}

/// Normal of the observation with the largest first-pass weight; ties go to
/// the earliest.
fn select_normal(obs: &[Observation]) -> Option<Vec3> {
    let mut best: Option<(f64, Vec3)> = None;
    for o in obs {
        let w = o.selection_weight();
        if best.is_none_or(|(bw, _)| w > bw) {
            best = Some((w, o.normal));
        }
    }
    best.map(|(_, n)| n).filter(is_valid_normal)
}

/// Truncated contribution of one frame at `x`.
pub fn tsdf_contribution(frame: &FusionFrame, x: &Vec3, cfg: &FusionConfig) -> Option<f64> {
    frame.tsdf(x, cfg.tau_rel).map(|(s, _)| s)
}

/// Reference normal `n(x)` from the first weighting pass.
pub fn max_weight_normal(frames: &[FusionFrame], x: &Vec3, cfg: &FusionConfig) -> Option<Vec3> {
    let obs: Vec<Observation> = frames
        .iter()
        .filter_map(|f| f.observe(x, cfg.tau_rel))
        .collect();
    select_normal(&obs)
}

pub fn isofunction_eval(volume: &FusionVolume, x: &Vec3) -> Option<f64> {
    volume.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(50.0, 50.0, 31.5, 23.5, 64, 48).unwrap()
    }

    /// Fronto-parallel plane at distance `d` seen by a camera at `eye`
    /// looking along +z.
    fn plane_frame(id: &str, eye: Vec3, d: f64) -> FusionFrame {
        let pose = RigidPose::look_at(eye, eye + Vec3::z(), Vec3::y()).unwrap();
        let depth = DepthMap::from_fn(64, 48, |_, _| d).unwrap();
        let normals =
            NormalMap::from_vec(64, 48, NormalFrame::World, vec![-Vec3::z(); 64 * 48]).unwrap();
        FusionFrame::prepare(id, intr(), pose, &depth, &normals, &FusionConfig::default()).unwrap()
    }

    #[test]
    fn contribution_examples() {
        let cfg = FusionConfig::default();
        let f = plane_frame("a", Vec3::zeros(), 2.0);
        assert_eq!(
            tsdf_contribution(&f, &Vec3::new(0.0, 0.0, 2.0), &cfg),
            Some(0.0)
        );
        // 0.2 m behind: below -0.1
        assert_eq!(tsdf_contribution(&f, &Vec3::new(0.0, 0.0, 2.2), &cfg), None);
        let s = tsdf_contribution(&f, &Vec3::new(0.0, 0.0, 1.95), &cfg).unwrap();
        assert!((s - 0.05).abs() < 1e-12);
        // far in front: clamped to +tau*d
        let s = tsdf_contribution(&f, &Vec3::new(0.0, 0.0, 1.0), &cfg).unwrap();
        assert!((s - 0.1).abs() < 1e-12);
        // behind the camera and outside the image
        assert_eq!(
            tsdf_contribution(&f, &Vec3::new(0.0, 0.0, -1.0), &cfg),
            None
        );
        assert_eq!(
            tsdf_contribution(&f, &Vec3::new(50.0, 0.0, 1.0), &cfg),
            None
        );
    }

    #[test]
    fn nearer_frame_wins_selection() {
        let cfg = FusionConfig::default();
        // same plane z = 2 seen from distance 2 and 1; x slightly in front
        let far = plane_frame("far", Vec3::zeros(), 2.0);
        let mut near = plane_frame("near", Vec3::new(0.0, 0.0, 1.0), 1.0);
        let tilted = Vec3::new(0.1, 0.0, -1.0).normalize();
        near.normals =
            NormalMap::from_vec(64, 48, NormalFrame::World, vec![tilted; 64 * 48]).unwrap();
        let x = Vec3::new(0.0, 0.0, 1.98);
        let n = max_weight_normal(&[far.clone(), near.clone()], &x, &cfg).unwrap();
        assert!((n - tilted).norm() < 1e-9);
        let n = max_weight_normal(std::slice::from_ref(&far), &x, &cfg).unwrap();
        assert!((n + Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn edge_on_normal_never_selected() {
        let cfg = FusionConfig::default();
        let frontal = plane_frame("a", Vec3::zeros(), 2.0);
        let mut grazing = plane_frame("b", Vec3::new(0.0, 0.0, 1.0), 1.0);
        grazing.normals =
            NormalMap::from_vec(64, 48, NormalFrame::World, vec![Vec3::x(); 64 * 48]).unwrap();
        let x = Vec3::new(0.0, 0.0, 1.99);
        let n = max_weight_normal(&[grazing, frontal], &x, &cfg).unwrap();
        assert!((n + Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn single_frame_offset_matches_formula() {
        let d = 2.0;
        let vol = FusionVolume::new(
            vec![plane_frame("a", Vec3::zeros(), d)],
            FusionConfig::default(),
        )
        .unwrap();
        assert_eq!(vol.eval(&Vec3::new(0.0, 0.0, d)), Some(0.0));
        for eps in [1e-3, 0.01, 0.05] {
            let x = Vec3::new(0.0, 0.0, d - eps);
            // w = (n·n)(−r·n)/d² = 1/d²
            let expect = eps / (d * d);
            assert!((vol.eval(&x).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn two_views_of_one_plane_vanish_on_it() {
        let a = plane_frame("a", Vec3::zeros(), 2.0);
        let b = plane_frame("b", Vec3::new(0.1, 0.05, 0.5), 1.5);
        let vol = FusionVolume::new(vec![a, b], FusionConfig::default()).unwrap();
        let f = vol.eval(&Vec3::new(0.05, 0.02, 2.0)).unwrap();
        assert!(f.abs() < 1e-12);
    }

    #[test]
    fn half_distance_carries_four_times_weight() {
        let w = NormalAgreementWeight;
        let cfg = FusionConfig::default();
        let n = -Vec3::z();
        let mk = |d: f64| Observation {
            s: 0.01,
            depth: d,
            normal: n,
            ray: Vec3::z(),
        };
        let ratio = w.weight(&mk(1.0), &n, &cfg) / w.weight(&mk(2.0), &n, &cfg);
        assert_eq!(ratio, 4.0);
    }

    #[test]
    fn cutoff_rejects_disagreeing_normals() {
        let w = NormalAgreementWeight;
        let cfg = FusionConfig::default();
        let n = -Vec3::z();
        let tilt = |deg: f64| {
            let t = deg.to_radians();
            Observation {
                s: 0.0,
                depth: 1.0,
                normal: Vec3::new(t.sin(), 0.0, -t.cos()),
                ray: Vec3::z(),
            }
        };
        assert!(w.weight(&tilt(59.0), &n, &cfg) > 0.0);
        assert_eq!(w.weight(&tilt(61.0), &n, &cfg), 0.0);
    }

    #[test]
    fn duplicated_frames_keep_sign() {
        let a = plane_frame("a", Vec3::zeros(), 2.0);
        let one = FusionVolume::new(vec![a.clone()], FusionConfig::default()).unwrap();
        let two = FusionVolume::new(vec![a.clone(), a], FusionConfig::default()).unwrap();
        for z in [1.9, 1.97, 2.0, 2.03, 2.09] {
            let x = Vec3::new(0.1, -0.05, z);
            let (f1, f2) = (one.eval(&x).unwrap(), two.eval(&x).unwrap());
            assert_eq!(f1.signum(), f2.signum());
            assert!((f2 - 2.0 * f1).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = FusionConfig {
            tau_rel: 0.0,
            ..Default::default()
        };
        assert!(FusionVolume::new(Vec::new(), bad).is_err());
    }
}
