//! Analytic scenes for ground truth: signed-distance primitives, sphere
//! tracing, seeded sensor noise and reference meshes.
//!
//! The scene SDF is positive in free space and negative inside solids, the
//! same convention as the fused isofunction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthMap, Frame, NormalFrame, NormalMap, RigidPose, Vec3};
use crate::isooctree::{uniform_marching_cubes, Aabb};
use crate::mesh::TriangleMesh;

/// Solid regions; each SDF is exact and 1-Lipschitz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Primitive {
    /// Half-space `normal·x < offset`.
    Plane {
        normal: Vec3,
        offset: f64,
    },
    Sphere {
        center: Vec3,
        radius: f64,
    },
    /// Axis-aligned box. `inverted` makes everything outside it solid.
    Box {
        center: Vec3,
        half: Vec3,
        #[serde(default)]
        inverted: bool,
    },
}

impl Primitive {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            Primitive::Plane { normal, offset } => {
                (normal.norm() - 1.0).abs() < 1e-9 && offset.is_finite()
            }
            Primitive::Sphere { center, radius } => {
                *radius > 0.0 && center.iter().all(|c| c.is_finite())
            }
            Primitive::Box { center, half, .. } => {
                half.iter().all(|h| *h > 0.0) && center.iter().all(|c| c.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid primitive {self:?}")))
        }
    }

    pub fn sdf(&self, p: &Vec3) -> f64 {
        match self {
            Primitive::Plane { normal, offset } => normal.dot(p) - offset,
            Primitive::Sphere { center, radius } => (p - center).norm() - radius,
            Primitive::Box {
                center,
                half,
                inverted,
            } => {
                let q = (p - center).abs() - half;
                let outside = q.map(|c| c.max(0.0)).norm();
                let d = outside + q.max().min(0.0);
                if *inverted {
                    -d
                } else {
                    d
                }
            }
        }
    }

    /// Unit gradient of [`Primitive::sdf`], pointing into free space.
    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        match self {
            Primitive::Plane { normal, .. } => *normal,
            Primitive::Sphere { center, .. } => {
                let d = p - center;
                let n = d.norm();
                if n > 0.0 {
                    d / n
                } else {
                    Vec3::z()
                }
            }
            Primitive::Box {
                center,
                half,
                inverted,
            } => {
                let rel = p - center;
                let q = rel.abs() - half;
                let sign = rel.map(|c| if c < 0.0 { -1.0 } else { 1.0 });
                let g = if q.iter().any(|c| *c > 0.0) {
                    q.map(|c| c.max(0.0)).normalize().component_mul(&sign)
                } else {
                    let k = q.imax();
                    let mut g = Vec3::zeros();
                    g[k] = sign[k];
                    g
                };
                if *inverted {
                    -g
                } else {
                    g
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub name: String,
    pub primitives: Vec<Primitive>,
    /// Region meshed for ground truth and evaluation.
    pub bounds: Aabb,
    pub intrinsics: CameraIntrinsics,
    pub cameras: Vec<RigidPose>,
}

/// Names accepted by [`SyntheticScene::named`].
pub const SCENE_NAMES: [&str; 3] = ["plane-sphere", "room", "floor-object"];

const TRACE_EPS: f64 = 1e-10;
const TRACE_MAX_STEPS: usize = 2000;
const TRACE_MAX_DIST: f64 = 100.0;

impl SyntheticScene {
    pub fn new(
        name: impl Into<String>,
        primitives: Vec<Primitive>,
        bounds: Aabb,
        intrinsics: CameraIntrinsics,
        cameras: Vec<RigidPose>,
    ) -> Result<Self> {
        let s = Self {
            name: name.into(),
            primitives,
            bounds,
            intrinsics,
            cameras,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.primitives.is_empty() {
            return Err(Error::invalid("scene has no primitives"));
        }
        for p in &self.primitives {
            p.validate()?;
        }
        self.bounds.validate()?;
        self.intrinsics.validate()
    }

    /// Built-in scenes. All use world +z up.
    pub fn named(name: &str, width: usize, height: usize) -> Result<Self> {
        let intr = CameraIntrinsics::from_fov(width, height, 70.0)?;
        let up = Vec3::z();
        let look = |eye: Vec3, target: Vec3| RigidPose::look_at(eye, target, -up);
        match name {
            "plane-sphere" => {
                let prims = vec![
                    Primitive::Plane {
                        normal: up,
                        offset: 0.0,
                    },
                    Primitive::Sphere {
                        center: Vec3::new(0.0, 0.0, 0.35),
                        radius: 0.3,
                    },
                ];
                let cams = (0..4)
                    .map(|i| {
                        let a = i as f64 * std::f64::consts::FRAC_PI_2 + 0.3;
                        look(
                            Vec3::new(1.4 * a.cos(), 1.4 * a.sin(), 1.3),
                            Vec3::new(0.0, 0.0, 0.2),
                        )
                    })
                    .collect::<Result<_>>()?;
                let bounds = Aabb::new(Vec3::new(-1.0, -1.0, -0.1), Vec3::new(1.0, 1.0, 0.8))?;
                Self::new(name, prims, bounds, intr, cams)
            }
            "room" => {
                let half = Vec3::new(2.0, 1.5, 1.25);
                let center = Vec3::new(0.0, 0.0, 1.25);
                let prims = vec![
                    Primitive::Box {
                        center,
                        half,
                        inverted: true,
                    },
                    Primitive::Sphere {
                        center: Vec3::new(0.4, -0.2, 0.9),
                        radius: 0.4,
                    },
                ];
                // four corner views looking across the room, four views of
                // the sphere from alternating heights
                let mut cams = Vec::new();
                for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
                    let eye = Vec3::new(1.6 * sx, 1.1 * sy, 1.9);
                    cams.push(look(eye, Vec3::new(-1.2 * sx, -0.9 * sy, 0.6))?);
                }
                for i in 0..4 {
                    let a = i as f64 * std::f64::consts::FRAC_PI_2 + std::f64::consts::FRAC_PI_4;
                    let eye = Vec3::new(
                        0.4 + 1.3 * a.cos(),
                        -0.2 + 1.1 * a.sin(),
                        if i % 2 == 0 { 0.5 } else { 2.0 },
                    );
                    cams.push(look(eye, Vec3::new(0.4, -0.2, 0.9))?);
                }
                let pad = Vec3::repeat(0.1);
                let bounds = Aabb::new(center - half - pad, center + half + pad)?;
                Self::new(name, prims, bounds, intr, cams)
            }
            "floor-object" => {
                let prims = vec![
                    Primitive::Plane {
                        normal: up,
                        offset: 0.0,
                    },
                    Primitive::Sphere {
                        center: Vec3::new(0.0, 0.0, 0.1),
                        radius: 0.12,
                    },
                ];
                let cams = (0..6)
                    .map(|i| {
                        let a = i as f64 * std::f64::consts::PI / 3.0;
                        look(
                            Vec3::new(1.2 * a.cos(), 1.2 * a.sin(), 1.6),
                            Vec3::new(0.0, 0.0, 0.0),
                        )
                    })
                    .collect::<Result<_>>()?;
                let bounds = Aabb::new(Vec3::new(-1.0, -1.0, -0.1), Vec3::new(1.0, 1.0, 0.3))?;
                Self::new(name, prims, bounds, intr, cams)
            }
            other => Err(Error::invalid(format!(
                "unknown scene {other:?}; expected one of {}",
                SCENE_NAMES.join(", ")
            ))),
        }
    }

    pub fn sdf(&self, p: &Vec3) -> f64 {
        self.primitives
            .iter()
            .map(|s| s.sdf(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Gradient of the closest primitive.
    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        let mut best = (f64::INFINITY, Vec3::z());
        for s in &self.primitives {
            let d = s.sdf(p);
            if d < best.0 {
                best = (d, s.gradient(p));
            }
        }
        best.1
    }

    /// Distance along the unit ray to the first surface, or `None` when the
    /// march does not converge.
    pub fn trace(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let mut t = 0.0;
        for _ in 0..TRACE_MAX_STEPS {
            let d = self.sdf(&(origin + dir * t));
            if d.abs() < TRACE_EPS {
                return Some(t);
            }
            if d < 0.0 {
                // started inside a solid
                return None;
            }
            t += d;
            if t > TRACE_MAX_DIST {
                return None;
            }
        }
        None
    }

    /// Marching cubes of the scene SDF over `bounds`.
    pub fn gt_mesh(&self, voxel: f64) -> Result<TriangleMesh> {
        uniform_marching_cubes(&|p: &Vec3| Some(self.sdf(p)), &self.bounds, voxel)
    }

    /// True when the surface point `p` lies inside some camera's image and
    /// the ray from that camera reaches it within `tol`.
    pub fn is_observed(&self, p: &Vec3, tol: f64) -> bool {
        let (w, h) = (self.intrinsics.width as f64, self.intrinsics.height as f64);
        self.cameras.iter().any(|pose| {
            let Some((u, v, _)) = self.intrinsics.project(&pose.inverse_transform_point(p)) else {
                return false;
            };
            if !(u >= -0.5 && u <= w - 0.5 && v >= -0.5 && v <= h - 0.5) {
                return false;
            }
            let c = pose.center();
            let dist = (p - c).norm();
            self.trace(&c, &((p - c) / dist))
                .is_some_and(|t| t >= dist - tol)
        })
    }

    /// Ground-truth mesh cut down to the triangles whose centroid some
    /// camera observes; surfaces no view sees cannot be reconstructed.
    pub fn observed_gt_mesh(&self, voxel: f64) -> Result<TriangleMesh> {
        let full = self.gt_mesh(voxel)?;
        let keep: Vec<bool> = (0..full.triangles.len())
            .into_par_iter()
            .map(|t| {
                let [a, b, c] = full.corners(t);
                self.is_observed(&((a + b + c) / 3.0), voxel)
            })
            .collect();
        let triangles = full
            .triangles
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(t, _)| *t)
            .collect();
        Ok(TriangleMesh::new(full.vertices, triangles).compacted())
    }

    /// Clean depth and camera-frame normals for one view.
    pub fn render_clean(&self, pose: &RigidPose, intr: &CameraIntrinsics) -> (DepthMap, NormalMap) {
        let (w, h) = (intr.width, intr.height);
        let center = pose.center();
        let pixels: Vec<(f64, Vec3)> = (0..w * h)
            .into_par_iter()
            .map(|i| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                let ray_cam = intr.unproject(x, y, 1.0).normalize();
                let dir = pose.transform_vector(&ray_cam);
                match self.trace(&center, &dir) {
                    Some(t) => {
                        let n = pose.inverse_transform_vector(&self.gradient(&(center + dir * t)));
                        (t * ray_cam.z, n)
                    }
                    None => (0.0, Vec3::zeros()),
                }
            })
            .collect();
        let depth = DepthMap::from_vec(w, h, pixels.iter().map(|p| p.0).collect()).expect("sized");
        let normals = NormalMap::from_vec(
            w,
            h,
            NormalFrame::Camera,
            pixels.into_iter().map(|p| p.1).collect(),
        )
        .expect("sized");
        (depth, normals)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation of additive depth noise, meters.
    pub depth_sigma: f64,
    /// Probability that a valid pixel's depth is replaced by a uniform draw
    /// over the frame's clean depth range.
    pub outlier_fraction: f64,
    /// Replace pixels next to depth discontinuities with a random blend of
    /// the near and far sides.
    pub edge_noise: bool,
    /// Angular jitter of prior normals, degrees (per tangent axis).
    pub normal_sigma_deg: f64,
    /// Probability that a prior normal is tilted by 30 to 80 degrees.
    pub normal_outlier_fraction: f64,
}

impl NoiseConfig {
    /// Consumer depth-sensor quality: 5 mm depth noise, 2% outliers, flying
    /// pixels at edges, 3° prior-normal jitter and 5% wrong prior normals.
    pub fn moderate() -> Self {
        Self {
            depth_sigma: 0.005,
            outlier_fraction: 0.02,
            edge_noise: true,
            normal_sigma_deg: 3.0,
            normal_outlier_fraction: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.depth_sigma >= 0.0 && self.depth_sigma.is_finite())
            || !(self.normal_sigma_deg >= 0.0 && self.normal_sigma_deg.is_finite())
            || !frac(self.outlier_fraction)
            || !frac(self.normal_outlier_fraction)
        {
            return Err(Error::invalid(format!(
                "invalid noise configuration {self:?}"
            )));
        }
        Ok(())
    }
}

/// Relative jump that marks a depth discontinuity for edge noise.
const EDGE_JUMP: f64 = 0.05;

/// Output of one synthetic view.
#[derive(Clone, Debug)]
pub struct SynthFrame {
    /// Noise-free depth and normals.
    pub clean: Frame,
    /// Sensor depth and prior normals after noise.
    pub noisy: Frame,
    /// Pixels whose depth was replaced by an outlier draw.
    pub outliers: Vec<bool>,
}

/// Rotates `n` by a random tangent offset of magnitude `|g|·sigma`.
fn jitter(n: &Vec3, sigma: f64, rng: &mut ChaCha8Rng, std: &Normal<f64>) -> Vec3 {
    let (g1, g2) = (std.sample(rng) * sigma, std.sample(rng) * sigma);
    tilt(n, g1, g2)
}

fn tilt(n: &Vec3, a: f64, b: f64) -> Vec3 {
    let helper = if n.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let t1 = n.cross(&helper).normalize();
    let t2 = n.cross(&t1);
    let v = t1 * a + t2 * b;
    let ang = v.norm();
    if ang == 0.0 {
        return *n;
    }
    (n * ang.cos() + v / ang * ang.sin()).normalize()
}

pub fn synth_render(
    scene: &SyntheticScene,
    id: &str,
    pose: &RigidPose,
    intr: &CameraIntrinsics,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<SynthFrame> {
    scene.validate()?;
    noise.validate()?;
    intr.validate()?;
    let (depth, normals) = scene.render_clean(pose, intr);
    let (w, h) = (intr.width, intr.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");

    let mut noisy = depth.clone();
    if noise.edge_noise {
        for y in 0..h {
            for x in 0..w {
                let d = depth.get(x, y);
                if d <= 0.0 {
                    continue;
                }
                let (mut lo, mut hi) = (d, d);
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        let dn = depth.get(nx, ny);
                        if dn > 0.0 {
                            lo = lo.min(dn);
                            hi = hi.max(dn);
                        }
                    }
                }
                if hi - lo > EDGE_JUMP * lo {
                    let u: f64 = rng.random();
                    noisy.set(x, y, lo + u * (hi - lo));
                }
            }
        }
    }
    if noise.depth_sigma > 0.0 {
        for y in 0..h {
            for x in 0..w {
                let d = noisy.get(x, y);
                if d > 0.0 {
                    noisy.set(
                        x,
                        y,
                        (d + noise.depth_sigma * std.sample(&mut rng)).max(1e-3),
                    );
                }
            }
        }
    }
    let mut outliers = vec![false; w * h];
    if noise.outlier_fraction > 0.0 {
        let valid = depth.values().iter().filter(|d| **d > 0.0);
        let (dmin, dmax) = valid.fold((f64::INFINITY, 0.0f64), |(a, b), d| (a.min(*d), b.max(*d)));
        for y in 0..h {
            for x in 0..w {
                if depth.get(x, y) > 0.0 && rng.random::<f64>() < noise.outlier_fraction {
                    outliers[y * w + x] = true;
                    noisy.set(x, y, rng.random_range(dmin..=dmax));
                }
            }
        }
    }

    let mut prior = normals.clone();
    if noise.normal_sigma_deg > 0.0 || noise.normal_outlier_fraction > 0.0 {
        let sigma = noise.normal_sigma_deg.to_radians();
        for y in 0..h {
            for x in 0..w {
                let n = normals.get(x, y);
                if n == Vec3::zeros() {
                    continue;
                }
                let mut m = if sigma > 0.0 {
                    jitter(&n, sigma, &mut rng, &std)
                } else {
                    n
                };
                if noise.normal_outlier_fraction > 0.0
                    && rng.random::<f64>() < noise.normal_outlier_fraction
                {
                    let ang = rng.random_range(30.0f64..80.0).to_radians();
                    let phi = rng.random_range(0.0..std::f64::consts::TAU);
                    m = tilt(&m, ang * phi.cos(), ang * phi.sin());
                }
                prior.set(x, y, m);
            }
        }
    }

    let frame = |depth, normals| Frame {
        id: id.to_string(),
        intrinsics: *intr,
        pose: *pose,
        depth,
        normals,
        color: None,
    };
    Ok(SynthFrame {
        clean: frame(depth, normals),
        noisy: frame(noisy, prior),
        outliers,
    })
}

/// Per-frame seed derived from the dataset seed.
pub fn frame_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index as u64 + 1)
}

/// Renders every camera of the scene in parallel.
pub fn render_scene(
    scene: &SyntheticScene,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<Vec<SynthFrame>> {
    scene
        .cameras
        .par_iter()
        .enumerate()
        .map(|(i, pose)| {
            synth_render(
                scene,
                &format!("{i:04}"),
                pose,
                &scene.intrinsics,
                noise,
                frame_seed(seed, i),
            )
        })
        .collect()
}
