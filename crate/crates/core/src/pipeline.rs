//! End-to-end chain: prior filtering, fusion, octree meshing, evaluation.
//!
//! There is no trainer here. A trained model renders dense depth even where
//! its depth supervision was filtered away, so the stand-in for the rendered
//! depth is the DNC-filtered sensor depth with removed pixels re-estimated
//! from surviving neighbours ([`densify_depth`]). The stand-in for the
//! rendered normals is the KNN normal DNC computed at kept pixels and the
//! fitted plane normal at re-estimated ones; per-pixel cross products of
//! sensor depth are too noisy for that role. The fused normal at a pixel is
//! the ANR-filtered prior where it survives and the rendered stand-in
//! otherwise.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, FusionFrame, FusionVolume};
use crate::geometry::{
    is_valid_normal, CameraIntrinsics, DepthMap, Frame, NormalFrame, NormalMap, Vec3,
};
use crate::isooctree::{
    build_hint_octree, extract_isooctree_mesh_with_stats, uniform_marching_cubes, Aabb,
    ExtractStats, HintOctree, OctreeConfig,
};
use crate::mesh::TriangleMesh;
use crate::metrics::{evaluate_with, EvalConfig, MeshMetrics};
use crate::priors::{anr_filter_normals, dnc_filter_frame, AnrConfig, DncConfig, FilterReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mesher {
    #[default]
    IsoOctree,
    /// Dense marching cubes over the octree root box.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Apply DNC to depth and ANR to prior normals before fusion.
    pub filters: bool,
    pub dnc: DncConfig,
    pub anr: AnrConfig,
    pub fusion: FusionConfig,
    pub octree: OctreeConfig,
    pub mesher: Mesher,
    /// Voxel size of the uniform mesher, meters.
    pub voxel_size: f64,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filters: true,
            dnc: DncConfig::default(),
            anr: AnrConfig::default(),
            fusion: FusionConfig::default(),
            octree: OctreeConfig::default(),
            mesher: Mesher::default(),
            voxel_size: 0.01,
            eval: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.dnc.validate()?;
        self.anr.validate()?;
        self.fusion.validate()?;
        self.octree.validate()?;
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(Error::invalid(format!(
                "voxel_size must be positive, got {}",
                self.voxel_size
            )));
        }
        self.eval.validate()
    }
}

/// A frame after prior filtering, ready for fusion.
#[derive(Clone, Debug)]
pub struct FilteredFrame {
    pub id: String,
    pub frame: Frame,
    /// Depth after DNC and re-estimation (the raw depth when filters are
    /// off).
    pub depth: DepthMap,
    /// Normals handed to fusion, camera frame.
    pub normals: NormalMap,
    pub dnc: Option<FilterReport>,
    pub anr: Option<FilterReport>,
}

fn camera_normals(frame: &Frame) -> NormalMap {
    match frame.normals.frame() {
        NormalFrame::Camera => frame.normals.clone(),
        NormalFrame::World => frame.normals.to_camera(&frame.pose),
    }
}

/// Window radius, minimum support and pass limit of [`densify_depth`].
const FILL_RADIUS: usize = 3;
const FILL_MIN_SUPPORT: usize = 8;
const FILL_PASSES: usize = 8;

/// Fits `1/d = a·x + b·y + c` over normalized image coordinates; exact for
/// planes. Returns the depth at `(x, y)` and the camera-frame plane normal
/// facing the camera.
fn fit_inverse_depth_plane(support: &[(f64, f64, f64)], x: f64, y: f64) -> Option<(f64, Vec3)> {
    let mut ata = Matrix3::zeros();
    let mut atb = Vec3::zeros();
    for &(sx, sy, d) in support {
        let row = Vec3::new(sx, sy, 1.0);
        ata += row * row.transpose();
        atb += row / d;
    }
    let coef = ata.cholesky()?.solve(&atb);
    let q = coef.dot(&Vec3::new(x, y, 1.0));
    if !(q > 0.0) {
        return None;
    }
    Some((1.0 / q, -coef.normalize()))
}

/// Re-estimates pixels that have a sensor return in `raw` but were removed
/// from `filtered`, by fitting a plane in inverse depth to valid pixels in
/// the surrounding window. Passes repeat so gaps close from their borders
/// inward. Also returns the fitted camera-frame normal of every re-estimated
/// pixel.
pub fn densify_depth(
    filtered: &DepthMap,
    raw: &DepthMap,
    intr: &CameraIntrinsics,
) -> Result<(DepthMap, Vec<Option<Vec3>>)> {
    filtered.check_same_size(raw.width(), raw.height(), "densify_depth")?;
    filtered.check_same_size(intr.width, intr.height, "densify_depth")?;
    let (w, h) = (filtered.width(), filtered.height());
    let mut depth = filtered.clone();
    let mut fitted = vec![None; w * h];
    let coord = |x: usize, y: usize| {
        (
            (x as f64 - intr.cx) / intr.fx,
            (y as f64 - intr.cy) / intr.fy,
        )
    };
    for _ in 0..FILL_PASSES {
        let current = depth.values();
        let updates: Vec<(usize, f64, Vec3)> = (0..w * h)
            .into_par_iter()
            .filter(|&i| current[i] <= 0.0 && raw.values()[i] > 0.0)
            .filter_map(|i| {
                let (x, y) = (i % w, i / w);
                let mut support = Vec::new();
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for yy in y.saturating_sub(FILL_RADIUS)..(y + FILL_RADIUS + 1).min(h) {
                    for xx in x.saturating_sub(FILL_RADIUS)..(x + FILL_RADIUS + 1).min(w) {
                        let d = current[yy * w + xx];
                        if d > 0.0 {
                            let (sx, sy) = coord(xx, yy);
                            support.push((sx, sy, d));
                            lo = lo.min(d);
                            hi = hi.max(d);
                        }
                    }
                }
                if support.len() < FILL_MIN_SUPPORT {
                    return None;
                }
                let (cx, cy) = coord(x, y);
                let (d, n) = fit_inverse_depth_plane(&support, cx, cy)?;
                // extrapolation beyond the support's range is not trusted
                (d >= lo && d <= hi).then_some((i, d, n))
            })
            .collect();
        if updates.is_empty() {
            break;
        }
        for (i, d, n) in updates {
            depth.set(i % w, i / w, d);
            fitted[i] = Some(n);
        }
    }
    Ok((depth, fitted))
}

/// DNC, re-estimation of removed depth, then ANR for one frame.
pub fn filter_frame(frame: &Frame, dnc: &DncConfig, anr: &AnrConfig) -> Result<FilteredFrame> {
    frame.validate()?;
    let n_p = camera_normals(frame);
    let (d_f, n_d, dnc_report) =
        dnc_filter_frame(&frame.depth, &frame.intrinsics, &frame.pose, &n_p, dnc)?;
    let (d_r, fitted) = densify_depth(&d_f, &frame.depth, &frame.intrinsics)?;
    let kept = n_d.masked(&dnc_report.mask).to_camera(&frame.pose);
    let n_hat_values: Vec<Vec3> = kept
        .values()
        .iter()
        .zip(&fitted)
        .map(|(k, f)| f.unwrap_or(*k))
        .collect();
    let n_hat = NormalMap::from_vec(
        kept.width(),
        kept.height(),
        NormalFrame::Camera,
        n_hat_values,
    )?;
    let (n_f, anr_report) = anr_filter_normals(&n_hat, &n_p, anr)?;
    let merged: Vec<_> = n_f
        .values()
        .iter()
        .zip(n_hat.values())
        .map(|(f, h)| if is_valid_normal(f) { *f } else { *h })
        .collect();
    let normals = NormalMap::from_vec(n_f.width(), n_f.height(), NormalFrame::Camera, merged)?;
    Ok(FilteredFrame {
        id: frame.id.clone(),
        frame: frame.clone(),
        depth: d_r,
        normals,
        dnc: Some(dnc_report),
        anr: Some(anr_report),
    })
}

/// Filters every frame in parallel; with `enabled` false frames pass
/// through unchanged.
pub fn filter_frames(
    frames: &[Frame],
    enabled: bool,
    dnc: &DncConfig,
    anr: &AnrConfig,
) -> Result<Vec<FilteredFrame>> {
    frames
        .par_iter()
        .map(|f| {
            if enabled {
                filter_frame(f, dnc, anr).map_err(|e| e.in_frame(&f.id))
            } else {
                f.validate().map_err(|e| e.in_frame(&f.id))?;
                Ok(FilteredFrame {
                    id: f.id.clone(),
                    frame: f.clone(),
                    depth: f.depth.clone(),
                    normals: camera_normals(f),
                    dnc: None,
                    anr: None,
                })
            }
        })
        .collect()
}

pub fn build_volume(frames: &[FilteredFrame], cfg: &FusionConfig) -> Result<FusionVolume> {
    let prepared = frames
        .par_iter()
        .map(|f| {
            FusionFrame::prepare(
                f.id.clone(),
                f.frame.intrinsics,
                f.frame.pose,
                &f.depth,
                &f.normals,
                cfg,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    FusionVolume::new(prepared, *cfg)
}

#[derive(Clone, Debug)]
pub struct FusedMesh {
    pub mesh: TriangleMesh,
    /// Octree root box, also the domain of the uniform mesher.
    pub root: Aabb,
    /// Width of the smallest octree leaf.
    pub finest_voxel: f64,
    pub leaf_count: usize,
    pub corner_count: usize,
    pub stats: Option<ExtractStats>,
}

/// Smallest leaf width present in the tree.
pub fn finest_leaf_width(tree: &HintOctree) -> f64 {
    let hist = tree.depth_histogram();
    let level = hist.iter().rposition(|c| *c > 0).unwrap_or(0);
    tree.cell_width(level as u32)
}

/// Hint octree over the volume's point cloud, sampled with the isofunction.
pub fn sampled_octree(volume: &FusionVolume, cfg: &OctreeConfig) -> Result<HintOctree> {
    let hints = volume.hint_cloud()?;
    let mut tree = build_hint_octree(&hints, cfg)?;
    tree.sample_corners(volume);
    Ok(tree)
}

pub fn mesh_volume(
    volume: &FusionVolume,
    octree: &OctreeConfig,
    mesher: Mesher,
    voxel: f64,
) -> Result<FusedMesh> {
    let tree = sampled_octree(volume, octree)?;
    let root = tree.root_box();
    let finest_voxel = finest_leaf_width(&tree);
    let (mesh, stats) = match mesher {
        Mesher::IsoOctree => {
            let (m, s) = extract_isooctree_mesh_with_stats(&tree)?;
            (m, Some(s))
        }
        Mesher::Uniform => (uniform_marching_cubes(volume, &root, voxel)?, None),
    };
    if let Some(s) = &stats {
        if s.inconsistent_cells > 0 {
            log::warn!(
                "{} cells had inconsistent face crossings",
                s.inconsistent_cells
            );
        }
    }
    Ok(FusedMesh {
        mesh,
        root,
        finest_voxel,
        leaf_count: tree.leaf_count(),
        corner_count: tree.corner_count(),
        stats,
    })
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub frames: Vec<FilteredFrame>,
    pub fused: FusedMesh,
    pub metrics: Option<MeshMetrics>,
}

/// Filter, fuse, mesh, and evaluate against `gt` when given.
pub fn run_pipeline(
    frames: &[Frame],
    gt: Option<&TriangleMesh>,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::invalid("no frames"));
    }
    let filtered = filter_frames(frames, cfg.filters, &cfg.dnc, &cfg.anr)?;
    let volume = build_volume(&filtered, &cfg.fusion)?;
    let fused = mesh_volume(&volume, &cfg.octree, cfg.mesher, cfg.voxel_size)?;
    let metrics = match gt {
        Some(gt) if !fused.mesh.triangles.is_empty() => {
            Some(evaluate_with(&fused.mesh, gt, &cfg.eval)?)
        }
        Some(_) => return Err(Error::invalid("fused mesh is empty; nothing to evaluate")),
        None => None,
    };
    Ok(PipelineOutput {
        frames: filtered,
        fused,
        metrics,
    })
}
