use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::png::{
    read_color_png, read_depth_png, read_normal_png, write_color_png, write_depth_png,
    write_normal_png,
};
use super::{read_file, write_atomic};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Frame, NormalFrame, RigidPose};

/// One frame of a dataset. Paths are relative to the manifest's directory
/// unless absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub id: String,
    pub depth: PathBuf,
    pub normal: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<PathBuf>,
    /// Row-major 4x4 camera-to-world matrix.
    pub pose: [[f64; 4]; 4],
    /// Overrides the shared intrinsics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<CameraIntrinsics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    /// Meters per stored depth unit.
    pub depth_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<CameraIntrinsics>,
    /// Frame of the stored prior normals.
    #[serde(default)]
    pub normal_frame: NormalFrame,
    pub frames: Vec<FrameRecord>,
}

/// Tolerance on `|RᵀR − I|` for poses read from disk.
pub const POSE_TOLERANCE: f64 = 1e-4;

impl DatasetManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    /// Reads and validates a manifest file.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = String::from_utf8(read_file(path)?)
            .map_err(|_| Error::invalid(format!("{}: manifest is not UTF-8", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.depth_scale > 0.0 && self.depth_scale.is_finite()) {
            return Err(Error::invalid(format!(
                "depth_scale must be positive, got {}",
                self.depth_scale
            )));
        }
        if let Some(i) = &self.intrinsics {
            i.validate()?;
        }
        for r in &self.frames {
            self.intrinsics_for(r)
                .map_err(|e| e.in_frame(&r.id))?
                .validate()
                .map_err(|e| e.in_frame(&r.id))?;
        }
        Ok(())
    }

    fn intrinsics_for(&self, r: &FrameRecord) -> Result<CameraIntrinsics> {
        r.intrinsics
            .or(self.intrinsics)
            .ok_or_else(|| Error::invalid("no intrinsics given for frame or dataset"))
    }

    fn load_frame(&self, root: &Path, r: &FrameRecord) -> Result<Frame> {
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                root.join(p)
            }
        };
        let intrinsics = self.intrinsics_for(r)?;
        let pose = RigidPose::from_matrix(&r.pose, POSE_TOLERANCE)?;
        let depth = read_depth_png(resolve(&r.depth), self.depth_scale)?;
        let normals = read_normal_png(resolve(&r.normal), self.normal_frame)?;
        let color = r
            .color
            .as_deref()
            .map(|c| read_color_png(resolve(c)))
            .transpose()?;
        let frame = Frame {
            id: r.id.clone(),
            intrinsics,
            pose,
            depth,
            normals,
            color,
        };
        frame.validate()?;
        Ok(frame)
    }
}

/// Loads every frame in parallel; the first failure in frame order wins and
/// names its frame.
pub fn load_dataset(manifest: impl AsRef<Path>) -> Result<Vec<Frame>> {
    let path = manifest.as_ref();
    let m = DatasetManifest::read(path)?;
    let root = path.parent().unwrap_or(Path::new("."));
    m.frames
        .par_iter()
        .map(|r| m.load_frame(root, r).map_err(|e| e.in_frame(&r.id)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Writes `frames` as PNGs under `dir` plus `dir/manifest.json`, returning
/// the manifest path. Normals are stored in their own frame, which must be
/// the same for all frames.
pub fn save_dataset(dir: impl AsRef<Path>, frames: &[Frame], depth_scale: f64) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let normal_frame = frames
        .first()
        .map_or(NormalFrame::Camera, |f| f.normals.frame());
    let shared = frames.first().map(|f| f.intrinsics);
    let mut records = Vec::with_capacity(frames.len());
    for f in frames {
        if f.normals.frame() != normal_frame {
            return Err(Error::invalid("frames store normals in different frames").in_frame(&f.id));
        }
        let depth = PathBuf::from(format!("{}_depth.png", f.id));
        let normal = PathBuf::from(format!("{}_normal.png", f.id));
        write_depth_png(dir.join(&depth), &f.depth, depth_scale).map_err(|e| e.in_frame(&f.id))?;
        write_normal_png(dir.join(&normal), &f.normals).map_err(|e| e.in_frame(&f.id))?;
        let color = match &f.color {
            Some(c) => {
                let p = PathBuf::from(format!("{}_color.png", f.id));
                write_color_png(dir.join(&p), c).map_err(|e| e.in_frame(&f.id))?;
                Some(p)
            }
            None => None,
        };
        records.push(FrameRecord {
            id: f.id.clone(),
            depth,
            normal,
            color,
            pose: f.pose.to_matrix(),
            intrinsics: (Some(f.intrinsics) != shared).then_some(f.intrinsics),
        });
    }
    let manifest = DatasetManifest {
        depth_scale,
        intrinsics: shared,
        normal_frame,
        frames: records,
    };
    let path = dir.join("manifest.json");
    write_atomic(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(path)
}
