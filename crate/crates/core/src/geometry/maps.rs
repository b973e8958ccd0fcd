use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, RigidPose, Vec3};
use crate::error::{Error, Result};

/// Per-pixel depth in meters; `0.0` marks an invalid pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "depth map has {} values, expected {}x{}",
                values.len(),
                width,
                height
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "depth values must be finite and >= 0, found {bad}"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::from_vec(width, height, values)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Sets a pixel; negative or non-finite values are stored as invalid.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: f64) {
        self.values[y * self.width + x] = if d.is_finite() && d > 0.0 { d } else { 0.0 };
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.get(x, y) > 0.0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }

    pub fn validity_mask(&self) -> Vec<bool> {
        self.values.iter().map(|v| *v > 0.0).collect()
    }

    /// Zeroes every pixel whose mask entry is false.
    pub fn masked(&self, mask: &[bool]) -> Self {
        let values = self
            .values
            .iter()
            .zip(mask)
            .map(|(v, keep)| if *keep { *v } else { 0.0 })
            .collect();
        Self {
            width: self.width,
            height: self.height,
            values,
        }
    }

    pub(crate) fn check_same_size(&self, w: usize, h: usize, what: &str) -> Result<()> {
        if self.width != w || self.height != h {
            return Err(Error::invalid(format!(
                "{what}: dimensions {}x{} do not match {}x{}",
                self.width, self.height, w, h
            )));
        }
        Ok(())
    }
}

/// Coordinate frame a normal map is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormalFrame {
    #[default]
    Camera,
    World,
}

/// Per-pixel unit normals; the zero vector marks an invalid pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalMap {
    width: usize,
    height: usize,
    frame: NormalFrame,
    values: Vec<Vec3>,
}

impl NormalMap {
    pub fn invalid(width: usize, height: usize, frame: NormalFrame) -> Self {
        Self {
            width,
            height,
            frame,
            values: vec![Vec3::zeros(); width * height],
        }
    }

    /// Builds a map from raw vectors. Non-zero entries are normalised; entries
    /// that are non-finite or too short to normalise become invalid.
    pub fn from_vec(
        width: usize,
        height: usize,
        frame: NormalFrame,
        values: Vec<Vec3>,
    ) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "normal map has {} values, expected {}x{}",
                values.len(),
                width,
                height
            )));
        }
        let values = values.into_iter().map(sanitize_normal).collect();
        Ok(Self {
            width,
            height,
            frame,
            values,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn frame(&self) -> NormalFrame {
        self.frame
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Vec3 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, n: Vec3) {
        self.values[y * self.width + x] = sanitize_normal(n);
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        is_valid_normal(&self.get(x, y))
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|n| is_valid_normal(n)).count()
    }

    pub fn masked(&self, mask: &[bool]) -> Self {
        let values = self
            .values
            .iter()
            .zip(mask)
            .map(|(n, keep)| if *keep { *n } else { Vec3::zeros() })
            .collect();
        Self {
            width: self.width,
            height: self.height,
            frame: self.frame,
            values,
        }
    }

    /// Re-expresses the map in the world frame using the camera-to-world pose.
    pub fn to_world(&self, pose: &RigidPose) -> Self {
        match self.frame {
            NormalFrame::World => self.clone(),
            NormalFrame::Camera => self.rotated(NormalFrame::World, |n| pose.transform_vector(n)),
        }
    }

    pub fn to_camera(&self, pose: &RigidPose) -> Self {
        match self.frame {
            NormalFrame::Camera => self.clone(),
            NormalFrame::World => {
                self.rotated(NormalFrame::Camera, |n| pose.inverse_transform_vector(n))
            }
        }
    }

    fn rotated(&self, frame: NormalFrame, f: impl Fn(&Vec3) -> Vec3) -> Self {
        let values = self
            .values
            .iter()
            .map(|n| {
                if is_valid_normal(n) {
                    f(n).normalize()
                } else {
                    Vec3::zeros()
                }
            })
            .collect();
        Self {
            width: self.width,
            height: self.height,
            frame,
            values,
        }
    }

    pub(crate) fn check_compatible(&self, other: &NormalMap, what: &str) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::invalid(format!(
                "{what}: normal maps have different dimensions ({}x{} vs {}x{})",
                self.width, self.height, other.width, other.height
            )));
        }
        if self.frame != other.frame {
            return Err(Error::invalid(format!(
                "{what}: normal maps are in different frames ({:?} vs {:?})",
                self.frame, other.frame
            )));
        }
        Ok(())
    }
}

#[inline]
pub fn is_valid_normal(n: &Vec3) -> bool {
    n.x != 0.0 || n.y != 0.0 || n.z != 0.0
}

fn sanitize_normal(n: Vec3) -> Vec3 {
    if !n.iter().all(|c| c.is_finite()) {
        return Vec3::zeros();
    }
    let len = n.norm();
    if len < 1e-12 {
        Vec3::zeros()
    } else {
        n / len
    }
}

/// Linear RGB image with channels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl ColorImage {
    pub fn from_vec(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "image has {} pixels, expected {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![rgb; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    /// One channel as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.pixels.iter().map(|p| p[c]).collect()
    }
}

/// World-space points with optional unit normals and source-frame indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub sources: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Vec3>) -> Self {
        Self {
            points,
            normals: None,
            sources: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(normals) = &self.normals {
            if normals.len() != self.points.len() {
                return Err(Error::invalid("normal count does not match point count"));
            }
            if normals.iter().any(|n| (n.norm() - 1.0).abs() > 1e-6) {
                return Err(Error::invalid("point normals must be unit length"));
            }
        }
        if let Some(sources) = &self.sources {
            if sources.len() != self.points.len() {
                return Err(Error::invalid(
                    "source index count does not match point count",
                ));
            }
        }
        Ok(())
    }

    /// Concatenates clouds; normals/sources are kept only if every part has them.
    pub fn concat(parts: &[PointCloud]) -> Self {
        let points = parts
            .iter()
            .flat_map(|c| c.points.iter().copied())
            .collect();
        let normals = if parts.iter().all(|c| c.normals.is_some()) {
            Some(
                parts
                    .iter()
                    .flat_map(|c| c.normals.as_ref().unwrap().iter().copied())
                    .collect(),
            )
        } else {
            None
        };
        let sources = if parts.iter().all(|c| c.sources.is_some()) {
            Some(
                parts
                    .iter()
                    .flat_map(|c| c.sources.as_ref().unwrap().iter().copied())
                    .collect(),
            )
        } else {
            None
        };
        Self {
            points,
            normals,
            sources,
        }
    }
}

/// One posed capture: depth, prior normals and optional color.
#[derive(Clone, Debug)]
pub struct Frame {
    pub id: String,
    pub intrinsics: CameraIntrinsics,
    pub pose: RigidPose,
    pub depth: DepthMap,
    pub normals: NormalMap,
    pub color: Option<ColorImage>,
}

impl Frame {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        self.depth.check_same_size(w, h, "depth")?;
        if self.normals.width() != w || self.normals.height() != h {
            return Err(Error::invalid(format!(
                "normal map {}x{} does not match intrinsics {}x{}",
                self.normals.width(),
                self.normals.height(),
                w,
                h
            )));
        }
        if let Some(c) = &self.color {
            if c.width() != w || c.height() != h {
                return Err(Error::invalid("color image does not match intrinsics"));
            }
        }
        Ok(())
    }
}
