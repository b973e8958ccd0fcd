use nalgebra::{Matrix3, Matrix4};
use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};

/// Pinhole intrinsics without distortion.
///
/// Camera frame convention: +z forward, +x right, +y down. Pixel `(u, v)`
/// addresses column `u`, row `v`; integer coordinates are pixel centers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    /// Intrinsics for a centred principal point and a horizontal field of view.
    pub fn from_fov(width: usize, height: usize, hfov_deg: f64) -> Result<Self> {
        if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
            return Err(Error::invalid(format!(
                "field of view {hfov_deg} out of (0, 180)"
            )));
        }
        let f = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Self::new(
            f,
            f,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::invalid(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64)
            || !(self.cy >= 0.0 && self.cy < self.height as f64)
        {
            return Err(Error::invalid(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Camera-frame point for pixel `(u, v)` at depth `d`.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, d: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx * d, (v - self.cy) / self.fy * d, d)
    }

    /// Pixel coordinates and depth of a camera-frame point, `None` when the
    /// point is not strictly in front of the camera.
    #[inline]
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
            p.z,
        ))
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Camera-to-world rigid transform: `x_world = R * x_cam + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidPose {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

const ORTHONORMAL_TOL: f64 = 1e-9;

fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

impl RigidPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Checked constructor: the rotation must be orthonormal to 1e-9 with
    /// determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if !rotation
            .iter()
            .chain(translation.iter())
            .all(|v| v.is_finite())
        {
            return Err(Error::invalid("pose contains non-finite values"));
        }
        let err = orthonormality_error(&rotation);
        if err >= ORTHONORMAL_TOL {
            return Err(Error::invalid(format!(
                "rotation is not orthonormal (|R^T R - I| = {err:e})"
            )));
        }
        if rotation.determinant() <= 0.0 {
            return Err(Error::invalid("rotation has negative determinant"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Accepts rotations that are orthonormal within `tol` and snaps them to
    /// the nearest rotation (polar projection). Used for poses read from files.
    pub fn new_projected(rotation: Matrix3<f64>, translation: Vec3, tol: f64) -> Result<Self> {
        if !rotation
            .iter()
            .chain(translation.iter())
            .all(|v| v.is_finite())
        {
            return Err(Error::invalid("pose contains non-finite values"));
        }
        let err = orthonormality_error(&rotation);
        if err >= tol {
            return Err(Error::invalid(format!(
                "rotation is not orthonormal (|R^T R - I| = {err:e}, tolerance {tol:e})"
            )));
        }
        let svd = rotation.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut projected = u * v_t;
        if projected.determinant() < 0.0 {
            return Err(Error::invalid("rotation has negative determinant"));
        }
        // One Newton step on the polar factor removes the SVD round-off.
        projected = 0.5 * (projected + projected.transpose().try_inverse().unwrap_or(projected));
        Self::new(projected, translation)
    }

    /// Builds a pose from a row-major 4x4 camera-to-world matrix.
    pub fn from_matrix(m: &[[f64; 4]; 4], tol: f64) -> Result<Self> {
        let last = m[3];
        if last[0].abs() > tol
            || last[1].abs() > tol
            || last[2].abs() > tol
            || (last[3] - 1.0).abs() > tol
        {
            return Err(Error::invalid(format!(
                "last row of pose matrix must be [0 0 0 1], got {last:?}"
            )));
        }
        let r = Matrix3::new(
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        );
        let t = Vec3::new(m[0][3], m[1][3], m[2][3]);
        Self::new_projected(r, t, tol)
    }

    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Camera placed at `eye` looking at `target`; `down` fixes the image
    /// +y direction (projected to be orthogonal to the viewing axis).
    pub fn look_at(eye: Vec3, target: Vec3, down: Vec3) -> Result<Self> {
        let z = target - eye;
        if z.norm() == 0.0 {
            return Err(Error::invalid("look_at: eye and target coincide"));
        }
        let z = z.normalize();
        let y = down - z * down.dot(&z);
        if y.norm() < 1e-12 {
            return Err(Error::invalid(
                "look_at: down vector parallel to viewing direction",
            ));
        }
        let y = y.normalize();
        let x = y.cross(&z);
        Self::new(Matrix3::from_columns(&[x, y, z]), eye)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        self.translation
    }

    /// Unit viewing direction (camera +z) in world coordinates.
    pub fn principal_axis(&self) -> Vec3 {
        self.rotation.column(2).into_owned()
    }

    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// World point to camera frame.
    #[inline]
    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.tr_mul(&(p - self.translation))
    }

    #[inline]
    pub fn inverse_transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.tr_mul(v)
    }

    pub fn inverse(&self) -> Self {
        let r_t = self.rotation.transpose();
        Self {
            rotation: r_t,
            translation: -(r_t * self.translation),
        }
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &RigidPose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Serialize for RigidPose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_matrix().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidPose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = <[[f64; 4]; 4]>::deserialize(d)?;
        RigidPose::from_matrix(&m, 1e-4).map_err(serde::de::Error::custom)
    }
}
