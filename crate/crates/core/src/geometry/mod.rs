//! Camera models, rigid transforms, per-pixel maps and the small amount of
//! vector arithmetic shared by every other module.

mod camera;
mod maps;

pub use camera::{CameraIntrinsics, RigidPose};
pub use maps::{is_valid_normal, ColorImage, DepthMap, Frame, NormalFrame, NormalMap, PointCloud};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Back-projects every valid depth pixel into world space, in row-major
/// pixel order.
pub fn backproject(
    depth: &DepthMap,
    intr: &CameraIntrinsics,
    pose: &RigidPose,
) -> Result<PointCloud> {
    let (points, _) = backproject_indexed(depth, intr, pose)?;
    Ok(PointCloud::from_points(points))
}

/// Like [`backproject`], also returning the linear pixel index of each point.
pub fn backproject_indexed(
    depth: &DepthMap,
    intr: &CameraIntrinsics,
    pose: &RigidPose,
) -> Result<(Vec<Vec3>, Vec<usize>)> {
    depth.check_same_size(intr.width, intr.height, "backproject")?;
    let mut points = Vec::with_capacity(depth.valid_count());
    let mut pixels = Vec::with_capacity(points.capacity());
    for y in 0..depth.height() {
        for x in 0..depth.width() {
            let d = depth.get(x, y);
            if d > 0.0 {
                points.push(pose.transform_point(&intr.unproject(x as f64, y as f64, d)));
                pixels.push(y * depth.width() + x);
            }
        }
    }
    Ok((points, pixels))
}

/// Projects a world point into pixel coordinates and camera depth.
pub fn project(p: &Vec3, intr: &CameraIntrinsics, pose: &RigidPose) -> Option<(f64, f64, f64)> {
    intr.project(&pose.inverse_transform_point(p))
}

/// Angle between two vectors in degrees, in `[0, 180]`.
///
/// Evaluated as `atan2(|a x b|, a . b)`, which equals the clamped arccos of
/// the normalised dot product but stays accurate for nearly (anti)parallel
/// vectors.
pub fn angle_between(a: &Vec3, b: &Vec3) -> Result<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(Error::invalid(
            "angle_between: zero-length or non-finite vector",
        ));
    }
    Ok(angle_deg_unchecked(a, b))
}

/// [`angle_between`] without the zero-length check.
#[inline]
pub(crate) fn angle_deg_unchecked(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

/// The four pixels and weights surrounding `(u, v)`, or `None` outside the
/// pixel-center lattice.
#[inline]
fn bilinear_stencil(width: usize, height: usize, u: f64, v: f64) -> Option<[(usize, f64); 4]> {
    if !(u >= 0.0 && v >= 0.0 && u <= (width - 1) as f64 && v <= (height - 1) as f64) {
        return None;
    }
    let x0 = (u.floor() as usize).min(width.saturating_sub(2));
    let y0 = (v.floor() as usize).min(height.saturating_sub(2));
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = u - x0 as f64;
    let fy = v - y0 as f64;
    Some([
        (y0 * width + x0, (1.0 - fx) * (1.0 - fy)),
        (y0 * width + x1, fx * (1.0 - fy)),
        (y1 * width + x0, (1.0 - fx) * fy),
        (y1 * width + x1, fx * fy),
    ])
}

/// Bilinear depth lookup at pixel coordinates. Returns `None` when outside
/// the image or when any of the four neighbours is invalid.
pub fn sample_depth(map: &DepthMap, u: f64, v: f64) -> Option<f64> {
    let stencil = bilinear_stencil(map.width(), map.height(), u, v)?;
    let values = map.values();
    let mut acc = 0.0;
    for (idx, w) in stencil {
        let d = values[idx];
        if d <= 0.0 {
            return None;
        }
        acc += w * d;
    }
    Some(acc)
}

/// Bilinear normal lookup, re-normalised. Same validity rule as
/// [`sample_depth`]; also `None` if the blend cancels out.
pub fn sample_normal(map: &NormalMap, u: f64, v: f64) -> Option<Vec3> {
    let stencil = bilinear_stencil(map.width(), map.height(), u, v)?;
    let values = map.values();
    let mut acc = Vec3::zeros();
    for (idx, w) in stencil {
        let n = &values[idx];
        if !is_valid_normal(n) {
            return None;
        }
        acc += w * n;
    }
    let len = acc.norm();
    if len < 1e-12 {
        None
    } else {
        Some(acc / len)
    }
}
