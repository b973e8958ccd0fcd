use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    backproject_indexed, CameraIntrinsics, DepthMap, NormalFrame, NormalMap, RigidPose, Vec3,
};
use crate::spatial::KdTree;

/// Point the neighbourhood covariance is taken about.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceCenter {
    /// Mean of the k neighbours (classic PCA).
    Centroid,
    /// The query point itself. A point lifted off its surface then has the
    /// offset as a dominant covariance direction, so its normal swings into
    /// the tangent plane instead of copying the surface normal beneath it.
    #[default]
    Query,
}

/// Ratio of middle to largest eigenvalue below which a neighbourhood is
/// treated as rank-deficient.
const RANK_EPS: f64 = 1e-10;

/// Unit normal of the smallest covariance eigenvalue of `neighbors` about
/// `center`, or zero when the neighbourhood spans fewer than two
/// dimensions.
pub fn pca_normal(
    neighbors: impl Iterator<Item = Vec3>,
    center: &Vec3,
    mode: CovarianceCenter,
) -> Vec3 {
    let mut sum = Vec3::zeros();
    let mut outer = Matrix3::zeros();
    let mut n = 0usize;
    for q in neighbors {
        let d = q - center;
        sum += d;
        outer += d * d.transpose();
        n += 1;
    }
    if n < 3 {
        return Vec3::zeros();
    }
    let inv = 1.0 / n as f64;
    let mut cov = outer * inv;
    if mode == CovarianceCenter::Centroid {
        let mean = sum * inv;
        cov -= mean * mean.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (lo, mid, hi) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    if !(hi > 0.0) || mid <= RANK_EPS * hi || !lo.is_finite() {
        return Vec3::zeros();
    }
    eig.eigenvectors.column(order[0]).normalize()
}

/// Per-point PCA normals from the `k` nearest neighbours (the point itself
/// included), oriented so that `n · (view_center − p) > 0`. Points whose
/// normal is undefined or exactly edge-on get the zero vector.
pub fn estimate_point_normals_knn(
    points: &[Vec3],
    view_center: &Vec3,
    k: usize,
    mode: CovarianceCenter,
) -> Result<Vec<Vec3>> {
    if k < 3 {
        return Err(Error::invalid(format!("k must be at least 3, got {k}")));
    }
    if points.len() < k {
        return Err(Error::invalid(format!(
            "normal estimation needs at least k={k} points, got {}",
            points.len()
        )));
    }
    let tree = KdTree::new(points);
    let normals = points
        .par_iter()
        .map_init(Vec::new, |idx, p| {
            tree.knn_indices(p, k, idx);
            let n = pca_normal(idx.iter().map(|&i| points[i]), p, mode);
            let facing = n.dot(&(view_center - p));
            if facing > 0.0 {
                n
            } else if facing < 0.0 {
                -n
            } else {
                Vec3::zeros()
            }
        })
        .collect();
    Ok(normals)
}

/// World-frame KNN normals for every valid pixel of a depth map, written
/// back onto the pixel grid.
pub fn depth_normals_knn(
    depth: &DepthMap,
    intr: &CameraIntrinsics,
    pose: &RigidPose,
    k: usize,
    mode: CovarianceCenter,
) -> Result<NormalMap> {
    let (points, pixels) = backproject_indexed(depth, intr, pose)?;
    let normals = estimate_point_normals_knn(&points, &pose.center(), k, mode)?;
    let mut values = vec![Vec3::zeros(); depth.width() * depth.height()];
    for (n, px) in normals.into_iter().zip(pixels) {
        values[px] = n;
    }
    NormalMap::from_vec(depth.width(), depth.height(), NormalFrame::World, values)
}

/// Camera-frame normals of the surface implied by a depth map, from the
/// cross product of finite differences of back-projected points.
///
/// Central differences in the interior, one-sided at the image border. A
/// pixel is invalid if any point in its stencil is invalid.
pub fn render_normal_from_depth(depth: &DepthMap, intr: &CameraIntrinsics) -> Result<NormalMap> {
    depth.check_same_size(intr.width, intr.height, "render_normal_from_depth")?;
    let (w, h) = (depth.width(), depth.height());
    let point = |x: usize, y: usize| -> Option<Vec3> {
        let d = depth.get(x, y);
        (d > 0.0).then(|| intr.unproject(x as f64, y as f64, d))
    };
    // (lo, hi) pair along one axis: central if possible, else one-sided
    let span = |i: usize, n: usize| -> Option<(usize, usize)> {
        match n {
            0 | 1 => None,
            _ if i == 0 => Some((0, 1)),
            _ if i == n - 1 => Some((n - 2, n - 1)),
            _ => Some((i - 1, i + 1)),
        }
    };
    let values: Vec<Vec3> = (0..w * h)
        .into_par_iter()
        .map(|idx| {
            let (x, y) = (idx % w, idx / w);
            let normal = || -> Option<Vec3> {
                let p = point(x, y)?;
                let (x0, x1) = span(x, w)?;
                let (y0, y1) = span(y, h)?;
                let dx = point(x1, y)? - point(x0, y)?;
                let dy = point(x, y1)? - point(x, y0)?;
                let n = dx.cross(&dy);
                let len = n.norm();
                if !(len > 0.0) {
                    return None;
                }
                let n = n / len;
                // camera sits at the origin
                Some(if n.dot(&p) > 0.0 { -n } else { n })
            };
            normal().unwrap_or_else(Vec3::zeros)
        })
        .collect();
    NormalMap::from_vec(w, h, NormalFrame::Camera, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_between;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane_points(noise: f64, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for i in 0..25 {
            for j in 0..20 {
                let dz = if noise > 0.0 {
                    rng.random_range(-noise..=noise)
                } else {
                    0.0
                };
                pts.push(Vec3::new(
                    -0.6 + 0.05 * i as f64,
                    -0.5 + 0.05 * j as f64,
                    1.0 + dz,
                ));
            }
        }
        pts
    }

    #[test]
    fn planar_points_face_camera() {
        let pts = plane_points(0.0, 0);
        for mode in [CovarianceCenter::Centroid, CovarianceCenter::Query] {
            let ns = estimate_point_normals_knn(&pts, &Vec3::zeros(), 200, mode).unwrap();
            for n in ns {
                assert!((n - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-6, "{n:?}");
            }
        }
    }

    /// Normal of the least-squares plane z = a x + b y + c through the same
    /// neighbourhood, solved from the normal equations.
    fn lsq_plane_normal(pts: &[Vec3]) -> Vec3 {
        let mut ata = Matrix3::zeros();
        let mut atb = Vec3::zeros();
        for p in pts {
            let row = Vec3::new(p.x, p.y, 1.0);
            ata += row * row.transpose();
            atb += row * p.z;
        }
        let s = ata.try_inverse().unwrap() * atb;
        Vec3::new(s.x, s.y, -1.0).normalize()
    }

    #[test]
    fn noisy_plane_within_two_degrees() {
        let pts = plane_points(0.001, 7);
        let tree = KdTree::new(&pts);
        let truth = Vec3::new(0.0, 0.0, -1.0);
        for mode in [CovarianceCenter::Centroid, CovarianceCenter::Query] {
            let ns = estimate_point_normals_knn(&pts, &Vec3::zeros(), 200, mode).unwrap();
            for (p, n) in pts.iter().zip(&ns) {
                let interior = p.x.abs() < 0.4 && p.y.abs() < 0.3;
                if !interior {
                    continue;
                }
                let err = angle_between(n, &truth).unwrap();
                assert!(err < 2.0, "error {err} at {p:?}");
                // the least-squares fit on the same neighbourhood agrees
                let nb: Vec<Vec3> = tree.knn(p, 200).iter().map(|&(i, _)| pts[i]).collect();
                let fit = lsq_plane_normal(&nb);
                assert!(angle_between(&fit, &truth).unwrap() < 2.0);
            }
        }
    }

    #[test]
    fn collinear_neighbourhood_is_invalid() {
        let pts: Vec<Vec3> = (0..300)
            .map(|i| Vec3::new(i as f64 * 0.01, 0.0, 1.0))
            .collect();
        let ns = estimate_point_normals_knn(&pts, &Vec3::zeros(), 200, CovarianceCenter::Centroid)
            .unwrap();
        assert!(ns.iter().all(|n| *n == Vec3::zeros()));
    }

    #[test]
    fn too_few_points_rejected() {
        let pts = plane_points(0.0, 0);
        assert!(estimate_point_normals_knn(
            &pts[..50],
            &Vec3::zeros(),
            200,
            CovarianceCenter::Query
        )
        .is_err());
    }

    #[test]
    fn lifted_outlier_flagged_only_with_query_centering() {
        let mut pts = plane_points(0.0, 0);
        let outlier = Vec3::new(0.02, 0.01, 0.5);
        pts.push(outlier);
        let last = pts.len() - 1;
        let truth = Vec3::new(0.0, 0.0, -1.0);
        let c = estimate_point_normals_knn(&pts, &Vec3::zeros(), 200, CovarianceCenter::Centroid)
            .unwrap();
        let q =
            estimate_point_normals_knn(&pts, &Vec3::zeros(), 200, CovarianceCenter::Query).unwrap();
        assert!(angle_between(&c[last], &truth).unwrap() < 1.0);
        let tilt = if q[last] == Vec3::zeros() {
            90.0
        } else {
            angle_between(&q[last], &truth).unwrap()
        };
        assert!(tilt > 45.0, "query-centred tilt {tilt}");
    }

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(60.0, 60.0, 31.5, 23.5, 64, 48).unwrap()
    }

    #[test]
    fn fronto_parallel_plane() {
        let depth = DepthMap::from_fn(64, 48, |_, _| 2.0).unwrap();
        let n = render_normal_from_depth(&depth, &intr()).unwrap();
        for v in n.values() {
            assert!((v - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn tilted_plane_matches_analytic_normal() {
        // plane through (0,0,2) with normal rotated 30 degrees about y
        let t = 30f64.to_radians();
        let normal = Vec3::new(t.sin(), 0.0, -t.cos());
        let intr = intr();
        let depth = DepthMap::from_fn(64, 48, |x, y| {
            let ray = intr.unproject(x as f64, y as f64, 1.0);
            // normal . (s * ray - p0) = 0
            normal.dot(&Vec3::new(0.0, 0.0, 2.0)) / normal.dot(&ray)
        })
        .unwrap();
        let n = render_normal_from_depth(&depth, &intr).unwrap();
        for y in 1..47 {
            for x in 1..63 {
                assert!(angle_between(&n.get(x, y), &normal).unwrap() < 0.1);
            }
        }
    }

    #[test]
    fn invalid_stencil_propagates() {
        let mut depth = DepthMap::from_fn(64, 48, |_, _| 2.0).unwrap();
        depth.set(10, 10, 0.0);
        let n = render_normal_from_depth(&depth, &intr()).unwrap();
        for (x, y) in [(10, 10), (9, 10), (11, 10), (10, 9), (10, 11)] {
            assert!(!n.is_valid(x, y));
        }
        assert!(n.is_valid(9, 9));
        assert!(n.is_valid(12, 10));
    }

    #[test]
    fn depth_normals_on_grid() {
        let depth = DepthMap::from_fn(64, 48, |x, _| if x < 2 { 0.0 } else { 2.0 }).unwrap();
        let pose = RigidPose::look_at(Vec3::zeros(), Vec3::z(), Vec3::y()).unwrap();
        let n = depth_normals_knn(&depth, &intr(), &pose, 30, CovarianceCenter::Centroid).unwrap();
        assert_eq!(n.frame(), NormalFrame::World);
        assert!(!n.is_valid(0, 5));
        assert!((n.get(30, 20) - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-6);
    }
}
