//! Sample-based mesh comparison: accuracy, completion, Chamfer-L1, normal
//! consistency and F-score.
//!
//! Both meshes are sampled with the same seed, so `evaluate(m, m)` is exact
//! and swapping the arguments swaps accuracy and completion bit for bit.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::isooctree::Aabb;
use crate::mesh::TriangleMesh;
use crate::spatial::KdTree;

pub const DEFAULT_SAMPLES: usize = 200_000;
pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshMetrics {
    pub accuracy: f64,
    pub completion: f64,
    pub chamfer_l1: f64,
    pub normal_consistency: f64,
    pub f_score: f64,
    pub threshold: f64,
    #[serde(rename = "n_samples")]
    pub sample_count: usize,
    pub seed: u64,
}

impl MeshMetrics {
    /// One `key value` pair per line, in a fixed order.
    pub fn to_text(&self) -> String {
        format!(
            "accuracy {}\ncompletion {}\nchamfer_l1 {}\nnormal_consistency {}\nf_score {}\nthreshold {}\nn_samples {}\nseed {}\n",
            self.accuracy,
            self.completion,
            self.chamfer_l1,
            self.normal_consistency,
            self.f_score,
            self.threshold,
            self.sample_count,
            self.seed
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub samples: usize,
    pub threshold: f64,
    pub seed: u64,
    /// Both meshes are cut to this box before sampling.
    pub crop: Option<Aabb>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
            crop: None,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::invalid(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if let Some(b) = &self.crop {
            b.validate()?;
        }
        Ok(())
    }
}

/// Area-weighted uniform samples with the face normal of the source
/// triangle attached.
pub fn sample_mesh_points(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if n < 1 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if mesh.triangles.is_empty() {
        return Err(Error::invalid("cannot sample an empty mesh"));
    }
    mesh.validate()?;
    let areas: Vec<f64> = (0..mesh.triangle_count())
        .map(|t| mesh.triangle_area(t))
        .collect();
    let pick =
        WeightedIndex::new(&areas).map_err(|_| Error::invalid("mesh has zero surface area"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let t = pick.sample(&mut rng);
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        let [a, b, c] = mesh.corners(t);
        points.push(a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2));
        normals.push(mesh.face_normal(t));
    }
    Ok(PointCloud {
        points,
        normals: Some(normals),
        sources: None,
    })
}

/// Distances and normal agreements from each query sample to its nearest
/// reference sample.
fn nearest_stats(queries: &PointCloud, reference: &PointCloud, tree: &KdTree) -> Vec<(f64, f64)> {
    let qn = queries.normals.as_deref().expect("sampled normals");
    let rn = reference.normals.as_deref().expect("sampled normals");
    queries
        .points
        .par_iter()
        .zip(qn.par_iter())
        .map(|(p, n)| {
            let (i, d2) = tree.nearest(p).expect("non-empty reference");
            (d2.sqrt(), n.dot(&rn[i]).abs())
        })
        .collect()
}

pub fn evaluate(
    pred: &TriangleMesh,
    gt: &TriangleMesh,
    n: usize,
    threshold: f64,
    seed: u64,
) -> Result<MeshMetrics> {
    evaluate_with(
        pred,
        gt,
        &EvalConfig {
            samples: n,
            threshold,
            seed,
            crop: None,
        },
    )
}

pub fn evaluate_with(
    pred: &TriangleMesh,
    gt: &TriangleMesh,
    cfg: &EvalConfig,
) -> Result<MeshMetrics> {
    cfg.validate()?;
    let (pred, gt) = match &cfg.crop {
        Some(b) => (pred.cropped(&b.min, &b.max), gt.cropped(&b.min, &b.max)),
        None => (pred.clone(), gt.clone()),
    };
    if pred.triangles.is_empty() || gt.triangles.is_empty() {
        return Err(Error::invalid("both meshes must be non-empty"));
    }
    let ps = sample_mesh_points(&pred, cfg.samples, cfg.seed)?;
    let gs = sample_mesh_points(&gt, cfg.samples, cfg.seed)?;
    let (pt, gtree) = (KdTree::new(&ps.points), KdTree::new(&gs.points));
    let to_gt = nearest_stats(&ps, &gs, &gtree);
    let to_pred = nearest_stats(&gs, &ps, &pt);

    let mean =
        |v: &[(f64, f64)], f: fn(&(f64, f64)) -> f64| v.iter().map(f).sum::<f64>() / v.len() as f64;
    let within = |v: &[(f64, f64)]| {
        v.iter().filter(|(d, _)| *d < cfg.threshold).count() as f64 / v.len() as f64
    };
    let accuracy = mean(&to_gt, |s| s.0);
    let completion = mean(&to_pred, |s| s.0);
    let nc = 0.5 * (mean(&to_gt, |s| s.1) + mean(&to_pred, |s| s.1));
    let (precision, recall) = (within(&to_gt), within(&to_pred));
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MeshMetrics {
        accuracy,
        completion,
        chamfer_l1: 0.5 * (accuracy + completion),
        normal_consistency: nc.min(1.0),
        f_score,
        threshold: cfg.threshold,
        sample_count: cfg.samples,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RigidPose, Vec3};
    use nalgebra::{Rotation3, Vector3};
    use proptest::prelude::*;

    fn square(z: f64) -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, z),
                Vec3::new(1.0, 0.0, z),
                Vec3::new(1.0, 1.0, z),
                Vec3::new(0.0, 1.0, z),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
    }

    fn tetra() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        )
    }

    #[test]
    fn equal_triangles_split_evenly() {
        let n = 100_000;
        let cloud = sample_mesh_points(&square(0.0), n, 7).unwrap();
        // first triangle is below the diagonal y = x
        let lower = cloud.points.iter().filter(|p| p.y < p.x).count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((lower - n as f64 / 2.0).abs() < 3.0 * sigma);
        assert!((lower / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn single_sample_on_surface() {
        let m = tetra();
        let c = sample_mesh_points(&m, 1, 3).unwrap();
        let p = c.points[0];
        let on_face = (0..4).any(|t| {
            let [a, b, cc] = m.corners(t);
            let n = (b - a).cross(&(cc - a));
            let area2 = n.norm();
            let sub = |u: Vec3, v: Vec3| (u - p).cross(&(v - p)).norm();
            (n.dot(&(p - a)) / area2).abs() < 1e-12
                && (sub(a, b) + sub(b, cc) + sub(cc, a) - area2).abs() < 1e-9
        });
        assert!(on_face);
    }

    #[test]
    fn sampling_is_seeded() {
        let a = sample_mesh_points(&tetra(), 500, 11).unwrap();
        let b = sample_mesh_points(&tetra(), 500, 11).unwrap();
        let c = sample_mesh_points(&tetra(), 500, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn empty_and_zero_inputs_rejected() {
        assert!(sample_mesh_points(&TriangleMesh::default(), 10, 0).is_err());
        assert!(sample_mesh_points(&tetra(), 0, 0).is_err());
        assert!(evaluate(&tetra(), &tetra(), 0, 0.05, 0).is_err());
        assert!(evaluate(&TriangleMesh::default(), &tetra(), 10, 0.05, 0).is_err());
    }

    #[test]
    fn identity() {
        let m = evaluate(&tetra(), &tetra(), 5000, 0.05, 1).unwrap();
        assert_eq!((m.accuracy, m.completion, m.chamfer_l1), (0.0, 0.0, 0.0));
        assert_eq!((m.normal_consistency, m.f_score), (1.0, 1.0));
    }

    #[test]
    fn plane_offsets() {
        let near = evaluate(&square(0.01), &square(0.0), 20_000, 0.05, 2).unwrap();
        assert!((near.accuracy - 0.01).abs() < 1e-3);
        assert!((near.completion - 0.01).abs() < 1e-3);
        assert_eq!(near.f_score, 1.0);
        let far = evaluate(&square(0.10), &square(0.0), 20_000, 0.05, 2).unwrap();
        assert_eq!(far.f_score, 0.0);
        assert!((far.chamfer_l1 - 0.1).abs() < 1e-3);
    }

    #[test]
    fn swapping_swaps_directions() {
        let a = square(0.0);
        let b = tetra();
        let ab = evaluate(&a, &b, 3000, 0.05, 4).unwrap();
        let ba = evaluate(&b, &a, 3000, 0.05, 4).unwrap();
        assert_eq!(ab.accuracy, ba.completion);
        assert_eq!(ab.completion, ba.accuracy);
        assert_eq!(ab.chamfer_l1, ba.chamfer_l1);
        assert_eq!(ab.f_score, ba.f_score);
        assert!((ab.normal_consistency - ba.normal_consistency).abs() < 1e-15);
    }

    #[test]
    fn rigid_motion_of_both_meshes() {
        let pose = RigidPose::new(
            *Rotation3::from_axis_angle(&Vector3::y_axis(), 0.7).matrix(),
            Vec3::new(0.3, -2.0, 5.0),
        )
        .unwrap();
        let (a, b) = (square(0.02), tetra());
        let m0 = evaluate(&a, &b, 3000, 0.05, 9).unwrap();
        let m1 = evaluate(&a.transformed(&pose), &b.transformed(&pose), 3000, 0.05, 9).unwrap();
        assert!((m0.accuracy - m1.accuracy).abs() < 1e-9);
        assert!((m0.completion - m1.completion).abs() < 1e-9);
        assert!((m0.normal_consistency - m1.normal_consistency).abs() < 1e-9);
        assert_eq!(m0.f_score, m1.f_score);
    }

    #[test]
    fn crop_restricts_both_meshes() {
        let mut far = tetra();
        for v in &mut far.vertices {
            *v += Vec3::new(10.0, 0.0, 0.0);
        }
        let mut both = square(0.0);
        let off = both.vertices.len() as u32;
        both.vertices.extend(far.vertices.iter().copied());
        both.triangles
            .extend(far.triangles.iter().map(|t| t.map(|i| i + off)));
        let cfg = EvalConfig {
            samples: 2000,
            crop: Some(Aabb::new(Vec3::repeat(-0.5), Vec3::repeat(1.5)).unwrap()),
            ..Default::default()
        };
        let m = evaluate_with(&both, &square(0.0), &cfg).unwrap();
        assert_eq!(m.chamfer_l1, 0.0);
    }

    #[test]
    fn report_keys() {
        let m = evaluate(&tetra(), &tetra(), 100, 0.05, 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "accuracy",
                "chamfer_l1",
                "completion",
                "f_score",
                "n_samples",
                "normal_consistency",
                "seed",
                "threshold"
            ]
        );
        let text = m.to_text();
        assert!(text.lines().all(|l| l.split(' ').count() == 2));
        assert_eq!(text.lines().count(), 8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn f_score_monotone_in_threshold(offset in 0.0f64..0.2, t0 in 0.001f64..0.1, dt in 0.0f64..0.1, seed in 0u64..100) {
            let a = square(offset);
            let b = tetra();
            let lo = evaluate(&a, &b, 400, t0, seed).unwrap();
            let hi = evaluate(&a, &b, 400, t0 + dt, seed).unwrap();
            prop_assert!(hi.f_score >= lo.f_score);
            prop_assert!((lo.chamfer_l1 - 0.5 * (lo.accuracy + lo.completion)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&lo.f_score));
            prop_assert!((0.0..=1.0).contains(&lo.normal_consistency));
        }
    }
}
