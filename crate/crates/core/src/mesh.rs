//! Indexed triangle meshes and the topology queries used to check them.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{RigidPose, Vec3};

/// A triangle is degenerate when its area is at most this fraction of its
/// longest edge squared.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[inline]
pub fn is_degenerate(a: &Vec3, b: &Vec3, c: &Vec3) -> bool {
    let area = 0.5 * (b - a).cross(&(c - a)).norm();
    let longest = (b - a)
        .norm_squared()
        .max((c - b).norm_squared())
        .max((a - c).norm_squared());
    !(area > DEGENERATE_AREA * longest)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Option<Vec<Vec3>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            triangles,
            normals: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Checks index range, finiteness, normal count and triangle area.
    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self
            .vertices
            .iter()
            .find(|v| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::invalid(format!("non-finite vertex {v:?}")));
        }
        let n = self.vertices.len();
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v as usize >= n) {
                return Err(Error::invalid(format!(
                    "triangle {i} index out of range: {t:?}"
                )));
            }
            let [a, b, c] = self.corners(i);
            if is_degenerate(&a, &b, &c) {
                return Err(Error::invalid(format!("triangle {i} is degenerate")));
            }
        }
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(Error::invalid(
                    "vertex normal count does not match vertex count",
                ));
            }
        }
        Ok(())
    }

    /// Removes zero-area triangles, returning how many were removed.
    ///
    /// The area test also runs on corners rounded to f32, so a mesh survives
    /// a save and load unchanged. Edges of such triangles whose ends coincide
    /// in f32 are collapsed first, which keeps closed surfaces closed;
    /// unreferenced vertices are then dropped.
    pub fn drop_degenerate(&mut self) -> usize {
        let round = |v: &Vec3| v.map(|c| c as f32 as f64);
        let verts = &self.vertices;
        let bad = |t: &[u32; 3]| {
            let [a, b, c] = t.map(|i| verts[i as usize]);
            is_degenerate(&a, &b, &c) || is_degenerate(&round(&a), &round(&b), &round(&c))
        };
        let mut parent: Vec<u32> = (0..verts.len() as u32).collect();
        fn find(parent: &mut [u32], mut i: u32) -> u32 {
            while parent[i as usize] != i {
                parent[i as usize] = parent[parent[i as usize] as usize];
                i = parent[i as usize];
            }
            i
        }
        let mut merged = false;
        for t in self.triangles.iter().filter(|t| bad(t)) {
            for (i, j) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if round(&verts[i as usize]) == round(&verts[j as usize]) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj) as usize] = ri.min(rj);
                        merged = true;
                    }
                }
            }
        }
        let before = self.triangles.len();
        if merged {
            for t in &mut self.triangles {
                *t = t.map(|v| find(&mut parent, v));
            }
        }
        let verts = &self.vertices;
        let bad = |t: &[u32; 3]| {
            let [a, b, c] = t.map(|i| verts[i as usize]);
            is_degenerate(&a, &b, &c) || is_degenerate(&round(&a), &round(&b), &round(&c))
        };
        self.triangles
            .retain(|t| t[0] != t[1] && t[1] != t[2] && t[2] != t[0] && !bad(t));
        if merged {
            *self = self.compacted();
        }
        before - self.triangles.len()
    }

    #[inline]
    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Unit face normal by the right-hand rule; zero for degenerate faces.
    pub fn face_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    /// Area-weighted vertex normals.
    pub fn compute_vertex_normals(&mut self) {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.corners(t);
            let n = (b - a).cross(&(c - a));
            for &v in &self.triangles[t] {
                acc[v as usize] += n;
            }
        }
        for n in &mut acc {
            let len = n.norm();
            *n = if len > 0.0 { *n / len } else { Vec3::zeros() };
        }
        self.normals = Some(acc);
    }

    /// Undirected edge -> number of incident triangles, sorted by edge.
    pub fn edge_incidence(&self) -> Vec<((u32, u32), u32)> {
        let mut counts: HashMap<(u32, u32), u32> =
            HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut out: Vec<_> = counts.into_iter().collect();
        out.sort_unstable();
        out
    }

    /// Edges used by exactly one triangle.
    pub fn boundary_edge_count(&self) -> usize {
        self.edge_incidence()
            .iter()
            .filter(|(_, c)| *c == 1)
            .count()
    }

    /// Edges used by more than two triangles.
    pub fn non_manifold_edge_count(&self) -> usize {
        self.edge_incidence().iter().filter(|(_, c)| *c > 2).count()
    }

    /// Directed edges that appear twice with the same direction. Zero on a
    /// consistently oriented manifold.
    pub fn inconsistent_orientation_count(&self) -> usize {
        let mut seen: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.triangles.len() * 3);
        for t in &self.triangles {
            for k in 0..3 {
                *seen.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        seen.values().filter(|&&c| c > 1).count()
    }

    /// V − E + F counting only vertices referenced by some triangle.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v as usize] = true;
            }
        }
        let v = used.iter().filter(|u| **u).count() as i64;
        let e = self.edge_incidence().len() as i64;
        v - e + self.triangles.len() as i64
    }

    /// Number of edge-connected triangle components.
    pub fn connected_components(&self) -> usize {
        let mut parent: Vec<u32> = (0..self.vertices.len() as u32).collect();
        fn find(p: &mut [u32], mut x: u32) -> u32 {
            while p[x as usize] != x {
                p[x as usize] = p[p[x as usize] as usize];
                x = p[x as usize];
            }
            x
        }
        for t in &self.triangles {
            let r0 = find(&mut parent, t[0]);
            for &v in &t[1..] {
                let r = find(&mut parent, v);
                if r != r0 {
                    parent[r as usize] = r0;
                }
            }
        }
        let mut roots: Vec<u32> = self
            .triangles
            .iter()
            .map(|t| find(&mut parent, t[0]))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v))),
        )
    }

    pub fn transformed(&self, pose: &RigidPose) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| pose.transform_point(v))
                .collect(),
            triangles: self.triangles.clone(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| pose.transform_vector(n)).collect()),
        }
    }

    /// Triangles with all three vertices inside the closed box, with unused
    /// vertices dropped.
    pub fn cropped(&self, lo: &Vec3, hi: &Vec3) -> Self {
        let inside = |v: &Vec3| (0..3).all(|k| v[k] >= lo[k] && v[k] <= hi[k]);
        let keep: Vec<[u32; 3]> = self
            .triangles
            .iter()
            .filter(|t| t.iter().all(|&v| inside(&self.vertices[v as usize])))
            .copied()
            .collect();
        Self::new(self.vertices.clone(), keep).compacted()
    }

    /// Drops unreferenced vertices, keeping the relative order of the rest.
    pub fn compacted(&self) -> Self {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                remap[v as usize] = 0;
            }
        }
        let mut vertices = Vec::new();
        let mut normals = self.normals.as_ref().map(|_| Vec::new());
        for (i, r) in remap.iter_mut().enumerate() {
            if *r == 0 {
                *r = vertices.len() as u32;
                vertices.push(self.vertices[i]);
                if let (Some(out), Some(src)) = (normals.as_mut(), self.normals.as_ref()) {
                    out.push(src[i]);
                }
            }
        }
        let triangles = self
            .triangles
            .iter()
            .map(|t| {
                [
                    remap[t[0] as usize],
                    remap[t[1] as usize],
                    remap[t[2] as usize],
                ]
            })
            .collect();
        Self {
            vertices,
            triangles,
            normals,
        }
    }
}
