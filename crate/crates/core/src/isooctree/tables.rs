//! Marching cubes case table, generated from the face rule in
//! [`super::polygon`] so that table cells and octree cells with subdivided
//! faces always agree on shared faces.
//!
//! Corner `c` sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`. Edge
//! `4 * a + b1 + 2 * b2` runs along axis `a` from the corner whose
//! coordinates on axes `(a + 1) % 3` and `(a + 2) % 3` are `b1` and `b2`.
//! Case bit `c` is set when corner `c` is negative.

use std::sync::OnceLock;

use super::polygon::{chain_loops, face_chords, min_area_triangulation, Crossing};
use crate::geometry::Vec3;

/// Corner offsets of a face, counter-clockwise about its outward normal.
pub(crate) fn face_cycle(axis: usize, side: u32) -> [[u32; 3]; 4] {
    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
    let uv: [(u32, u32); 4] = if side == 1 {
        [(0, 0), (1, 0), (1, 1), (0, 1)]
    } else {
        [(0, 0), (0, 1), (1, 1), (1, 0)]
    };
    uv.map(|(cu, cv)| {
        let mut p = [0u32; 3];
        p[axis] = side;
        p[u] = cu;
        p[v] = cv;
        p
    })
}

pub(crate) fn corner_index(p: [u32; 3]) -> usize {
    (p[0] + 2 * p[1] + 4 * p[2]) as usize
}

pub(crate) fn corner_offset(c: usize) -> [u32; 3] {
    [(c & 1) as u32, ((c >> 1) & 1) as u32, ((c >> 2) & 1) as u32]
}

/// Edge joining two adjacent unit-cube corners.
pub(crate) fn edge_between(p: [u32; 3], q: [u32; 3]) -> usize {
    let axis = (0..3).find(|&k| p[k] != q[k]).expect("corners must differ");
    let (b1, b2) = (p[(axis + 1) % 3], p[(axis + 2) % 3]);
    4 * axis + (b1 + 2 * b2) as usize
}

/// Endpoints of an edge, lower corner first.
pub fn edge_corners(e: usize) -> (usize, usize) {
    let axis = e / 4;
    let (b1, b2) = ((e & 1) as u32, ((e >> 1) & 1) as u32);
    let mut p = [0u32; 3];
    p[(axis + 1) % 3] = b1;
    p[(axis + 2) % 3] = b2;
    let mut q = p;
    q[axis] = 1;
    (corner_index(p), corner_index(q))
}

fn edge_midpoint(e: usize) -> Vec3 {
    let (a, b) = edge_corners(e);
    let (p, q) = (corner_offset(a), corner_offset(b));
    Vec3::new(
        (p[0] + q[0]) as f64 / 2.0,
        (p[1] + q[1]) as f64 / 2.0,
        (p[2] + q[2]) as f64 / 2.0,
    )
}

/// Wraps a loop-ordered triangle so its normal points toward positive
/// values. Loops wind around the negative side.
#[inline]
pub(crate) fn outward([a, b, c]: [usize; 3]) -> [usize; 3] {
    [a, c, b]
}

fn build_case(case: u8) -> Vec<[u8; 3]> {
    let negative = |c: usize| case & (1 << c) != 0;
    let mut chords = Vec::new();
    for axis in 0..3 {
        for side in 0..2 {
            let cyc = face_cycle(axis, side);
            let mut crossings = Vec::new();
            for i in 0..4 {
                let (p, q) = (cyc[i], cyc[(i + 1) % 4]);
                let (np, nq) = (negative(corner_index(p)), negative(corner_index(q)));
                if np != nq {
                    let kind = if nq { Crossing::Enter } else { Crossing::Exit };
                    crossings.push((edge_between(p, q), kind));
                }
            }
            assert!(
                face_chords(&crossings, &mut chords),
                "inconsistent face in case {case}"
            );
        }
    }
    let loops = chain_loops(&chords).expect("face chords must close into loops");
    let mut out = Vec::new();
    for ring in loops {
        let pts: Vec<Vec3> = ring.iter().map(|&e| edge_midpoint(e)).collect();
        for t in min_area_triangulation(&pts) {
            let [a, b, c] = outward(t);
            out.push([ring[a] as u8, ring[b] as u8, ring[c] as u8]);
        }
    }
    out
}

/// Triangles, as edge-index triples, for a corner sign configuration.
pub fn case_triangles(case: u8) -> &'static [[u8; 3]] {
    static TABLE: OnceLock<Vec<Vec<[u8; 3]>>> = OnceLock::new();
    &TABLE.get_or_init(|| (0..=255u8).map(build_case).collect())[case as usize]
}
