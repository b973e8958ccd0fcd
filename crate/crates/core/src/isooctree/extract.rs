use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::octree::{pack, Cell, HintOctree};
use super::polygon::{chain_loops, face_chords, min_area_triangulation, Crossing};
use super::tables::{case_triangles, corner_offset, edge_corners, face_cycle, outward};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::TriangleMesh;

/// A lattice segment `lo .. lo + len * e_axis` that carries at most one
/// iso-vertex. Every cell touching the segment derives the same key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct EdgeKey {
    lo: u64,
    axis: u8,
    len: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExtractStats {
    /// Cells triangulated from the case table.
    pub table_cells: usize,
    /// Cells whose boundary is subdivided by finer neighbours.
    pub refined_cells: usize,
    /// Cells skipped because a sample on their boundary is undefined.
    pub undefined_cells: usize,
    /// Cells whose face chords did not close; zero unless the tree is corrupt.
    pub inconsistent_cells: usize,
    /// Zero-area triangles removed from the output.
    pub degenerate_triangles: usize,
}

enum CellResult {
    Empty,
    Table(Vec<[EdgeKey; 3]>),
    Refined(Vec<[EdgeKey; 3]>),
    Undefined,
    Inconsistent,
}

struct Extractor<'a> {
    tree: &'a HintOctree,
}

#[inline]
fn add(p: [u32; 3], axis: usize, d: u32) -> [u32; 3] {
    let mut q = p;
    q[axis] += d;
    q
}

impl Extractor<'_> {
    #[inline]
    fn value(&self, p: [u32; 3]) -> f64 {
        self.tree.corner_value(p).unwrap_or(f64::NAN)
    }

    fn segment_key(p: [u32; 3], q: [u32; 3]) -> EdgeKey {
        let axis = (0..3).find(|&k| p[k] != q[k]).expect("distinct endpoints");
        let (lo, len) = if p[axis] < q[axis] {
            (p, q[axis] - p[axis])
        } else {
            (q, p[axis] - q[axis])
        };
        EdgeKey {
            lo: pack(lo),
            axis: axis as u8,
            len,
        }
    }

    /// Iso-vertex on a segment, interpolated from its lower endpoint.
    fn vertex(&self, k: &EdgeKey) -> Vec3 {
        let lo = super::octree::unpack(k.lo);
        let hi = add(lo, k.axis as usize, k.len);
        let (v0, v1) = (self.value(lo), self.value(hi));
        let t = v0 / (v0 - v1);
        let (a, b) = (self.tree.lattice_point(lo), self.tree.lattice_point(hi));
        a + (b - a) * t
    }

    /// Lattice points from `p` towards `q` (exclusive), splitting at every
    /// midpoint that is a leaf corner.
    fn walk_edge(&self, p: [u32; 3], q: [u32; 3], out: &mut Vec<[u32; 3]>) {
        let axis = (0..3).find(|&k| p[k] != q[k]).expect("distinct endpoints");
        let len = p[axis].abs_diff(q[axis]);
        if len >= 2 {
            let mut mid = p;
            mid[axis] = p[axis].min(q[axis]) + len / 2;
            if self.tree.has_corner(mid) {
                self.walk_edge(p, mid, out);
                self.walk_edge(mid, q, out);
                return;
            }
        }
        out.push(p);
    }

    /// Face pieces in a fixed order: a square is split while its center is
    /// a leaf corner, i.e. while the neighbour across it is subdivided.
    fn face_pieces(
        &self,
        origin: [u32; 3],
        size: u32,
        axis: usize,
        out: &mut Vec<([u32; 3], u32)>,
    ) {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        if size >= 2 {
            let half = size / 2;
            let center = add(add(origin, u, half), v, half);
            if self.tree.has_corner(center) {
                for (du, dv) in [(0, 0), (half, 0), (0, half), (half, half)] {
                    self.face_pieces(add(add(origin, u, du), v, dv), half, axis, out);
                }
                return;
            }
        }
        out.push((origin, size));
    }

    fn is_refined(&self, cell: &Cell, size: u32) -> bool {
        if size < 2 {
            return false;
        }
        (0..12).any(|e| {
            let (a, _) = edge_corners(e);
            let lo = corner_offset(a).map(|o| o * size);
            let p = [
                cell.min[0] + lo[0],
                cell.min[1] + lo[1],
                cell.min[2] + lo[2],
            ];
            self.tree.has_corner(add(p, e / 4, size / 2))
        })
    }

    fn process(&self, cell: &Cell) -> CellResult {
        let size = self.tree.cell_size(cell.level);
        let corner = |c: usize| {
            let o = corner_offset(c);
            [
                cell.min[0] + o[0] * size,
                cell.min[1] + o[1] * size,
                cell.min[2] + o[2] * size,
            ]
        };
        let mut case = 0u8;
        for c in 0..8 {
            let v = self.value(corner(c));
            if v.is_nan() {
                return CellResult::Undefined;
            }
            if v < 0.0 {
                case |= 1 << c;
            }
        }
        if !self.is_refined(cell, size) {
            let tris = case_triangles(case);
            if tris.is_empty() {
                return CellResult::Empty;
            }
            let key = |e: u8| {
                let (a, b) = edge_corners(e as usize);
                Self::segment_key(corner(a), corner(b))
            };
            return CellResult::Table(tris.iter().map(|t| t.map(key)).collect());
        }
        self.process_refined(cell, size)
    }

    fn process_refined(&self, cell: &Cell, size: u32) -> CellResult {
        let mut chords: Vec<(EdgeKey, EdgeKey)> = Vec::new();
        let mut pieces = Vec::new();
        let mut ring = Vec::new();
        let mut crossings = Vec::new();
        for axis in 0..3 {
            for side in 0..2u32 {
                pieces.clear();
                let origin = add(cell.min, axis, side * size);
                self.face_pieces(origin, size, axis, &mut pieces);
                for &(po, ps) in &pieces {
                    let cyc = face_cycle(axis, side).map(|o| {
                        let mut p = po;
                        for k in 0..3 {
                            if k != axis {
                                p[k] += o[k] * ps;
                            }
                        }
                        p
                    });
                    ring.clear();
                    for i in 0..4 {
                        self.walk_edge(cyc[i], cyc[(i + 1) % 4], &mut ring);
                    }
                    crossings.clear();
                    for i in 0..ring.len() {
                        let (p, q) = (ring[i], ring[(i + 1) % ring.len()]);
                        let (vp, vq) = (self.value(p), self.value(q));
                        if vp.is_nan() || vq.is_nan() {
                            return CellResult::Undefined;
                        }
                        if (vp < 0.0) != (vq < 0.0) {
                            let kind = if vq < 0.0 {
                                Crossing::Enter
                            } else {
                                Crossing::Exit
                            };
                            crossings.push((Self::segment_key(p, q), kind));
                        }
                    }
                    if !face_chords(&crossings, &mut chords) {
                        return CellResult::Inconsistent;
                    }
                }
            }
        }
        if chords.is_empty() {
            return CellResult::Empty;
        }
        let Some(loops) = chain_loops(&chords) else {
            return CellResult::Inconsistent;
        };
        let mut tris = Vec::new();
        for lp in loops {
            let pts: Vec<Vec3> = lp.iter().map(|k| self.vertex(k)).collect();
            for t in min_area_triangulation(&pts) {
                let [a, b, c] = outward(t);
                tris.push([lp[a], lp[b], lp[c]]);
            }
        }
        CellResult::Refined(tris)
    }
}

/// Crack-free isosurface of a sampled octree.
pub fn extract_isooctree_mesh(tree: &HintOctree) -> Result<TriangleMesh> {
    extract_isooctree_mesh_with_stats(tree).map(|(m, _)| m)
}

pub fn extract_isooctree_mesh_with_stats(
    tree: &HintOctree,
) -> Result<(TriangleMesh, ExtractStats)> {
    if !tree.is_sampled() {
        return Err(Error::invalid("octree corners have not been sampled"));
    }
    let ex = Extractor { tree };
    let results: Vec<CellResult> = tree.leaves().par_iter().map(|c| ex.process(c)).collect();

    let mut stats = ExtractStats::default();
    let mut index: FxHashMap<EdgeKey, u32> = FxHashMap::default();
    let mut mesh = TriangleMesh::default();
    for r in results {
        let tris = match r {
            CellResult::Empty => continue,
            CellResult::Undefined => {
                stats.undefined_cells += 1;
                continue;
            }
            CellResult::Inconsistent => {
                stats.inconsistent_cells += 1;
                continue;
            }
            CellResult::Table(t) => {
                stats.table_cells += 1;
                t
            }
            CellResult::Refined(t) => {
                stats.refined_cells += 1;
                t
            }
        };
        for t in tris {
            let ids = t.map(|k| {
                *index.entry(k).or_insert_with(|| {
                    mesh.vertices.push(ex.vertex(&k));
                    (mesh.vertices.len() - 1) as u32
                })
            });
            mesh.triangles.push(ids);
        }
    }
    stats.degenerate_triangles = mesh.drop_degenerate();
    if stats.inconsistent_cells > 0 {
        log::warn!(
            "{} octree cells had non-closing face chords",
            stats.inconsistent_cells
        );
    }
    Ok((mesh, stats))
}
