use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::tables::{case_triangles, corner_offset, edge_corners};
use super::{prepared, Aabb, ScalarField};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::TriangleMesh;

pub const MAX_GRID_CELLS: u64 = 1_000_000_000;

/// Dense marching cubes over `bbox` with cubic voxels; corners sit at
/// `bbox.min + i * voxel`. The grid covers the box, rounding the cell count
/// up per axis. Cells with an undefined corner produce nothing.
pub fn uniform_marching_cubes<F: ScalarField + ?Sized>(
    f: &F,
    bbox: &Aabb,
    voxel: f64,
) -> Result<TriangleMesh> {
    bbox.validate()?;
    if !(voxel > 0.0 && voxel.is_finite()) {
        return Err(Error::invalid(format!(
            "voxel size must be positive, got {voxel}"
        )));
    }
    let ext = bbox.extent();
    let mut n = [0usize; 3];
    for k in 0..3 {
        let cells = ext[k] / voxel;
        if cells > MAX_GRID_CELLS as f64 {
            return Err(Error::invalid("grid exceeds the cell limit"));
        }
        // tolerate round-off when the extent is an exact multiple
        n[k] = ((cells - 1e-9).ceil() as usize).max(1);
    }
    let total = n[0] as u64 * n[1] as u64 * n[2] as u64;
    if total > MAX_GRID_CELLS {
        return Err(Error::invalid(format!(
            "grid of {}x{}x{} cells exceeds the limit of {MAX_GRID_CELLS}",
            n[0], n[1], n[2]
        )));
    }
    let (nx, ny) = (n[0] + 1, n[1] + 1);
    let origin = bbox.min;
    let point = |i: usize, j: usize, k: usize| {
        Vec3::new(
            origin.x + i as f64 * voxel,
            origin.y + j as f64 * voxel,
            origin.z + k as f64 * voxel,
        )
    };
    let layer = |k: usize| -> Vec<f64> {
        (0..nx * ny)
            .into_par_iter()
            .map(|idx| prepared(f.value(&point(idx % nx, idx / nx, k))))
            .collect()
    };

    let mut mesh = TriangleMesh::default();
    // vertex id per (lower corner linear index, axis)
    let mut index: FxHashMap<(u64, u8), u32> = FxHashMap::default();
    let mut below = layer(0);
    for k in 0..n[2] {
        let above = layer(k + 1);
        let value = |i: usize, j: usize, dz: u32| {
            let l = if dz == 0 { &below } else { &above };
            l[j * nx + i]
        };
        for j in 0..n[1] {
            for i in 0..n[0] {
                let mut vals = [0.0; 8];
                let mut case = 0u8;
                let mut undefined = false;
                for (c, v) in vals.iter_mut().enumerate() {
                    let o = corner_offset(c);
                    *v = value(i + o[0] as usize, j + o[1] as usize, o[2]);
                    undefined |= v.is_nan();
                    if *v < 0.0 {
                        case |= 1 << c;
                    }
                }
                if undefined {
                    continue;
                }
                for tri in case_triangles(case) {
                    let ids = tri.map(|e| {
                        let (a, b) = edge_corners(e as usize);
                        let oa = corner_offset(a);
                        let (gi, gj, gk) =
                            (i + oa[0] as usize, j + oa[1] as usize, k + oa[2] as usize);
                        let lin = (gk as u64 * ny as u64 + gj as u64) * nx as u64 + gi as u64;
                        *index.entry((lin, e / 4)).or_insert_with(|| {
                            let ob = corner_offset(b);
                            let (v0, v1) = (vals[a], vals[b]);
                            let t = v0 / (v0 - v1);
                            let p0 = point(gi, gj, gk);
                            let p1 =
                                point(i + ob[0] as usize, j + ob[1] as usize, k + ob[2] as usize);
                            mesh.vertices.push(p0 + (p1 - p0) * t);
                            (mesh.vertices.len() - 1) as u32
                        })
                    });
                    mesh.triangles.push(ids);
                }
            }
        }
        below = above;
    }
    let dropped = mesh.drop_degenerate();
    if dropped > 0 {
        log::debug!("dropped {dropped} degenerate triangles");
    }
    Ok(mesh)
}
