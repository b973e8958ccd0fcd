//! Cell polygonisation shared by the lookup table and octree cells.
//!
//! Each cube face is walked counter-clockwise about its outward normal.
//! Along that cycle, sign crossings alternate between entering the negative
//! region (`Enter`) and leaving it (`Exit`). Every `Enter` pairs with the
//! `Exit` that follows it, so each run of negative samples is cut off by one
//! chord. A neighbour walking the same face in the opposite direction sees
//! the same runs and produces the same chords reversed, which is what makes
//! coarse and fine cells agree.

use std::collections::HashMap;
use std::hash::Hash;

use crate::geometry::Vec3;
use crate::mesh::is_degenerate;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Crossing {
    /// Positive to negative along the walk.
    Enter,
    /// Negative to positive along the walk.
    Exit,
}

/// Chords for one face cycle, each directed `Exit -> Enter`. Crossings must
/// be listed in walk order; their kinds alternate.
pub(crate) fn face_chords<K: Copy>(cycle: &[(K, Crossing)], out: &mut Vec<(K, K)>) -> bool {
    let n = cycle.len();
    if n == 0 {
        return true;
    }
    if !n.is_multiple_of(2) {
        return false;
    }
    let Some(start) = cycle.iter().position(|c| c.1 == Crossing::Enter) else {
        return false;
    };
    for p in 0..n / 2 {
        let enter = cycle[(start + 2 * p) % n];
        let exit = cycle[(start + 2 * p + 1) % n];
        if enter.1 != Crossing::Enter || exit.1 != Crossing::Exit {
            return false;
        }
        out.push((exit.0, enter.0));
    }
    true
}

/// Joins directed chords into closed loops, in order of first appearance.
/// `None` if some chord end has no successor or a start repeats.
pub(crate) fn chain_loops<K: Copy + Eq + Hash>(chords: &[(K, K)]) -> Option<Vec<Vec<K>>> {
    let mut next: HashMap<K, (K, usize)> = HashMap::with_capacity(chords.len());
    for (i, &(a, b)) in chords.iter().enumerate() {
        if next.insert(a, (b, i)).is_some() {
            return None;
        }
    }
    let mut used = vec![false; chords.len()];
    let mut loops = Vec::new();
    for (i, &(a, _)) in chords.iter().enumerate() {
        if used[i] {
            continue;
        }
        let mut ring = vec![a];
        let mut cur = a;
        loop {
            let &(b, idx) = next.get(&cur)?;
            if used[idx] {
                return None;
            }
            used[idx] = true;
            if b == a {
                break;
            }
            ring.push(b);
            cur = b;
        }
        loops.push(ring);
    }
    Some(loops)
}

/// Added to the cost of any triangle with (relative) zero area so that the
/// triangulation avoids them whenever another choice exists.
const DEGENERATE_PENALTY: f64 = 1e30;

fn triangle_cost(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    if is_degenerate(a, b, c) {
        DEGENERATE_PENALTY
    } else {
        0.5 * (b - a).cross(&(c - a)).norm()
    }
}

/// Minimum-total-area triangulation of a closed polygon. Triangles keep the
/// polygon's winding. Ties resolve to the smallest split index.
pub(crate) fn min_area_triangulation(points: &[Vec3]) -> Vec<[usize; 3]> {
    let m = points.len();
    if m < 3 {
        return Vec::new();
    }
    if m == 3 {
        return vec![[0, 1, 2]];
    }
    let mut cost = vec![0.0f64; m * m];
    let mut split = vec![0usize; m * m];
    for len in 2..m {
        for i in 0..m - len {
            let j = i + len;
            let mut best = f64::INFINITY;
            let mut best_k = i + 1;
            for k in i + 1..j {
                let c = cost[i * m + k]
                    + cost[k * m + j]
                    + triangle_cost(&points[i], &points[k], &points[j]);
                if c < best {
                    best = c;
                    best_k = k;
                }
            }
            cost[i * m + j] = best;
            split[i * m + j] = best_k;
        }
    }
    let mut out = Vec::with_capacity(m - 2);
    let mut stack = vec![(0usize, m - 1)];
    while let Some((i, j)) = stack.pop() {
        if j < i + 2 {
            continue;
        }
        let k = split[i * m + j];
        out.push([i, k, j]);
        stack.push((k, j));
        stack.push((i, k));
    }
    out
}
