use crate::geometry::{DepthMap, NormalMap};

/// Pixels kept by the depth-discontinuity filter: a valid pixel is dropped
/// when any valid 8-neighbour differs from it by more than `edge_rel · d`.
pub fn edge_mask(depth: &DepthMap, edge_rel: f64) -> Vec<bool> {
    let (w, h) = (depth.width(), depth.height());
    let mut keep = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let d = depth.get(x, y);
            if d <= 0.0 {
                continue;
            }
            let limit = edge_rel * d;
            let mut ok = true;
            'scan: for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let dn = depth.get(nx, ny);
                    if dn > 0.0 && (dn - d).abs() > limit {
                        ok = false;
                        break 'scan;
                    }
                }
            }
            keep[y * w + x] = ok;
        }
    }
    keep
}

/// Applies [`edge_mask`] to the depth map, returning the mask as well.
pub fn edge_filter_depth(depth: &DepthMap, edge_rel: f64) -> (DepthMap, Vec<bool>) {
    let mask = edge_mask(depth, edge_rel);
    (depth.masked(&mask), mask)
}

/// Applies the same mask to depth and normals.
pub fn edge_filter_frame(
    depth: &DepthMap,
    normals: &NormalMap,
    edge_rel: f64,
) -> (DepthMap, NormalMap, Vec<bool>) {
    let (d, mask) = edge_filter_depth(depth, edge_rel);
    (d, normals.masked(&mask), mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_depth_untouched() {
        let d = DepthMap::from_fn(8, 6, |_, _| 1.5).unwrap();
        let (out, mask) = edge_filter_depth(&d, 0.02);
        assert_eq!(out, d);
        assert!(mask.iter().all(|m| *m));
    }

    #[test]
    fn step_edge_drops_both_sides() {
        let d = DepthMap::from_fn(8, 4, |x, _| if x < 4 { 1.0 } else { 2.0 }).unwrap();
        let (out, _) = edge_filter_depth(&d, 0.02);
        for y in 0..4 {
            for x in 0..8 {
                let expect_removed = x == 3 || x == 4;
                assert_eq!(out.get(x, y) == 0.0, expect_removed, "({x},{y})");
            }
        }
    }

    #[test]
    fn gentle_ramp_kept() {
        let d = DepthMap::from_fn(16, 4, |x, _| 1.001f64.powi(x as i32)).unwrap();
        let (_, mask) = edge_filter_depth(&d, 0.02);
        assert!(mask.iter().all(|m| *m));
    }

    #[test]
    fn invalid_neighbours_ignored() {
        let mut d = DepthMap::from_fn(5, 5, |_, _| 1.0).unwrap();
        d.set(2, 2, 0.0);
        let (out, mask) = edge_filter_depth(&d, 0.02);
        assert!(!mask[2 * 5 + 2]);
        assert_eq!(out.valid_count(), 24);
    }
}
