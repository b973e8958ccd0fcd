//! Exact nearest-neighbour queries over a static point set.
//!
//! Distances are compared as squared Euclidean distances; ties are broken by
//! point index so every query has a single well-defined answer.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::Vec3;

const LEAF_SIZE: usize = 12;

#[derive(Clone, Debug)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Balanced k-d tree over 3-D points. Indices returned by queries refer to
/// the slice the tree was built from.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    dist2: f64,
    index: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[inline]
fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    let d = a - b;
    d.x * d.x + d.y * d.y + d.z * d.z
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        assert!(
            points.len() < u32::MAX as usize,
            "point set too large for KdTree"
        );
        let mut tree = Self {
            points: points.to_vec(),
            order: (0..points.len() as u32).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                start: start as u32,
                end: end as u32,
            });
            return id;
        }
        // split along the axis of largest spread
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            let p = &self.points[i as usize];
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let axis = (hi - lo).imax();
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a as usize][axis]
                .total_cmp(&points[b as usize][axis])
                .then(a.cmp(&b))
        });
        let value = self.points[self.order[mid] as usize][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id as usize] = Node::Split {
            axis: axis as u8,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `query` as `(index, squared distance)`,
    /// sorted by distance then index. Returns fewer than `k` entries only if
    /// the tree holds fewer points.
    pub fn knn(&self, query: &Vec3, k: usize) -> Vec<(usize, f64)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_into(query, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        out.into_iter()
            .map(|c| (c.index as usize, c.dist2))
            .collect()
    }

    /// Neighbour indices only, reusing `out` to avoid allocation in hot loops.
    pub fn knn_indices(&self, query: &Vec3, k: usize, out: &mut Vec<usize>) {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_into(query, k, &mut heap);
        let mut cands = heap.into_vec();
        cands.sort_unstable();
        out.clear();
        out.extend(cands.into_iter().map(|c| c.index as usize));
    }

    fn knn_into(&self, query: &Vec3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        if k == 0 || self.points.is_empty() {
            return;
        }
        self.knn_recurse(0, query, k, heap);
    }

    fn knn_recurse(&self, node: u32, query: &Vec3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let cand = Candidate {
                        dist2: dist2(&self.points[i as usize], query),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis as usize] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_recurse(near, query, k, heap);
                // `<=` keeps equal-distance candidates with smaller indices reachable
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
                    self.knn_recurse(far, query, k, heap);
                }
            }
        }
    }

    /// Nearest point as `(index, squared distance)`.
    pub fn nearest(&self, query: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Candidate {
            dist2: f64::INFINITY,
            index: u32::MAX,
        };
        self.nearest_recurse(0, query, &mut best);
        Some((best.index as usize, best.dist2))
    }

    fn nearest_recurse(&self, node: u32, query: &Vec3, best: &mut Candidate) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let cand = Candidate {
                        dist2: dist2(&self.points[i as usize], query),
                        index: i,
                    };
                    if cand < *best {
                        *best = cand;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis as usize] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_recurse(near, query, best);
                if diff * diff <= best.dist2 {
                    self.nearest_recurse(far, query, best);
                }
            }
        }
    }

    /// Number of points with distance `<= radius`, stopping once `limit` is
    /// reached (the return value is then `limit`).
    pub fn count_within(&self, query: &Vec3, radius: f64, limit: usize) -> usize {
        if self.points.is_empty() || limit == 0 {
            return 0;
        }
        let mut count = 0;
        self.count_recurse(0, query, radius * radius, limit, &mut count);
        count.min(limit)
    }

    fn count_recurse(&self, node: u32, query: &Vec3, r2: f64, limit: usize, count: &mut usize) {
        if *count >= limit {
            return;
        }
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    if dist2(&self.points[i as usize], query) <= r2 {
                        *count += 1;
                        if *count >= limit {
                            return;
                        }
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis as usize] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.count_recurse(near, query, r2, limit, count);
                if diff * diff <= r2 {
                    self.count_recurse(far, query, r2, limit, count);
                }
            }
        }
    }

    /// Indices of all points within `radius`, sorted ascending.
    pub fn within(&self, query: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.within_recurse(0, query, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn within_recurse(&self, node: u32, query: &Vec3, r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                out.extend(
                    self.order[start as usize..end as usize]
                        .iter()
                        .filter(|&&i| dist2(&self.points[i as usize], query) <= r2)
                        .map(|&i| i as usize),
                );
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis as usize] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.within_recurse(near, query, r2, out);
                if diff * diff <= r2 {
                    self.within_recurse(far, query, r2, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_knn(points: &[Vec3], q: &Vec3, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, dist2(p, q)))
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn knn_matches_brute_force() {
        let pts = cloud(2000, 1);
        let tree = KdTree::new(&pts);
        for q in cloud(50, 2) {
            for k in [1, 7, 200] {
                assert_eq!(tree.knn(&q, k), brute_knn(&pts, &q, k));
            }
            let (i, d) = tree.nearest(&q).unwrap();
            assert_eq!((i, d), brute_knn(&pts, &q, 1)[0]);
        }
    }

    #[test]
    fn ties_broken_by_index() {
        // an integer lattice has many equidistant neighbours
        let mut pts = Vec::new();
        for x in 0..6 {
            for y in 0..6 {
                for z in 0..6 {
                    pts.push(Vec3::new(x as f64, y as f64, z as f64));
                }
            }
        }
        // duplicates as well
        pts.extend(pts.clone().iter().take(30));
        let tree = KdTree::new(&pts);
        for q in [
            Vec3::new(2.0, 2.0, 2.0),
            Vec3::new(2.5, 2.5, 2.5),
            Vec3::new(0.0, 0.0, 0.0),
        ] {
            for k in [1, 6, 19, 27, 40] {
                assert_eq!(tree.knn(&q, k), brute_knn(&pts, &q, k));
            }
            assert_eq!(tree.nearest(&q).unwrap(), brute_knn(&pts, &q, 1)[0]);
        }
    }

    #[test]
    fn radius_queries_match_brute_force() {
        let pts = cloud(3000, 3);
        let tree = KdTree::new(&pts);
        for q in cloud(40, 4) {
            let r = 0.3;
            let expect: Vec<usize> = (0..pts.len())
                .filter(|&i| dist2(&pts[i], &q) <= r * r)
                .collect();
            assert_eq!(tree.within(&q, r), expect);
            assert_eq!(tree.count_within(&q, r, usize::MAX), expect.len());
            assert_eq!(tree.count_within(&q, r, 5), expect.len().min(5));
        }
    }

    #[test]
    fn empty_and_small_trees() {
        let tree = KdTree::new(&[]);
        assert!(tree.knn(&Vec3::zeros(), 3).is_empty());
        assert!(tree.nearest(&Vec3::zeros()).is_none());
        assert_eq!(tree.count_within(&Vec3::zeros(), 1.0, 10), 0);
        let tree = KdTree::new(&[Vec3::x(), Vec3::y()]);
        assert_eq!(tree.knn(&Vec3::zeros(), 5).len(), 2);
    }
}
