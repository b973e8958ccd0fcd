use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::{prepared, Aabb, OctreeConfig, ScalarField};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};
use crate::spatial::KdTree;

pub const MAX_DEPTH_LIMIT: u32 = 12;

const KEY_BITS: u32 = 21;
const KEY_MASK: u64 = (1 << KEY_BITS) - 1;

#[inline]
pub(crate) fn pack(p: [u32; 3]) -> u64 {
    p[0] as u64 | (p[1] as u64) << KEY_BITS | (p[2] as u64) << (2 * KEY_BITS)
}

#[inline]
pub(crate) fn unpack(k: u64) -> [u32; 3] {
    [
        (k & KEY_MASK) as u32,
        ((k >> KEY_BITS) & KEY_MASK) as u32,
        ((k >> (2 * KEY_BITS)) & KEY_MASK) as u32,
    ]
}

/// Octree node addressed on the finest lattice: `min` is its lowest corner
/// and its side spans `1 << (max_depth - level)` lattice steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub level: u32,
    pub min: [u32; 3],
}

/// Leaves of an unbalanced octree over a cubic root, plus the isofunction
/// sampled once at every distinct leaf corner.
#[derive(Clone, Debug)]
pub struct HintOctree {
    origin: Vec3,
    width: f64,
    max_depth: u32,
    leaves: Vec<Cell>,
    corner_keys: Vec<u64>,
    corner_lookup: FxHashMap<u64, u32>,
    /// NaN marks an undefined sample.
    values: Option<Vec<f64>>,
}

impl HintOctree {
    /// Builds the tree top-down. Every cell above `initial_depth` is split;
    /// below it a cell is split while `split(center, width, level)` holds
    /// and `level < max_depth`.
    pub fn build<F>(root: &Aabb, max_depth: u32, initial_depth: u32, split: F) -> Result<Self>
    where
        F: Fn(&Vec3, f64, u32) -> bool + Sync,
    {
        root.validate()?;
        if !(1..=MAX_DEPTH_LIMIT).contains(&max_depth) {
            return Err(Error::invalid(format!(
                "max_depth must be in 1..={MAX_DEPTH_LIMIT}, got {max_depth}"
            )));
        }
        let cube = root.padded_cube(0.0);
        let mut tree = Self {
            origin: cube.min,
            width: cube.extent().x,
            max_depth,
            leaves: Vec::new(),
            corner_keys: Vec::new(),
            corner_lookup: FxHashMap::default(),
            values: None,
        };
        let mut frontier = vec![Cell {
            level: 0,
            min: [0; 3],
        }];
        while !frontier.is_empty() {
            let decisions: Vec<bool> = frontier
                .par_iter()
                .map(|c| {
                    c.level < max_depth
                        && (c.level < initial_depth
                            || split(&tree.cell_center(c), tree.cell_width(c.level), c.level))
                })
                .collect();
            let mut next = Vec::new();
            for (cell, split_it) in frontier.iter().zip(decisions) {
                if !split_it {
                    tree.leaves.push(*cell);
                    continue;
                }
                let half = tree.cell_size(cell.level) / 2;
                for c in 0..8u32 {
                    next.push(Cell {
                        level: cell.level + 1,
                        min: [
                            cell.min[0] + (c & 1) * half,
                            cell.min[1] + ((c >> 1) & 1) * half,
                            cell.min[2] + ((c >> 2) & 1) * half,
                        ],
                    });
                }
            }
            frontier = next;
        }
        tree.index_corners();
        Ok(tree)
    }

    /// Every branch split to exactly `depth`.
    pub fn uniform(root: &Aabb, depth: u32) -> Result<Self> {
        Self::build(root, depth, depth, |_, _, _| false)
    }

    fn index_corners(&mut self) {
        let mut keys: Vec<u64> = self
            .leaves
            .par_iter()
            .flat_map_iter(|cell| {
                let s = self.cell_size(cell.level);
                (0..8u32).map(move |c| {
                    pack([
                        cell.min[0] + (c & 1) * s,
                        cell.min[1] + ((c >> 1) & 1) * s,
                        cell.min[2] + ((c >> 2) & 1) * s,
                    ])
                })
            })
            .collect();
        keys.par_sort_unstable();
        keys.dedup();
        self.corner_lookup = keys
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, i as u32))
            .collect();
        self.corner_keys = keys;
    }

    /// Evaluates `f` once per distinct corner.
    pub fn sample_corners<F: ScalarField + ?Sized>(&mut self, f: &F) {
        let values = self
            .corner_keys
            .par_iter()
            .map(|&k| prepared(f.value(&self.lattice_point(unpack(k)))))
            .collect();
        self.values = Some(values);
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn root_box(&self) -> Aabb {
        Aabb {
            min: self.origin,
            max: self.origin + Vec3::repeat(self.width),
        }
    }

    pub fn leaves(&self) -> &[Cell] {
        &self.leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn corner_count(&self) -> usize {
        self.corner_keys.len()
    }

    pub fn is_sampled(&self) -> bool {
        self.values.is_some()
    }

    /// Leaf count per level, index = level.
    pub fn depth_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.max_depth as usize + 1];
        for c in &self.leaves {
            h[c.level as usize] += 1;
        }
        h
    }

    /// Finest lattice step in world units.
    pub fn lattice_step(&self) -> f64 {
        self.width / (1u64 << self.max_depth) as f64
    }

    /// Side length in lattice steps.
    #[inline]
    pub fn cell_size(&self, level: u32) -> u32 {
        1 << (self.max_depth - level)
    }

    #[inline]
    pub fn cell_width(&self, level: u32) -> f64 {
        self.width / (1u64 << level) as f64
    }

    pub fn cell_center(&self, c: &Cell) -> Vec3 {
        let h = self.lattice_step();
        let half = self.cell_size(c.level) as f64 / 2.0;
        Vec3::new(
            self.origin.x + (c.min[0] as f64 + half) * h,
            self.origin.y + (c.min[1] as f64 + half) * h,
            self.origin.z + (c.min[2] as f64 + half) * h,
        )
    }

    #[inline]
    pub fn lattice_point(&self, p: [u32; 3]) -> Vec3 {
        let h = self.lattice_step();
        Vec3::new(
            self.origin.x + p[0] as f64 * h,
            self.origin.y + p[1] as f64 * h,
            self.origin.z + p[2] as f64 * h,
        )
    }

    #[inline]
    pub(crate) fn has_corner(&self, p: [u32; 3]) -> bool {
        self.corner_lookup.contains_key(&pack(p))
    }

    /// Sampled value at a lattice corner: `None` if the point is not a leaf
    /// corner or nothing was sampled yet; NaN if the sample is undefined.
    #[inline]
    pub fn corner_value(&self, p: [u32; 3]) -> Option<f64> {
        let i = *self.corner_lookup.get(&pack(p))?;
        self.values.as_ref().map(|v| v[i as usize])
    }

    /// Sorted corner positions with their sampled values.
    pub fn corner_samples(&self) -> impl Iterator<Item = (Vec3, Option<f64>)> + '_ {
        self.corner_keys.iter().enumerate().map(move |(i, &k)| {
            let v = self
                .values
                .as_ref()
                .map(|vals| vals[i])
                .filter(|v| !v.is_nan());
            (self.lattice_point(unpack(k)), v)
        })
    }
}

/// Root cube and refinement from hint density: a cell of width h splits
/// when at least `expand_threshold` hints lie within h of its center.
pub fn build_hint_octree(hints: &PointCloud, cfg: &OctreeConfig) -> Result<HintOctree> {
    cfg.validate()?;
    if hints.is_empty() {
        return Err(Error::invalid("hint cloud is empty"));
    }
    let root = match cfg.root_box {
        Some(b) => b,
        None => {
            let b = Aabb::from_points(&hints.points).expect("non-empty");
            let cube = b.padded_cube(cfg.padding);
            if !(cube.extent().x > 0.0) {
                return Err(Error::invalid("hint cloud has zero extent"));
            }
            cube
        }
    };
    let index = KdTree::new(&hints.points);
    let n_e = cfg.expand_threshold;
    HintOctree::build(
        &root,
        cfg.max_depth,
        cfg.initial_depth,
        |center, width, _| index.count_within(center, width, n_e) >= n_e,
    )
}

/// Functional form of [`HintOctree::sample_corners`].
pub fn sample_corners<F: ScalarField + ?Sized>(mut tree: HintOctree, f: &F) -> HintOctree {
    tree.sample_corners(f);
    tree
}
