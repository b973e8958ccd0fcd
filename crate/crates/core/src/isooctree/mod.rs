//! Adaptive octree isosurface extraction driven by a point-cloud hint, and a
//! dense marching cubes extractor that shares its case table.
//!
//! Sign convention: the surface is the zero set, negative values are inside
//! (behind observed surfaces) and output triangles face the positive side.

mod extract;
mod octree;
mod polygon;
pub mod tables;
mod uniform;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub use extract::{extract_isooctree_mesh, extract_isooctree_mesh_with_stats, ExtractStats};
pub use octree::{build_hint_octree, sample_corners, Cell, HintOctree, MAX_DEPTH_LIMIT};
pub use uniform::{uniform_marching_cubes, MAX_GRID_CELLS};

/// Scalar function sampled by the extractors; `None` marks an undefined
/// sample.
pub trait ScalarField: Sync {
    fn value(&self, p: &Vec3) -> Option<f64>;
}

impl<F> ScalarField for F
where
    F: Fn(&Vec3) -> Option<f64> + Sync,
{
    fn value(&self, p: &Vec3) -> Option<f64> {
        self(p)
    }
}

/// Samples equal to zero are moved to the positive side by this amount.
pub const ZERO_NUDGE: f64 = 1e-12;

/// Field value ready for sign tests: finite, never exactly zero, NaN when
/// undefined.
#[inline]
pub(crate) fn prepared(v: Option<f64>) -> f64 {
    match v {
        Some(0.0) => ZERO_NUDGE,
        Some(x) if x.is_finite() => x,
        _ => f64::NAN,
    }
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        let b = Self { min, max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0..3).all(|k| {
            self.min[k].is_finite() && self.max[k].is_finite() && self.max[k] > self.min[k]
        });
        if !ok {
            return Err(Error::invalid(format!(
                "box must have positive finite extent, got {:?} .. {:?}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    /// Tight bounds of a point set, `None` when empty.
    pub fn from_points(points: &[Vec3]) -> Option<Self> {
        let first = *points.first()?;
        let (min, max) = points
            .iter()
            .fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Some(Self { min, max })
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Smallest cube with the same center that contains the box after
    /// growing each side by `pad` times the largest extent.
    pub fn padded_cube(&self, pad: f64) -> Self {
        let side = self.extent().max() * (1.0 + 2.0 * pad);
        let half = Vec3::repeat(side / 2.0);
        let c = self.center();
        Self {
            min: c - half,
            max: c + half,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OctreeConfig {
    pub max_depth: u32,
    /// Split a cell of width h when at least this many hint points lie
    /// within distance h of its center.
    pub expand_threshold: usize,
    /// Depth every branch is split to regardless of the hint.
    pub initial_depth: u32,
    /// Explicit root box; taken from the hint cloud when absent.
    pub root_box: Option<Aabb>,
    /// Fractional padding applied to the hint bounds.
    pub padding: f64,
}

impl Default for OctreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 10,
            expand_threshold: 50,
            initial_depth: 3,
            root_box: None,
            padding: 0.05,
        }
    }
}

impl OctreeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DEPTH_LIMIT).contains(&self.max_depth) {
            return Err(Error::invalid(format!(
                "max_depth must be in 1..={MAX_DEPTH_LIMIT}, got {}",
                self.max_depth
            )));
        }
        if self.expand_threshold < 1 {
            return Err(Error::invalid("expand_threshold must be >= 1"));
        }
        if !(self.padding >= 0.0 && self.padding.is_finite()) {
            return Err(Error::invalid(format!(
                "padding must be >= 0, got {}",
                self.padding
            )));
        }
        if let Some(b) = &self.root_box {
            b.validate()?;
        }
        Ok(())
    }
}
