//! Geometric-prior filtering and depth-adaptive surface reconstruction for
//! posed RGB-D sequences.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] – pinhole cameras, rigid poses, depth/normal maps,
//!   back-projection and interpolation.
//! * [`spatial`] – exact k-d tree used by every neighbourhood query.
//! * [`priors`] – depth-normal consistency and adaptive normal filters plus
//!   the scheduled regularisation losses.
//! * [`fusion`] – the depth-aware truncated signed distance isofunction.
//! * [`isooctree`] – point-hint octree and crack-free octree marching cubes,
//!   with a dense marching cubes extractor for comparison.
//! * [`metrics`] – accuracy / completion / chamfer / normal consistency /
//!   F-score between meshes.
//! * [`io`], [`synth`], [`pipeline`], [`cli`] – datasets, synthetic scenes and
//!   the command line front end.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod isooctree;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod priors;
pub mod spatial;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{
    CameraIntrinsics, DepthMap, Frame, NormalFrame, NormalMap, PointCloud, RigidPose, Vec3,
};
pub use mesh::TriangleMesh;
