//! C ABI over the `priorfuse` library.
//!
//! Every fallible entry point returns a [`PfStatus`]; on failure a message
//! for the calling thread is available from [`pf_last_error_message`].
//! Meshes and datasets cross the boundary as opaque handles that the caller
//! owns and releases with the matching `*_free` function. Panics never
//! unwind into C; they are reported as [`PfStatus::Internal`].
//!
//! Arrays are row-major. Images are `width * height` pixels, row by row;
//! normals and vertices are packed `x, y, z` triples of `double`. Poses are
//! 4x4 camera-to-world matrices, row-major, 16 doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::slice;

use priorfuse::geometry::{
    CameraIntrinsics, DepthMap, Frame, NormalFrame, NormalMap, RigidPose, Vec3,
};
use priorfuse::io::{load_dataset, load_mesh, save_mesh, POSE_TOLERANCE};
use priorfuse::metrics::{evaluate, MeshMetrics};
use priorfuse::pipeline::{run_pipeline, PipelineConfig};
use priorfuse::priors::{anr_filter_normals, dnc_filter_frame, AnrConfig, DncConfig};
use priorfuse::{Error, TriangleMesh};

/// Result code of every fallible call. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument or the data it points to violates a precondition.
    InvalidInput = 2,
    /// A file could not be read or written.
    Io = 3,
    /// A file was read but its contents are malformed.
    Parse = 4,
    /// A library invariant failed or the library panicked; this is a bug.
    Internal = 5,
}

/// Triangle mesh owned by the library.
pub struct PfMesh(TriangleMesh);

/// Posed frames loaded from a manifest.
pub struct PfDataset(Vec<Frame>);

/// Pinhole intrinsics in pixels.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PfIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// Mesh comparison result; distances in meters.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct PfMetrics {
    pub accuracy: f64,
    pub completion: f64,
    pub chamfer_l1: f64,
    pub normal_consistency: f64,
    pub f_score: f64,
    pub threshold: f64,
    pub sample_count: usize,
}

impl From<MeshMetrics> for PfMetrics {
    fn from(m: MeshMetrics) -> Self {
        Self {
            accuracy: m.accuracy,
            completion: m.completion,
            chamfer_l1: m.chamfer_l1,
            normal_consistency: m.normal_consistency,
            f_score: m.f_score,
            threshold: m.threshold,
            sample_count: m.sample_count,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    // interior NULs would truncate the message; replace them
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(PfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = status_of(&e);
        Failure(status, e.to_string())
    }
}

fn status_of(e: &Error) -> PfStatus {
    match e {
        Error::Frame { source, .. } => status_of(source),
        Error::Io { .. } => PfStatus::Io,
        Error::Parse { .. } | Error::Image(_) | Error::Json(_) => PfStatus::Parse,
        Error::Invariant(_) => PfStatus::Internal,
        _ => PfStatus::InvalidInput,
    }
}

fn null(what: &str) -> Failure {
    Failure(PfStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PfStatus::InvalidInput, msg.into())
}

/// Runs `f`, records its error message and maps panics to `Internal`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            PfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal error: {msg}"));
            PfStatus::Internal
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn pixel_count(width: usize, height: usize) -> Result<usize, Failure> {
    // normal buffers hold three doubles per pixel
    match width.checked_mul(height) {
        Some(n) if n.checked_mul(3).is_some() => Ok(n),
        _ => Err(invalid("image size overflows")),
    }
}

fn vectors(xyz: &[f64]) -> Vec<Vec3> {
    xyz.chunks_exact(3)
        .map(|c| Vec3::new(c[0], c[1], c[2]))
        .collect()
}

fn write_vectors(out: &mut [f64], v: &[Vec3]) {
    for (o, n) in out.chunks_exact_mut(3).zip(v) {
        o.copy_from_slice(n.as_slice());
    }
}

fn write_mask(out: &mut [u8], mask: &[bool]) {
    for (o, &m) in out.iter_mut().zip(mask) {
        *o = u8::from(m);
    }
}

/// Message of the last failed call on this thread, or an empty string after
/// a success. The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn pf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn pf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a mesh from `vertex_count` xyz triples and `triangle_count` index
/// triples.
///
/// # Safety
/// `vertices` must point to `3 * vertex_count` doubles and `triangles` to
/// `3 * triangle_count` integers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_new(
    vertices: *const f64,
    vertex_count: usize,
    triangles: *const u32,
    triangle_count: usize,
    out: *mut *mut PfMesh,
) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let nv = vertex_count
            .checked_mul(3)
            .ok_or_else(|| invalid("vertex count overflows"))?;
        let nt = triangle_count
            .checked_mul(3)
            .ok_or_else(|| invalid("triangle count overflows"))?;
        let v = vectors(slice_arg(vertices, nv, "vertices")?);
        let t = slice_arg(triangles, nt, "triangles")?
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect();
        let mesh = TriangleMesh::new(v, t);
        mesh.validate()?;
        *out = Box::into_raw(Box::new(PfMesh(mesh)));
        Ok(())
    })
}

/// Reads a binary little-endian PLY mesh.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_load_ply(path: *const c_char, out: *mut *mut PfMesh) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mesh = load_mesh(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(PfMesh(mesh)));
        Ok(())
    })
}

/// Writes `mesh` as binary little-endian PLY, replacing `path` atomically.
///
/// # Safety
/// `mesh` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_save_ply(mesh: *const PfMesh, path: *const c_char) -> PfStatus {
    guard(|| {
        let mesh = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        save_mesh(path_arg(path, "path")?, &mesh.0)?;
        Ok(())
    })
}

/// Number of vertices; 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_vertex_count(mesh: *const PfMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.vertex_count())
}

/// Number of triangles; 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_triangle_count(mesh: *const PfMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.triangle_count())
}

/// Copies vertex positions into `out`, which holds `len` doubles and must
/// have room for `3 * pf_mesh_vertex_count(mesh)`.
///
/// # Safety
/// `mesh` must be a live handle and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_copy_vertices(
    mesh: *const PfMesh,
    out: *mut f64,
    len: usize,
) -> PfStatus {
    guard(|| {
        let mesh = &mesh.as_ref().ok_or_else(|| null("mesh"))?.0;
        if len < 3 * mesh.vertex_count() {
            return Err(invalid(format!(
                "buffer holds {len} doubles, need {}",
                3 * mesh.vertex_count()
            )));
        }
        write_vectors(slice_out(out, len, "out")?, &mesh.vertices);
        Ok(())
    })
}

/// Copies triangle indices into `out`, which holds `len` integers and must
/// have room for `3 * pf_mesh_triangle_count(mesh)`.
///
/// # Safety
/// `mesh` must be a live handle and `out` must point to `len` integers.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_copy_triangles(
    mesh: *const PfMesh,
    out: *mut u32,
    len: usize,
) -> PfStatus {
    guard(|| {
        let mesh = &mesh.as_ref().ok_or_else(|| null("mesh"))?.0;
        if len < 3 * mesh.triangle_count() {
            return Err(invalid(format!(
                "buffer holds {len} indices, need {}",
                3 * mesh.triangle_count()
            )));
        }
        for (o, t) in slice_out(out, len, "out")?
            .chunks_exact_mut(3)
            .zip(&mesh.triangles)
        {
            o.copy_from_slice(t);
        }
        Ok(())
    })
}

/// Releases a mesh. Null is ignored.
///
/// # Safety
/// `mesh` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pf_mesh_free(mesh: *mut PfMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Accuracy, completion, Chamfer-L1, normal consistency and F-score of
/// `pred` against `gt` from `samples` surface points per mesh.
///
/// # Safety
/// `pred` and `gt` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_evaluate(
    pred: *const PfMesh,
    gt: *const PfMesh,
    samples: usize,
    threshold: f64,
    seed: u64,
    out: *mut PfMetrics,
) -> PfStatus {
    guard(|| {
        let pred = &pred.as_ref().ok_or_else(|| null("pred"))?.0;
        let gt = &gt.as_ref().ok_or_else(|| null("gt"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = evaluate(pred, gt, samples, threshold, seed)?.into();
        Ok(())
    })
}

/// Depth-normal consistency filter for one frame. `prior_normals` are in
/// the camera frame; zero vectors mark missing priors. Removed pixels are
/// zero in `out_depth`; `out_mask` is 1 where depth was kept. Either output
/// may be null.
///
/// # Safety
/// `intrinsics` and `pose` (16 doubles) must be readable; `depth` holds
/// `width * height` doubles, `prior_normals` three times that; the outputs,
/// when non-null, hold `width * height` elements.
#[no_mangle]
pub unsafe extern "C" fn pf_dnc_filter(
    intrinsics: *const PfIntrinsics,
    pose: *const f64,
    depth: *const f64,
    prior_normals: *const f64,
    k: usize,
    tau_d_deg: f64,
    out_depth: *mut f64,
    out_mask: *mut u8,
) -> PfStatus {
    guard(|| {
        let i = intrinsics.as_ref().ok_or_else(|| null("intrinsics"))?;
        let intr = CameraIntrinsics::new(i.fx, i.fy, i.cx, i.cy, i.width, i.height)?;
        let n = pixel_count(intr.width, intr.height)?;
        let m = slice_arg(pose, 16, "pose")?;
        let rows = std::array::from_fn(|r| std::array::from_fn(|c| m[4 * r + c]));
        let pose = RigidPose::from_matrix(&rows, POSE_TOLERANCE)?;
        let depth = DepthMap::from_vec(
            intr.width,
            intr.height,
            slice_arg(depth, n, "depth")?.to_vec(),
        )?;
        let n_p = NormalMap::from_vec(
            intr.width,
            intr.height,
            NormalFrame::Camera,
            vectors(slice_arg(prior_normals, 3 * n, "prior_normals")?),
        )?;
        let cfg = DncConfig {
            k,
            tau_d: tau_d_deg,
            ..Default::default()
        };
        let (filtered, _, report) = dnc_filter_frame(&depth, &intr, &pose, &n_p, &cfg)?;
        if !out_depth.is_null() {
            slice_out(out_depth, n, "out_depth")?.copy_from_slice(filtered.values());
        }
        if !out_mask.is_null() {
            write_mask(slice_out(out_mask, n, "out_mask")?, &report.mask);
        }
        Ok(())
    })
}

/// Adaptive normal filter: keeps `prior_normals` where they lie within
/// `tau_n_deg` of `rendered_normals`. Removed pixels are zero vectors in
/// `out_normals`; `out_mask` is 1 where the prior was kept. Either output
/// may be null.
///
/// # Safety
/// Both inputs hold `3 * width * height` doubles; the outputs, when
/// non-null, hold `3 * width * height` doubles and `width * height` bytes.
#[no_mangle]
pub unsafe extern "C" fn pf_anr_filter(
    width: usize,
    height: usize,
    rendered_normals: *const f64,
    prior_normals: *const f64,
    tau_n_deg: f64,
    out_normals: *mut f64,
    out_mask: *mut u8,
) -> PfStatus {
    guard(|| {
        let n = pixel_count(width, height)?;
        let map = |p, what| -> Result<NormalMap, Failure> {
            Ok(NormalMap::from_vec(
                width,
                height,
                NormalFrame::Camera,
                vectors(slice_arg(p, 3 * n, what)?),
            )?)
        };
        let n_hat = map(rendered_normals, "rendered_normals")?;
        let n_p = map(prior_normals, "prior_normals")?;
        let (n_f, report) = anr_filter_normals(&n_hat, &n_p, &AnrConfig { tau_n: tau_n_deg })?;
        if !out_normals.is_null() {
            write_vectors(slice_out(out_normals, 3 * n, "out_normals")?, n_f.values());
        }
        if !out_mask.is_null() {
            write_mask(slice_out(out_mask, n, "out_mask")?, &report.mask);
        }
        Ok(())
    })
}

/// Loads every frame named by a dataset manifest.
///
/// # Safety
/// `manifest_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pf_dataset_load(
    manifest_path: *const c_char,
    out: *mut *mut PfDataset,
) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let frames = load_dataset(path_arg(manifest_path, "manifest_path")?)?;
        *out = Box::into_raw(Box::new(PfDataset(frames)));
        Ok(())
    })
}

/// Number of frames; 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pf_dataset_frame_count(dataset: *const PfDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// Releases a dataset. Null is ignored.
///
/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pf_dataset_free(dataset: *mut PfDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Filters, fuses and meshes `dataset`. `config_json` is a pipeline
/// configuration object in JSON, or null for the defaults; absent keys take
/// their defaults.
///
/// # Safety
/// `dataset` must be a live handle, `config_json` null or a NUL-terminated
/// string, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pf_reconstruct(
    dataset: *const PfDataset,
    config_json: *const c_char,
    out: *mut *mut PfMesh,
) -> PfStatus {
    guard(|| {
        let frames = &dataset.as_ref().ok_or_else(|| null("dataset"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg: PipelineConfig = if config_json.is_null() {
            PipelineConfig::default()
        } else {
            let text = CStr::from_ptr(config_json)
                .to_str()
                .map_err(|_| invalid("config_json is not UTF-8"))?;
            serde_json::from_str(text).map_err(Error::from)?
        };
        let result = run_pipeline(frames, None, &cfg)?;
        *out = Box::into_raw(Box::new(PfMesh(result.fused.mesh)));
        Ok(())
    })
}
