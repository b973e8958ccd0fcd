//! File formats: PLY meshes, PNG maps and the JSON dataset manifest.

mod manifest;
mod ply;
mod png;

use std::io::Write;
use std::path::Path;

pub use manifest::{load_dataset, save_dataset, DatasetManifest, FrameRecord, POSE_TOLERANCE};
pub use ply::{encode_ply, load_mesh, parse_ply, save_mesh};
pub use png::{
    decode_normal_rgb, depth_to_png16, encode_normal_rgb, read_color_png, read_depth_png,
    read_normal_png, write_color_png, write_depth_png, write_normal_png, MIN_DECODED_NORM,
};

use crate::error::{Error, Result};

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes to a temporary file next to `path` and renames it into place, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}
