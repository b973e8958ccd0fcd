//! Binary little-endian PLY for triangle meshes.
//!
//! Writes float32 positions (plus normals when present) and `uchar int`
//! face lists. Reads any scalar property types, skips unknown properties and
//! elements, and fan-triangulates polygons.

use std::path::Path;

use super::{read_file, write_atomic};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::TriangleMesh;

pub fn encode_ply(mesh: &TriangleMesh) -> Vec<u8> {
    let normals = mesh
        .normals
        .as_deref()
        .filter(|n| n.len() == mesh.vertices.len());
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        mesh.vertices.len()
    );
    if normals.is_some() {
        header.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    header.push_str(&format!(
        "element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.triangles.len()
    ));
    let stride = if normals.is_some() { 24 } else { 12 };
    let mut out =
        Vec::with_capacity(header.len() + mesh.vertices.len() * stride + mesh.triangles.len() * 13);
    out.extend_from_slice(header.as_bytes());
    for (i, v) in mesh.vertices.iter().enumerate() {
        for c in v.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        if let Some(n) = normals {
            for c in n[i].iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
    }
    for t in &mesh.triangles {
        out.push(3);
        for i in t {
            out.extend_from_slice(&(*i as i32).to_le_bytes());
        }
    }
    out
}

/// Writes through a temporary file in the target directory, then renames.
pub fn save_mesh(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    write_atomic(path.as_ref(), &encode_ply(mesh))
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    parse_ply(&read_file(path.as_ref())?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    /// Caller guarantees `b.len() >= self.size()`.
    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset: offset as u64,
        message: message.into(),
    }
}

fn parse_header(bytes: &[u8]) -> Result<(Vec<Element>, usize)> {
    let mut pos = 0;
    let mut elements: Vec<Element> = Vec::new();
    let mut first = true;
    loop {
        let start = pos;
        let Some(len) = bytes[pos..].iter().position(|&b| b == b'\n') else {
            return Err(parse_err(start, "header is not terminated by end_header"));
        };
        pos += len + 1;
        let line = std::str::from_utf8(&bytes[start..start + len])
            .map_err(|_| parse_err(start, "header line is not valid UTF-8"))?
            .trim_end_matches('\r');
        let words: Vec<&str> = line.split_whitespace().collect();
        if first {
            if words != ["ply"] {
                return Err(parse_err(start, "missing ply magic"));
            }
            first = false;
            continue;
        }
        match words.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", other, _] => {
                return Err(parse_err(start, format!("unsupported format {other}")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| parse_err(start, format!("bad element count {count:?}")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", ct, it, name] => {
                let (Some(ct), Some(it)) = (Scalar::parse(ct), Scalar::parse(it)) else {
                    return Err(parse_err(start, format!("unknown list types in {line:?}")));
                };
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(start, "property before any element"))?;
                el.props.push(Property::List(name.to_string(), ct, it));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| parse_err(start, format!("unknown property type {ty}")))?;
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(start, "property before any element"))?;
                el.props.push(Property::Scalar(name.to_string(), ty));
            }
            ["end_header"] => return Ok((elements, pos)),
            _ => {
                return Err(parse_err(
                    start,
                    format!("unrecognized header line {line:?}"),
                ))
            }
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn read(&mut self, ty: Scalar) -> Result<f64> {
        let n = ty.size();
        if self.pos + n > self.bytes.len() {
            return Err(parse_err(self.pos, "unexpected end of file"));
        }
        let v = ty.read(&self.bytes[self.pos..]);
        self.pos += n;
        Ok(v)
    }
}

pub fn parse_ply(bytes: &[u8]) -> Result<TriangleMesh> {
    let (elements, body) = parse_header(bytes)?;
    let mut cur = Cursor { bytes, pos: body };
    let mut mesh = TriangleMesh::default();
    let mut normals: Vec<Vec3> = Vec::new();
    let mut has_normals = false;
    for el in &elements {
        let slot = |name: &str| -> Option<usize> {
            ["x", "y", "z", "nx", "ny", "nz"]
                .iter()
                .position(|n| *n == name)
        };
        let is_vertex = el.name == "vertex";
        let is_face = el.name == "face";
        if is_vertex {
            let names: Vec<&str> = el
                .props
                .iter()
                .filter_map(|p| match p {
                    Property::Scalar(n, _) => Some(n.as_str()),
                    _ => None,
                })
                .collect();
            for need in ["x", "y", "z"] {
                if !names.contains(&need) {
                    return Err(parse_err(
                        body,
                        format!("vertex element lacks property {need}"),
                    ));
                }
            }
            has_normals = ["nx", "ny", "nz"].iter().all(|n| names.contains(n));
            mesh.vertices.reserve(el.count);
        }
        for _ in 0..el.count {
            let mut vals = [0.0f64; 6];
            for p in &el.props {
                match p {
                    Property::Scalar(name, ty) => {
                        let v = cur.read(*ty)?;
                        if is_vertex {
                            if let Some(s) = slot(name) {
                                vals[s] = v;
                            }
                        }
                    }
                    Property::List(name, ct, it) => {
                        let at = cur.pos;
                        let n = cur.read(*ct)?;
                        if !(n >= 0.0) {
                            return Err(parse_err(at, "negative list length"));
                        }
                        let n = n as usize;
                        let mut idx = Vec::with_capacity(n);
                        for _ in 0..n {
                            idx.push(cur.read(*it)?);
                        }
                        if is_face && (name == "vertex_indices" || name == "vertex_index") {
                            if n < 3 {
                                return Err(parse_err(at, format!("face with {n} vertices")));
                            }
                            let ids: Vec<u32> = idx
                                .iter()
                                .map(|&i| {
                                    if i >= 0.0 && i <= u32::MAX as f64 {
                                        Ok(i as u32)
                                    } else {
                                        Err(parse_err(at, format!("bad vertex index {i}")))
                                    }
                                })
                                .collect::<Result<_>>()?;
                            for k in 1..n - 1 {
                                mesh.triangles.push([ids[0], ids[k], ids[k + 1]]);
                            }
                        }
                    }
                }
            }
            if is_vertex {
                mesh.vertices.push(Vec3::new(vals[0], vals[1], vals[2]));
                if has_normals {
                    normals.push(Vec3::new(vals[3], vals[4], vals[5]));
                }
            }
        }
    }
    if has_normals {
        mesh.normals = Some(normals);
    }
    let n = mesh.vertices.len();
    if let Some(t) = mesh
        .triangles
        .iter()
        .find(|t| t.iter().any(|&v| v as usize >= n))
    {
        return Err(parse_err(
            cur.pos,
            format!("face index out of range: {t:?}"),
        ));
    }
    let dropped = mesh.drop_degenerate();
    if dropped > 0 {
        log::warn!("dropped {dropped} zero-area faces");
    }
    mesh.validate()
        .map_err(|e| parse_err(cur.pos, e.to_string()))?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.5),
            ],
            vec![[0, 1, 2]],
        )
    }

    #[test]
    fn single_triangle_round_trip() {
        let m = tri();
        let back = parse_ply(&encode_ply(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn normals_round_trip() {
        let mut m = tri();
        m.compute_vertex_normals();
        let back = parse_ply(&encode_ply(&m)).unwrap();
        assert_eq!(back.triangles, m.triangles);
        let (a, b) = (back.normals.unwrap(), m.normals.unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-7);
        }
    }

    #[test]
    fn float32_precision() {
        let m = TriangleMesh::new(
            vec![
                Vec3::new(0.1, 1e5 + 0.3, -7.77),
                Vec3::new(1.0 / 3.0, 0.0, 2.0),
                Vec3::new(0.0, 1.0, 1e-8),
            ],
            vec![[2, 0, 1]],
        );
        let back = parse_ply(&encode_ply(&m)).unwrap();
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            for k in 0..3 {
                assert_eq!(a[k], b[k] as f32 as f64);
            }
        }
        assert_eq!(back.triangles, m.triangles);
    }

    #[test]
    fn empty_mesh_is_valid_ply() {
        let bytes = encode_ply(&TriangleMesh::default());
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("element vertex 0\n") && text.contains("element face 0\n"));
        assert!(parse_ply(&bytes).unwrap().is_empty());
    }

    #[test]
    fn truncated_file_rejected() {
        let bytes = encode_ply(&tri());
        for cut in [bytes.len() - 1, bytes.len() - 13, 20] {
            match parse_ply(&bytes[..cut]) {
                Err(Error::Parse { offset, .. }) => assert!(offset as usize <= cut),
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn malformed_header_reports_offset() {
        let bad = b"ply\nformat binary_little_endian 1.0\nelement vertex x\nend_header\n";
        match parse_ply(bad) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 36),
            other => panic!("expected parse error, got {other:?}"),
        }
        let ascii = b"ply\nformat ascii 1.0\nend_header\n";
        assert!(matches!(
            parse_ply(ascii),
            Err(Error::Parse { offset: 4, .. })
        ));
        assert!(matches!(
            parse_ply(b"PLY\n"),
            Err(Error::Parse { offset: 0, .. })
        ));
    }

    #[test]
    fn out_of_range_index_rejected() {
        let mut m = tri();
        m.triangles[0][2] = 9;
        assert!(matches!(
            parse_ply(&encode_ply(&m)),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn foreign_layout_with_quads_and_extras() {
        let mut b = b"ply\nformat binary_little_endian 1.0\ncomment other tool\nelement vertex 4\nproperty double x\nproperty double y\nproperty double z\nproperty uchar red\nelement face 1\nproperty list uchar uint vertex_indices\nelement extra 1\nproperty short q\nend_header\n".to_vec();
        for (x, y) in [(0.0f64, 0.0f64), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)] {
            for c in [x, y, 0.0] {
                b.extend_from_slice(&c.to_le_bytes());
            }
            b.push(255);
        }
        b.push(4);
        for i in 0u32..4 {
            b.extend_from_slice(&i.to_le_bytes());
        }
        b.extend_from_slice(&7i16.to_le_bytes());
        let m = parse_ply(&b).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert_eq!(m.vertices[2], Vec3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn zero_area_faces_dropped() {
        let m = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::x() * 2.0],
            vec![[0, 1, 2], [0, 1, 3], [1, 1, 2]],
        );
        let back = parse_ply(&encode_ply(&m)).unwrap();
        assert_eq!(back.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ply");
        save_mesh(&p, &tri()).unwrap();
        assert_eq!(load_mesh(&p).unwrap(), tri());
        assert!(matches!(
            load_mesh(dir.path().join("missing.ply")),
            Err(Error::Io { .. })
        ));
    }
}
