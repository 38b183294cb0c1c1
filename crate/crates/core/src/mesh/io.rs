//! STL (binary and ASCII) and minimal OBJ readers and writers.
//!
//! Readers weld vertices whose coordinates are bit-identical, so a closed
//! solid exported as a facet soup comes back with shared edges. No other
//! welding happens here; tolerance-based welding is [`super::repair_basic`].

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{MeshError, MeshResult, TriangleMesh};

const HEADER_LEN: usize = 80;
const FACET_LEN: usize = 50;

/// Header text written into every binary STL (padded with zeros to 80 bytes).
pub const STL_BANNER: &str = "binary STL written by shellforge";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFormat {
    StlBinary,
    StlAscii,
    Obj,
}

impl MeshFormat {
    /// Guess from a file extension; `.stl` is taken to be binary.
    pub fn from_extension(ext: &str) -> Option<MeshFormat> {
        match ext.to_ascii_lowercase().as_str() {
            "stl" => Some(MeshFormat::StlBinary),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

/// Sniffs the format from content. A file whose size matches the binary
/// layout for its declared count is binary even if the header says "solid".
pub fn detect_format(bytes: &[u8]) -> MeshFormat {
    if bytes.len() >= HEADER_LEN + 4 {
        let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as u64;
        if HEADER_LEN as u64 + 4 + FACET_LEN as u64 * count == bytes.len() as u64 {
            return MeshFormat::StlBinary;
        }
    }
    let head = String::from_utf8_lossy(&bytes[..bytes.len().min(512)]);
    let trimmed = head.trim_start();
    if trimmed.starts_with("solid") {
        MeshFormat::StlAscii
    } else if trimmed.starts_with("v ") || trimmed.starts_with('#') || trimmed.starts_with("f ") {
        MeshFormat::Obj
    } else {
        MeshFormat::StlBinary
    }
}

pub fn parse_mesh(bytes: &[u8], format: MeshFormat) -> MeshResult<TriangleMesh> {
    match format {
        MeshFormat::StlBinary => parse_stl_binary(bytes),
        MeshFormat::StlAscii => parse_stl_ascii(bytes),
        MeshFormat::Obj => parse_obj(bytes),
    }
}

pub fn write_mesh(mesh: &TriangleMesh, format: MeshFormat) -> Vec<u8> {
    match format {
        MeshFormat::StlBinary => write_stl_binary(mesh),
        MeshFormat::StlAscii => write_stl_ascii(mesh).into_bytes(),
        MeshFormat::Obj => write_obj(mesh).into_bytes(),
    }
}

/// Accumulates vertices, sharing bit-identical positions.
#[derive(Default)]
struct Welder {
    lookup: HashMap<[u64; 3], u32>,
    vertices: Vec<Point3<f64>>,
}

impl Welder {
    fn index(&mut self, p: Point3<f64>) -> u32 {
        let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
        let vertices = &mut self.vertices;
        *self.lookup.entry(key).or_insert_with(|| {
            vertices.push(p);
            (vertices.len() - 1) as u32
        })
    }
}

fn parse_stl_binary(bytes: &[u8]) -> MeshResult<TriangleMesh> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(MeshError::TruncatedFile {
            expected: HEADER_LEN + 4,
            actual: bytes.len(),
        });
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let expected = (count as u64) * FACET_LEN as u64 + (HEADER_LEN + 4) as u64;
    if expected != bytes.len() as u64 {
        return Err(MeshError::TruncatedFile {
            expected: usize::try_from(expected).unwrap_or(usize::MAX),
            actual: bytes.len(),
        });
    }
    let mut welder = Welder::default();
    let mut triangles = Vec::with_capacity(count);
    for facet in bytes[HEADER_LEN + 4..].chunks_exact(FACET_LEN) {
        let mut tri = [0u32; 3];
        for (k, slot) in tri.iter_mut().enumerate() {
            let base = 12 + 12 * k;
            let f = |o: usize| f32::from_le_bytes(facet[base + o..base + o + 4].try_into().unwrap()) as f64;
            *slot = welder.index(Point3::new(f(0), f(4), f(8)));
        }
        triangles.push(tri);
    }
    Ok(TriangleMesh::new(welder.vertices, triangles))
}

/// Splits text into (byte offset, line) pairs.
fn lines_with_offsets(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split('\n').map(move |line| {
        let start = offset;
        offset += line.len() + 1;
        (start, line.trim_end_matches('\r'))
    })
}

fn parse_f64(tok: &str, offset: usize) -> MeshResult<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| MeshError::MalformedRecord {
            offset,
            message: format!("expected a finite number, found `{tok}`"),
        })
}

fn parse_stl_ascii(bytes: &[u8]) -> MeshResult<TriangleMesh> {
    let text = std::str::from_utf8(bytes).map_err(|e| MeshError::MalformedRecord {
        offset: e.valid_up_to(),
        message: "ASCII STL is not valid UTF-8".into(),
    })?;

    #[derive(PartialEq, Debug)]
    enum State {
        Start,
        Solid,
        Facet,
        Loop(usize),
        EndLoop,
        Done,
    }

    let malformed = |offset: usize, message: String| MeshError::MalformedRecord { offset, message };
    let mut state = State::Start;
    let mut name = None;
    let mut welder = Welder::default();
    let mut triangles = Vec::new();
    let mut corner = [0u32; 3];

    for (offset, line) in lines_with_offsets(text) {
        let mut toks = line.split_whitespace();
        let Some(keyword) = toks.next() else { continue };
        match (&state, keyword) {
            (State::Start, "solid") => {
                let rest = line.trim_start()["solid".len()..].trim();
                if !rest.is_empty() {
                    name = Some(rest.to_string());
                }
                state = State::Solid;
            }
            (State::Solid, "facet") => {
                if toks.next() != Some("normal") {
                    return Err(malformed(offset, "expected `facet normal`".into()));
                }
                for _ in 0..3 {
                    let tok = toks.next().ok_or_else(|| malformed(offset, "facet normal needs 3 components".into()))?;
                    parse_f64(tok, offset)?;
                }
                state = State::Facet;
            }
            (State::Solid, "endsolid") => state = State::Done,
            (State::Facet, "outer") => {
                if toks.next() != Some("loop") {
                    return Err(malformed(offset, "expected `outer loop`".into()));
                }
                state = State::Loop(0);
            }
            (State::Loop(k), "vertex") => {
                let k = *k;
                if k >= 3 {
                    return Err(malformed(offset, "more than 3 vertices in facet".into()));
                }
                let mut xyz = [0.0; 3];
                for v in &mut xyz {
                    let tok = toks.next().ok_or_else(|| malformed(offset, "vertex needs 3 coordinates".into()))?;
                    *v = parse_f64(tok, offset)?;
                }
                corner[k] = welder.index(Point3::new(xyz[0], xyz[1], xyz[2]));
                state = State::Loop(k + 1);
            }
            (State::Loop(3), "endloop") => state = State::EndLoop,
            (State::EndLoop, "endfacet") => {
                triangles.push(corner);
                state = State::Solid;
            }
            (State::Done, _) => {
                return Err(malformed(offset, format!("unexpected `{keyword}` after endsolid")));
            }
            (s, kw) => {
                return Err(malformed(offset, format!("unexpected `{kw}` (parser state {s:?})")));
            }
        }
    }
    if state != State::Done {
        return Err(malformed(text.len(), "missing `endsolid`".into()));
    }
    Ok(TriangleMesh {
        vertices: welder.vertices,
        triangles,
        name,
    })
}

fn parse_obj(bytes: &[u8]) -> MeshResult<TriangleMesh> {
    let text = std::str::from_utf8(bytes).map_err(|e| MeshError::MalformedRecord {
        offset: e.valid_up_to(),
        message: "OBJ is not valid UTF-8".into(),
    })?;
    let mut vertices = Vec::new();
    let mut faces: Vec<([u32; 3], usize)> = Vec::new();
    for (lineno, (offset, line)) in lines_with_offsets(text).enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let keyword = toks.next().unwrap();
        let args: Vec<&str> = toks.collect();
        match keyword {
            "v" => {
                if args.len() != 3 {
                    return Err(MeshError::UnsupportedFeature {
                        line: lineno + 1,
                        feature: format!("vertex with {} components", args.len()),
                    });
                }
                let x = parse_f64(args[0], offset)?;
                let y = parse_f64(args[1], offset)?;
                let z = parse_f64(args[2], offset)?;
                vertices.push(Point3::new(x, y, z));
            }
            "f" => {
                if args.len() != 3 {
                    return Err(MeshError::UnsupportedFeature {
                        line: lineno + 1,
                        feature: format!("face with {} corners", args.len()),
                    });
                }
                let mut tri = [0u32; 3];
                for (slot, tok) in tri.iter_mut().zip(&args) {
                    if tok.contains('/') {
                        return Err(MeshError::UnsupportedFeature {
                            line: lineno + 1,
                            feature: "texture/normal face indices".into(),
                        });
                    }
                    if tok.starts_with('-') {
                        return Err(MeshError::UnsupportedFeature {
                            line: lineno + 1,
                            feature: "relative face indices".into(),
                        });
                    }
                    let idx: u32 = tok.parse().map_err(|_| MeshError::MalformedRecord {
                        offset,
                        message: format!("bad face index `{tok}`"),
                    })?;
                    if idx == 0 {
                        return Err(MeshError::MalformedRecord {
                            offset,
                            message: "face indices are 1-based".into(),
                        });
                    }
                    *slot = idx - 1;
                }
                faces.push((tri, offset));
            }
            other => {
                return Err(MeshError::UnsupportedFeature {
                    line: lineno + 1,
                    feature: format!("`{other}` record"),
                })
            }
        }
    }
    let n = vertices.len() as u32;
    let mut triangles = Vec::with_capacity(faces.len());
    for (tri, offset) in faces {
        if let Some(bad) = tri.iter().find(|&&i| i >= n) {
            return Err(MeshError::MalformedRecord {
                offset,
                message: format!("face index {} exceeds vertex count {n}", bad + 1),
            });
        }
        triangles.push(tri);
    }
    Ok(TriangleMesh::new(vertices, triangles))
}

fn facet_normal(p: [Point3<f32>; 3]) -> Vector3<f32> {
    let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
    let len = n.norm();
    if len > 0.0 && len.is_finite() {
        n / len
    } else {
        Vector3::zeros()
    }
}

fn write_stl_binary(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 + FACET_LEN * mesh.triangles.len());
    let mut header = [0u8; HEADER_LEN];
    header[..STL_BANNER.len()].copy_from_slice(STL_BANNER.as_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for t in 0..mesh.triangles.len() {
        let p = mesh.corners(t).map(|v| v.cast::<f32>());
        let n = facet_normal(p);
        for c in n.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for v in &p {
            for c in v.iter() {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

/// C-style `%.5e`: six significant digits with a signed two-digit exponent.
fn sci6(v: f64) -> String {
    let s = format!("{v:.5e}");
    let (mantissa, exp) = s.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn write_stl_ascii(mesh: &TriangleMesh) -> String {
    let name = mesh.name.as_deref().unwrap_or("shellforge");
    let mut s = String::new();
    writeln!(s, "solid {name}").unwrap();
    for t in 0..mesh.triangles.len() {
        let p = mesh.corners(t);
        let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
        let n = if n.norm() > 0.0 { n.normalize() } else { n };
        writeln!(s, "  facet normal {} {} {}", sci6(n.x), sci6(n.y), sci6(n.z)).unwrap();
        s.push_str("    outer loop\n");
        for v in &p {
            writeln!(s, "      vertex {} {} {}", sci6(v.x), sci6(v.y), sci6(v.z)).unwrap();
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    writeln!(s, "endsolid {name}").unwrap();
    s
}

fn write_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        writeln!(s, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for t in &mesh.triangles {
        writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    fn one_triangle() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
    }

    #[test]
    fn binary_single_triangle() {
        let bytes = write_mesh(&one_triangle(), MeshFormat::StlBinary);
        assert_eq!(bytes.len(), 134);
        assert!(!bytes.starts_with(b"solid"));
        let m = parse_mesh(&bytes, MeshFormat::StlBinary).unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn binary_count_mismatch_is_truncated() {
        let cube = primitives::cube(1.0);
        let mut bytes = write_mesh(&cube, MeshFormat::StlBinary);
        bytes[80..84].copy_from_slice(&10u32.to_le_bytes());
        bytes.truncate(84 + 9 * 50);
        assert_eq!(
            parse_mesh(&bytes, MeshFormat::StlBinary),
            Err(MeshError::TruncatedFile {
                expected: 584,
                actual: 534
            })
        );
        assert!(matches!(
            parse_mesh(&bytes[..40], MeshFormat::StlBinary),
            Err(MeshError::TruncatedFile { .. })
        ));
    }

    #[test]
    fn ascii_number_format() {
        assert_eq!(sci6(10.0), "1.00000e+01");
        assert_eq!(sci6(-0.5), "-5.00000e-01");
        assert_eq!(sci6(0.0), "0.00000e+00");
        assert_eq!(sci6(123456.7), "1.23457e+05");
    }

    #[test]
    fn ascii_tetrahedron_round_trip() {
        let tet = primitives::tetrahedron();
        let text = String::from_utf8(write_mesh(&tet, MeshFormat::StlAscii)).unwrap();
        assert_eq!(text.matches("facet normal").count(), 4);
        assert_eq!(text.matches("endfacet").count(), 4);
        let back = parse_mesh(text.as_bytes(), MeshFormat::StlAscii).unwrap();
        // vertices are renumbered in order of first use; corners must agree
        assert_eq!(back.triangles.len(), 4);
        for t in 0..4 {
            assert_eq!(back.corners(t), tet.corners(t));
        }
        assert!(crate::mesh::validate(&back).unwrap().watertight);
    }

    #[test]
    fn ascii_errors_carry_offsets() {
        let text = "solid x\n  facet normal 0 0 1\n    outer loop\n      vertex 0 0 zz\n";
        match parse_mesh(text.as_bytes(), MeshFormat::StlAscii) {
            Err(MeshError::MalformedRecord { offset, .. }) => assert_eq!(offset, 44),
            other => panic!("unexpected {other:?}"),
        }
        let text = "solid x\n";
        assert!(matches!(
            parse_mesh(text.as_bytes(), MeshFormat::StlAscii),
            Err(MeshError::MalformedRecord { .. })
        ));
    }

    #[test]
    fn obj_minimal_and_unsupported() {
        let obj = "# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        let m = parse_mesh(obj.as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
        let back = parse_mesh(&write_mesh(&m, MeshFormat::Obj), MeshFormat::Obj).unwrap();
        assert_eq!(back, m);

        for (src, line) in [
            ("v 0 0 0\nvn 0 0 1\n", 2),
            ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2/2 3/3\n", 4),
            ("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n", 5),
            ("o thing\n", 1),
        ] {
            match parse_mesh(src.as_bytes(), MeshFormat::Obj) {
                Err(MeshError::UnsupportedFeature { line: l, .. }) => assert_eq!(l, line),
                other => panic!("unexpected {other:?} for {src:?}"),
            }
        }
        assert!(matches!(
            parse_mesh(b"v 0 0 0\nf 1 2 3\n", MeshFormat::Obj),
            Err(MeshError::MalformedRecord { .. })
        ));
    }

    #[test]
    fn detects_formats() {
        let cube = primitives::cube(2.0);
        assert_eq!(detect_format(&write_mesh(&cube, MeshFormat::StlBinary)), MeshFormat::StlBinary);
        assert_eq!(detect_format(&write_mesh(&cube, MeshFormat::StlAscii)), MeshFormat::StlAscii);
        assert_eq!(detect_format(&write_mesh(&cube, MeshFormat::Obj)), MeshFormat::Obj);
    }
}
