use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use shellforge::mesh::primitives::{box_mesh, cube, icosphere};
use shellforge::mesh::{
    detect_format, metrics, parse_mesh, repair_basic, signed_volume, transform, validate, write_mesh, MeshError,
    MeshFormat, RigidTransform, TriangleMesh,
};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn pose(axis: [f64; 3], angle: f64, t: [f64; 3]) -> RigidTransform {
    let a = Vector3::from(axis);
    let a = if a.norm() < 1e-6 { Vector3::z() } else { a.normalize() };
    RigidTransform::from_translation(Vector3::from(t)).compose(&RigidTransform::from_axis_angle(&a, angle))
}

fn axis() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0f64..1.0)
}

fn offset() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-200.0f64..200.0)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn binary(m: &TriangleMesh) -> Vec<u8> {
    write_mesh(m, MeshFormat::StlBinary)
}

proptest! {
    #[test]
    fn binary_stl_round_trip_is_exact(ax in axis(), angle in -3.2f64..3.2, t in offset(), sub in 0u32..3) {
        let m = transform(&icosphere(Point3::origin(), 7.5, sub), &pose(ax, angle, t)).unwrap();
        let once = parse_mesh(&binary(&m), MeshFormat::StlBinary).unwrap();
        let bytes = binary(&once);
        let twice = parse_mesh(&bytes, MeshFormat::StlBinary).unwrap();
        prop_assert_eq!(&twice, &once);
        prop_assert_eq!(binary(&twice), bytes);
        prop_assert_eq!(once.triangles.len(), m.triangles.len());
        for t in 0..m.triangles.len() {
            for (p, q) in m.corners(t).iter().zip(once.corners(t).iter()) {
                for k in 0..3 {
                    prop_assert_eq!(q[k], p[k] as f32 as f64);
                }
            }
        }
    }

    #[test]
    fn volume_survives_rigid_motion(ax in axis(), angle in -3.2f64..3.2, t in offset()) {
        let m = icosphere(Point3::new(3.0, -2.0, 1.0), 12.0, 2);
        let moved = transform(&m, &pose(ax, angle, t)).unwrap();
        let (a, b) = (metrics(&m), metrics(&moved));
        prop_assert!(rel(a.signed_volume, b.signed_volume) < 1e-9);
        prop_assert!(rel(a.surface_area, b.surface_area) < 1e-9);
        prop_assert!(rel(signed_volume(&moved.flipped()), -b.signed_volume) < 1e-12);
    }

    #[test]
    fn repair_is_idempotent(
        jitter in prop::collection::vec(prop::array::uniform3(-4e-5f64..4e-5), 8),
        flip in prop::collection::vec(any::<bool>(), 12),
        dup in any::<bool>(),
    ) {
        // split every corner into its own vertex, nudge it within the weld
        // distance, and flip some faces
        let c = box_mesh(Point3::new(0.0, 0.0, 0.0), Point3::new(3.0, 2.0, 1.0));
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (t, tri) in c.triangles.iter().enumerate() {
            let base = vertices.len() as u32;
            for &v in tri {
                vertices.push(c.vertices[v as usize] + Vector3::from(jitter[v as usize % jitter.len()]));
            }
            triangles.push(if flip[t % flip.len()] { [base, base + 2, base + 1] } else { [base, base + 1, base + 2] });
        }
        if dup {
            triangles.push(triangles[0]);
        }
        let m = TriangleMesh::new(vertices, triangles);
        let once = repair_basic(&m, 1e-4);
        prop_assert_eq!(repair_basic(&once, 1e-4), once.clone());
        let d = validate(&once).unwrap();
        prop_assert!(d.watertight && d.manifold, "{:?}", d);
        prop_assert!((signed_volume(&once) - 6.0).abs() < 1e-3);
    }
}

#[test]
fn cube_measures() {
    let m = metrics(&cube(10.0));
    assert!((m.signed_volume - 1000.0).abs() < 1e-9);
    assert!((m.surface_area - 600.0).abs() < 1e-9);
    assert!((signed_volume(&cube(10.0).flipped()) + 1000.0).abs() < 1e-9);
}

#[test]
fn icosphere_volume_is_close_to_analytic() {
    let v = signed_volume(&icosphere(Point3::origin(), 20.0, 4));
    let exact = 4.0 / 3.0 * std::f64::consts::PI * 20f64.powi(3);
    assert!(v < exact && rel(v, exact) < 0.01, "{v} vs {exact}");
}

#[test]
fn simple_motions() {
    let c = cube(1.0);
    assert_eq!(transform(&c, &RigidTransform::identity()).unwrap().vertices, c.vertices);
    let moved = transform(&c, &RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0))).unwrap();
    let (a, b) = (c.bbox().unwrap(), moved.bbox().unwrap());
    assert!((b.min - a.min - Vector3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
    let long = box_mesh(Point3::origin(), Point3::new(4.0, 1.0, 1.0));
    let turned = transform(&long, &RigidTransform::from_axis_angle(&Vector3::z(), std::f64::consts::FRAC_PI_2)).unwrap();
    let e = turned.bbox().unwrap().extent();
    assert!((e - Vector3::new(1.0, 4.0, 1.0)).norm() < 1e-12);
    assert!(rel(signed_volume(&turned), 4.0) < 1e-12);
}

#[test]
fn binary_fixtures_round_trip_bit_exact() {
    let mut seen = 0;
    for entry in std::fs::read_dir(fixtures()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "stl") {
            continue;
        }
        let bytes = std::fs::read(&path).unwrap();
        if detect_format(&bytes) != MeshFormat::StlBinary {
            continue;
        }
        let m = parse_mesh(&bytes, MeshFormat::StlBinary).unwrap();
        assert_eq!(binary(&m), bytes, "{}", path.display());
        let d = validate(&m).unwrap();
        assert!(d.watertight && d.manifold, "{}: {d:?}", path.display());
        seen += 1;
    }
    assert!(seen >= 3);
}

#[test]
fn text_fixtures_match_binary() {
    let bin = parse_mesh(&std::fs::read(fixtures().join("cube.stl")).unwrap(), MeshFormat::StlBinary).unwrap();
    for (name, format) in [("cube_ascii.stl", MeshFormat::StlAscii), ("cube.obj", MeshFormat::Obj)] {
        let bytes = std::fs::read(fixtures().join(name)).unwrap();
        assert_eq!(detect_format(&bytes), format, "{name}");
        let m = parse_mesh(&bytes, format).unwrap();
        assert_eq!(m.triangles.len(), bin.triangles.len(), "{name}");
        for t in 0..m.triangles.len() {
            assert_eq!(m.corners(t), bin.corners(t), "{name}");
        }
    }
}

fn parse_file(name: &str) -> Result<TriangleMesh, MeshError> {
    let bytes = std::fs::read(fixtures().join("malformed").join(name)).unwrap();
    let format = if name.ends_with(".obj") { MeshFormat::Obj } else { detect_format(&bytes) };
    parse_mesh(&bytes, format)
}

#[test]
fn malformed_files_map_to_errors() {
    let cube_len = 84 + 12 * 50;
    assert_eq!(
        parse_file("truncated.stl"),
        Err(MeshError::TruncatedFile {
            expected: cube_len,
            actual: cube_len - 20
        })
    );
    assert_eq!(
        parse_file("count_too_high.stl"),
        Err(MeshError::TruncatedFile {
            expected: 84 + 1000 * 50,
            actual: cube_len
        })
    );
    assert_eq!(
        parse_file("count_too_low.stl"),
        Err(MeshError::TruncatedFile {
            expected: cube_len,
            actual: cube_len + 50
        })
    );
    assert!(matches!(parse_file("header_only.stl"), Err(MeshError::TruncatedFile { .. })));
    assert!(matches!(parse_file("ascii_bad_number.stl"), Err(MeshError::MalformedRecord { .. })));
    assert!(matches!(parse_file("ascii_unterminated.stl"), Err(MeshError::MalformedRecord { .. })));
    let e = parse_file("obj_bad_index.obj");
    assert!(matches!(e, Err(MeshError::MalformedRecord { offset: 24, .. })), "{e:?}");
    assert!(matches!(parse_file("obj_texture.obj"), Err(MeshError::UnsupportedFeature { line: 4, .. })));
}

proptest! {
    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        for f in [MeshFormat::StlBinary, MeshFormat::StlAscii, MeshFormat::Obj] {
            let _ = parse_mesh(&bytes, f);
        }
    }

    #[test]
    fn cut_binary_files_are_truncated(cut in 1usize..684) {
        let bytes = binary(&cube(2.0));
        prop_assert!(
            matches!(parse_mesh(&bytes[..684 - cut], MeshFormat::StlBinary), Err(MeshError::TruncatedFile { .. })),
            "cut {}", cut
        );
    }
}
