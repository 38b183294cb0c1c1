//! Regenerates the files under `fixtures/`.
//!
//! Run from the workspace root: `cargo run --release -p shellforge-core --example make_fixtures`.

use std::fs;
use std::path::Path;

use nalgebra::Point3;
use shellforge::assembly::{plan_with_overrides, PlanOverrides};
use shellforge::fixtures::{egg_fixture, mouse_spec, points_text};
use shellforge::mesh::primitives::{cube, icosphere};
use shellforge::mesh::{write_mesh, MeshFormat, Plane, RigidTransform};

/// Contour pitch of the stored egg scan; coarse enough to keep the file small.
const EGG_SCAN_PITCH: f64 = 2.0;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new("fixtures");
    let bad = dir.join("malformed");
    fs::create_dir_all(&bad)?;

    let spec = mouse_spec();
    fs::write(dir.join("mouse.json"), serde_json::to_string_pretty(&spec)? + "\n")?;

    let egg = egg_fixture(EGG_SCAN_PITCH)?;
    fs::write(dir.join("egg.stl"), write_mesh(&egg.scan, MeshFormat::StlBinary))?;
    fs::write(dir.join("egg_fiducials.txt"), points_text(&egg.fiducials))?;

    let sphere = icosphere(Point3::origin(), 20.0, 4).with_name("sphere");
    fs::write(dir.join("sphere.stl"), write_mesh(&sphere, MeshFormat::StlBinary))?;
    let overrides = PlanOverrides {
        split_plane: Some(Plane::through(&Point3::origin(), &nalgebra::Vector3::z())),
        pitch: Some(0.5),
        ..PlanOverrides::default()
    };
    let plan = plan_with_overrides(&sphere, &RigidTransform::identity(), &spec.circuit, &overrides)?;
    fs::write(dir.join("sphere_plan.json"), serde_json::to_string_pretty(&plan)? + "\n")?;

    let cube = cube(30.0).with_name("cube");
    let cube_bin = write_mesh(&cube, MeshFormat::StlBinary);
    fs::write(dir.join("cube.stl"), &cube_bin)?;
    fs::write(dir.join("cube_ascii.stl"), write_mesh(&cube, MeshFormat::StlAscii))?;
    fs::write(dir.join("cube.obj"), write_mesh(&cube, MeshFormat::Obj))?;

    // Byte-level damage for parser error tests.
    fs::write(bad.join("truncated.stl"), &cube_bin[..cube_bin.len() - 20])?;
    let mut inflated = cube_bin.clone();
    inflated[80..84].copy_from_slice(&1000u32.to_le_bytes());
    fs::write(bad.join("count_too_high.stl"), inflated)?;
    let mut trailing = cube_bin.clone();
    trailing.extend_from_slice(&[0u8; 50]);
    fs::write(bad.join("count_too_low.stl"), trailing)?;
    fs::write(bad.join("header_only.stl"), &cube_bin[..60])?;
    let ascii = String::from_utf8(write_mesh(&cube, MeshFormat::StlAscii))?;
    fs::write(bad.join("ascii_bad_number.stl"), ascii.replacen("vertex ", "vertex x", 1))?;
    let cut = ascii.find("endloop").unwrap_or(ascii.len());
    fs::write(bad.join("ascii_unterminated.stl"), &ascii[..cut])?;
    fs::write(bad.join("obj_bad_index.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")?;
    fs::write(bad.join("obj_texture.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1 2 3\n")?;
    Ok(())
}
