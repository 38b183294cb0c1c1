//! Synthetic scans with known ground truth, for tests and demos.
//!
//! The egg is a tapered rounded solid around a mouse-sized blank, cut flat
//! by the window plane so the window and its bumps sit flush on the
//! surface, then moved by a fixed rigid motion as if it came off a scanner.

use nalgebra::{Point3, Vector3};

use crate::blank::BlankShape;
use crate::blank::{BlankResult, BlankSpec, CircuitSpec, WindowShape, WindowSpec};
use crate::mesh::{Aabb, RigidTransform, TriangleMesh};
use crate::voxel::{extract_surface, sdf, ScalarField, DEFAULT_VOXEL_CAP};

/// Sculpted material beyond the blank on every side.
pub const EGG_MARGIN: f64 = 6.0;
/// The egg rises this far above the board top before the window cut.
const EGG_HEADROOM: f64 = 16.0;
const EGG_ROUNDING: f64 = 8.0;
const EGG_TAPER: f64 = 0.12;

/// Optical-mouse style board: 38 x 51 x 4 mm with a 14 mm window 8 mm
/// above it, offset towards one end and tilted 10 degrees.
pub fn mouse_spec() -> BlankSpec {
    let mut circuit = CircuitSpec::board(38.0, 51.0, 4.0);
    circuit.window = Some(WindowSpec {
        shape: WindowShape::Circle,
        diameter: 14.0,
        center_offset: [0.0, 15.0],
        standoff: 8.0,
    });
    circuit.tilt_deg = 10.0;
    let mut spec = BlankSpec::new(circuit);
    spec.shell_thickness = Some(3.0);
    spec
}

/// Scanner placement of the window frame used by [`egg_fixture`].
pub fn egg_pose() -> RigidTransform {
    RigidTransform::from_translation(Vector3::new(12.0, -7.5, 30.0))
        .compose(&RigidTransform::from_axis_angle(&Vector3::new(1.0, 2.0, 3.0).normalize(), 0.6))
}

#[derive(Debug, Clone)]
pub struct EggFixture {
    pub spec: BlankSpec,
    pub scan: TriangleMesh,
    /// True window frame in scan coordinates.
    pub window_pose: RigidTransform,
    /// True bump apexes in scan coordinates, in layout order.
    pub fiducials: [Point3<f64>; 3],
}

/// Egg around [`mouse_spec`]'s blank, contoured at `pitch`.
pub fn egg_fixture(pitch: f64) -> BlankResult<EggFixture> {
    let spec = mouse_spec();
    spec.validate()?;
    let blank = BlankShape::new(&spec);
    let c = &spec.circuit;
    let to_board = c.board_to_window().inverse();
    let [l, w, h] = c.board_size;
    let lo = Vector3::new(-l / 2.0, -w / 2.0, 0.0) - Vector3::repeat(spec.expansion + EGG_MARGIN);
    let hi = Vector3::new(l / 2.0, w / 2.0, h + EGG_HEADROOM) + Vector3::new(spec.expansion + EGG_MARGIN, spec.expansion + EGG_MARGIN, 0.0);
    let centre = Point3::from((lo + hi) / 2.0);
    let half = (hi - lo) / 2.0;
    // window frame distance
    let egg = move |p: &Point3<f64>| {
        let q = to_board.apply_point(p) - centre;
        // narrower towards +y
        let s = 1.0 - EGG_TAPER * (q.y / half.y).clamp(-1.0, 1.0);
        let body = sdf::rounded_box(&Point3::new(q.x / s, q.y, q.z), &half, EGG_ROUNDING);
        body.max(p.z).min(blank.distance(p))
    };
    let mut local = Aabb::new(Point3::from(lo), Point3::from(hi)).transformed(&c.board_to_window());
    local.max.z = local.max.z.min(2.0);
    let pose = egg_pose();
    let inv = pose.inverse();
    let bounds = local.transformed(&pose);
    let field = ScalarField::from_fn(&bounds, pitch, 2, DEFAULT_VOXEL_CAP, |p| egg(&inv.apply_point(p)))?;
    let scan = extract_surface(&field).with_name("egg");
    let refs = spec.fiducial_reference_points();
    let fiducials = [0, 1, 2].map(|i| pose.apply_point(&refs[i]));
    Ok(EggFixture {
        spec,
        scan,
        window_pose: pose,
        fiducials,
    })
}

/// Fiducial points file text (one `x y z` line per point).
pub fn points_text(points: &[Point3<f64>]) -> String {
    points.iter().map(|p| format!("{:.6} {:.6} {:.6}\n", p.x, p.y, p.z)).collect()
}
