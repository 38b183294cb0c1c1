//! Friction-fit obround bosses on one part and matching cavities in the other.

use nalgebra::{Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::split::{plane_section, Section};
use super::{AssemblyError, AssemblyPlan, AssemblyResult, Fastener, ThinFeature, CAVITY_RELIEF};
use crate::geom2d::P2;
use crate::mesh::{metrics, validate, Plane, RigidTransform, TriangleMesh};
use crate::voxel::{csg_apply, csg_apply_local, extract_surface, sdf, voxelize, CsgOp, ScalarField, DEFAULT_VOXEL_CAP};

/// Depth a boss is sunk into its own part below the cut plane.
pub const BOSS_EMBED: f64 = 1.0;
const OUTLINE_SAMPLES: usize = 48;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartReport {
    pub volume_a: f64,
    pub volume_b: f64,
    pub watertight_a: bool,
    pub watertight_b: bool,
    pub boss_count: usize,
    /// Cavity depth below the cut plane, per fastener.
    pub cavity_depths: Vec<f64>,
    /// Volume shared by the assembled parts (mm³).
    pub interference_volume: f64,
    /// Allowed interference: three voxels times the total boss side area.
    pub interference_bound: f64,
    pub min_wall_thickness: Option<f64>,
    pub thin_features: Vec<ThinFeature>,
}

#[derive(Debug, Clone)]
pub struct PartSet {
    /// Piece carrying the bracket and the bosses.
    pub part_a: TriangleMesh,
    /// Piece carrying the cavities.
    pub part_b: TriangleMesh,
    pub report: PartReport,
}

/// Outline of a fastener's boss in its local frame (x along the rim),
/// grown by `inflate`; counter-clockwise.
pub fn fastener_boss_profile(f: &Fastener, inflate: f64) -> Vec<P2> {
    let [l, w] = f.profile;
    let r = w / 2.0 + inflate;
    let h = ((l - w) / 2.0).max(0.0);
    let half = OUTLINE_SAMPLES / 2;
    let mut out = Vec::with_capacity(OUTLINE_SAMPLES + 2);
    for (cx, a0) in [(h, -std::f64::consts::FRAC_PI_2), (-h, std::f64::consts::FRAC_PI_2)] {
        for k in 0..=half {
            let a = a0 + std::f64::consts::PI * k as f64 / half as f64;
            out.push(P2::new(cx + r * a.cos(), r * a.sin()));
        }
    }
    out
}

/// Side area of a boss (perimeter times height).
pub fn boss_side_area(f: &Fastener) -> f64 {
    let [l, w] = f.profile;
    (2.0 * (l - w) + std::f64::consts::PI * w) * f.height
}

/// Interference allowance for a plan.
pub fn interference_bound(plan: &AssemblyPlan) -> f64 {
    3.0 * plan.pitch * plan.fasteners.iter().map(boss_side_area).sum::<f64>()
}

/// Boss frame: origin on the cut plane, x along the nearest rim edge, z
/// pointing from part A into part B.
pub(crate) fn boss_frame(f: &Fastener, section: &Section, towards_b: &Vector3<f64>) -> RigidTransform {
    let plane = &section.plane;
    let c = P2::new(f.position[0], f.position[1]);
    let dir = section.nearest_edge(&c).map_or(Vector2::x(), |(_, d)| d);
    let (u, v) = plane.basis();
    let x = (u * dir.x + v * dir.y).normalize();
    let z = towards_b.normalize();
    let y = z.cross(&x);
    let origin = plane.from_2d(&c);
    // re-project onto the exact cut plane
    let origin = origin - plane.normal * plane.signed_distance(&origin);
    RigidTransform::from_frame(x, y, z, origin)
}

pub(crate) fn check_on_wall(plan: &AssemblyPlan, section: &Section, towards_b: &Vector3<f64>) -> AssemblyResult<()> {
    for (index, f) in plan.fasteners.iter().enumerate() {
        let frame = boss_frame(f, section, towards_b);
        let plane = &section.plane;
        let inside = fastener_boss_profile(f, f.clearance).iter().all(|q| {
            let p = frame.apply_point(&Point3::new(q.x, q.y, 0.0));
            section.contains(&plane.to_2d(&p))
        });
        if !inside {
            return Err(AssemblyError::BossOffWall { index, position: f.position });
        }
    }
    Ok(())
}

/// Boss and cavity tool fields for one fastener.
pub(crate) fn fastener_tools(f: &Fastener, frame: &RigidTransform, pitch: f64) -> AssemblyResult<(ScalarField, ScalarField)> {
    let [l, w] = f.profile;
    let c = f.clearance;
    let inv = frame.inverse();
    let lo = Vector3::new(-l / 2.0 - c, -w / 2.0 - c, -BOSS_EMBED);
    let hi = Vector3::new(l / 2.0 + c, w / 2.0 + c, f.height + CAVITY_RELIEF);
    let bounds = super::window::local_box_bounds(frame, &lo, &hi);
    let boss = ScalarField::from_fn(&bounds, pitch, 2, DEFAULT_VOXEL_CAP, |p| {
        sdf::stadium_prism_z(&inv.apply_point(p), l, w, -BOSS_EMBED, f.height)
    })?;
    let cavity = ScalarField::from_fn(&bounds, pitch, 2, DEFAULT_VOXEL_CAP, |p| {
        sdf::stadium_prism_z(&inv.apply_point(p), l + 2.0 * c, w + 2.0 * c, -BOSS_EMBED, f.height + CAVITY_RELIEF)
    })?;
    Ok((boss, cavity))
}

pub(crate) struct Fastened {
    pub a: ScalarField,
    pub b: ScalarField,
    /// Material each boss added to part A.
    pub added: f64,
    /// Material each cavity removed from part B.
    pub removed: f64,
    pub cavity_depths: Vec<f64>,
}

/// Field-domain fastening. `section` is part A's section at the cut.
pub(crate) fn fasten_fields(
    a: &ScalarField,
    b: &ScalarField,
    section: &Section,
    plan: &AssemblyPlan,
    towards_b: &Vector3<f64>,
) -> AssemblyResult<Fastened> {
    check_on_wall(plan, section, towards_b)?;
    let (mut a, mut b) = (a.clone(), b.clone());
    let (mut added, mut removed) = (0.0, 0.0);
    let mut cavity_depths = Vec::new();
    for f in &plan.fasteners {
        let frame = boss_frame(f, section, towards_b);
        let (boss, cavity) = fastener_tools(f, &frame, plan.pitch)?;
        added += csg_apply(&boss, &a, CsgOp::Subtract)?.inside_volume();
        removed += csg_apply(&cavity, &b, CsgOp::Intersect)?.inside_volume();
        csg_apply_local(&mut a, &boss, CsgOp::Union)?;
        csg_apply_local(&mut b, &cavity, CsgOp::Subtract)?;
        cavity_depths.push(f.height + CAVITY_RELIEF);
    }
    Ok(Fastened {
        a,
        b,
        added,
        removed,
        cavity_depths,
    })
}

/// Volume of the overlap of two solids, from the extracted intersection.
pub(crate) fn interference_volume(a: &ScalarField, b: &ScalarField) -> AssemblyResult<f64> {
    let both = csg_apply(a, b, CsgOp::Intersect)?;
    Ok(metrics(&extract_surface(&both)).signed_volume.max(0.0))
}

pub(crate) fn part_report(
    part_a: &TriangleMesh,
    part_b: &TriangleMesh,
    plan: &AssemblyPlan,
    interference: f64,
    cavity_depths: Vec<f64>,
) -> AssemblyResult<PartReport> {
    let da = validate(part_a)?;
    let db = validate(part_b)?;
    Ok(PartReport {
        volume_a: metrics(part_a).signed_volume,
        volume_b: metrics(part_b).signed_volume,
        watertight_a: da.watertight && da.manifold,
        watertight_b: db.watertight && db.manifold,
        boss_count: plan.fasteners.len(),
        cavity_depths,
        interference_volume: interference,
        interference_bound: interference_bound(plan),
        min_wall_thickness: None,
        thin_features: Vec::new(),
    })
}

/// Side of `plane` on which `mesh` lies: -1 below, +1 above.
pub(crate) fn plane_side(mesh: &TriangleMesh, plane: &Plane) -> f64 {
    let c = super::volume_centroid(mesh).unwrap_or_else(|| mesh.bbox().map_or(Point3::origin(), |b| b.center()));
    if plane.signed_distance(&c) < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Adds bosses to `part_a` and cavities to `part_b`; both meet on the plan's
/// split plane.
pub fn add_fasteners(part_a: &TriangleMesh, part_b: &TriangleMesh, plan: &AssemblyPlan) -> AssemblyResult<PartSet> {
    plan.validate()?;
    let plane = plan.split_plane;
    let side = plane_side(part_a, &plane);
    let towards_b = plane.normal * -side;
    // the cut face itself is a degenerate section, so look one voxel inside
    let shifted = Plane {
        offset: plane.offset + side * plan.pitch,
        ..plane
    };
    let section = Section {
        plane,
        ..plane_section(part_a, &shifted)?
    };
    let fa = voxelize(part_a, plan.pitch, 3)?;
    let fb = voxelize(part_b, plan.pitch, 3)?;
    let done = fasten_fields(&fa, &fb, &section, plan, &towards_b)?;
    let interference = interference_volume(&done.a, &done.b)?;
    let a = extract_surface(&done.a).with_name("part_a");
    let b = extract_surface(&done.b).with_name("part_b");
    let report = part_report(&a, &b, plan, interference, done.cavity_depths)?;
    Ok(PartSet {
        part_a: a,
        part_b: b,
        report,
    })
}
