//! Fusing the board bracket to the shell wall.
//!
//! The bracket's base footprint is probed column by column along the base
//! normal; each column becomes a stem reaching its own wall hit plus an
//! overlap, so the stem never punches through a sloping wall.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::window::local_box_bounds;
use super::{AssemblyError, AssemblyResult};
use crate::mesh::{transform, Bvh, RigidTransform, TriangleMesh};
use crate::voxel::{csg_apply, extract_surface, voxelize, CsgOp, ScalarField, DEFAULT_PITCH, DEFAULT_VOXEL_CAP};

/// Longest stem searched for.
pub const MAX_STEM_SEARCH: f64 = 100.0;
/// Default depth a stem column is sunk into the wall.
pub const DEFAULT_STEM_OVERLAP: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketPlacement {
    /// Largest base-to-wall distance over the footprint.
    pub stem_length: f64,
    pub min_stem_length: f64,
    /// Area of the base footprint.
    pub base_area: f64,
    /// Stem depth sunk into the wall past the hit.
    pub overlap: f64,
}

/// Base footprint and per-column wall distances, in the bracket frame.
pub(crate) struct StemPlan {
    x: (f64, f64),
    y: (f64, f64),
    z_base: f64,
    step: [f64; 2],
    n: [usize; 2],
    /// Row-major (x fastest) column lengths including the overlap.
    lengths: Vec<f64>,
    pub placement: BracketPlacement,
}

impl StemPlan {
    fn length_at(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.x.0) / self.step[0]).clamp(0.0, (self.n[0] - 1) as f64);
        let fy = ((y - self.y.0) / self.step[1]).clamp(0.0, (self.n[1] - 1) as f64);
        let (i, j) = ((fx as usize).min(self.n[0] - 2), (fy as usize).min(self.n[1] - 2));
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let l = |i: usize, j: usize| self.lengths[i + self.n[0] * j];
        let a = l(i, j) * (1.0 - tx) + l(i + 1, j) * tx;
        let b = l(i, j + 1) * (1.0 - tx) + l(i + 1, j + 1) * tx;
        // never shorter than the nearest column, so the stem stays fused
        (a * (1.0 - ty) + b * ty).max(l((fx.round() as usize).min(self.n[0] - 1), (fy.round() as usize).min(self.n[1] - 1)))
    }

    /// Bracket-frame signed distance of the stem solid.
    fn distance(&self, q: &Point3<f64>, cap: f64) -> f64 {
        let dx = (self.x.0 - q.x).max(q.x - self.x.1);
        let dy = (self.y.0 - q.y).max(q.y - self.y.1);
        let bottom = self.z_base - self.length_at(q.x, q.y);
        let dz = (bottom - q.z).max(q.z - (self.z_base + cap));
        dx.max(dy).max(dz)
    }
}

/// Probes the wall below the bracket base. `walls` are every piece that can
/// enclose the base sideways; `piece` carries the stem.
pub(crate) fn plan_stem(piece: &Bvh, walls: &[&Bvh], bracket: &TriangleMesh, pose: &RigidTransform, pitch: f64, overlap: f64) -> AssemblyResult<StemPlan> {
    let bb = bracket
        .bbox()
        .ok_or_else(|| AssemblyError::InvalidArgument("bracket mesh is empty".into()))?;
    let z_base = bb.min.z;
    let tol = 1e-6 * (1.0 + bb.extent().norm());
    let base: Vec<&Point3<f64>> = bracket.vertices.iter().filter(|v| v.z <= z_base + tol).collect();
    let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
    for v in &base {
        x = (x.0.min(v.x), x.1.max(v.x));
        y = (y.0.min(v.y), y.1.max(v.y));
    }
    if !(x.1 > x.0 && y.1 > y.0) {
        return Err(AssemblyError::InvalidArgument("bracket has no flat base face".into()));
    }
    let down = pose.apply_vector(&-Vector3::z());
    // the base centre must be enclosed by the piece on every side
    let c = Point3::new(0.5 * (x.0 + x.1), 0.5 * (y.0 + y.1), z_base + pitch);
    let enclosed = [Vector3::x(), -Vector3::x(), Vector3::y(), -Vector3::y()]
        .iter()
        .filter(|d| {
            let (o, d) = (pose.apply_point(&c), pose.apply_vector(d));
            walls.iter().any(|w| w.first_hit(&o, &d, MAX_STEM_SEARCH).is_some())
        })
        .count();
    if enclosed < 4 {
        return Err(AssemblyError::BracketOutsideCavity(format!(
            "only {enclosed} of 4 sideways probes from the base meet the shell"
        )));
    }
    let n = [0, 1].map(|a| {
        let span = if a == 0 { x.1 - x.0 } else { y.1 - y.0 };
        ((span / pitch).ceil() as usize + 1).max(2)
    });
    let step = [(x.1 - x.0) / (n[0] - 1) as f64, (y.1 - y.0) / (n[1] - 1) as f64];
    // rays start one pitch inside the base so a touching wall still registers
    let lift = pitch;
    let mut lengths = Vec::with_capacity(n[0] * n[1]);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for j in 0..n[1] {
        for i in 0..n[0] {
            let q = Point3::new(x.0 + i as f64 * step[0], y.0 + j as f64 * step[1], z_base + lift);
            let hit = piece.first_hit(&pose.apply_point(&q), &down, MAX_STEM_SEARCH + lift).ok_or_else(|| {
                AssemblyError::BracketOutsideCavity(format!(
                    "no wall within {MAX_STEM_SEARCH} mm below base point ({:.2}, {:.2})",
                    q.x, q.y
                ))
            })?;
            let d = (hit.t - lift).max(0.0);
            lo = lo.min(d);
            hi = hi.max(d);
            lengths.push(d + overlap);
        }
    }
    Ok(StemPlan {
        x,
        y,
        z_base,
        step,
        n,
        lengths,
        placement: BracketPlacement {
            stem_length: hi,
            min_stem_length: lo,
            base_area: (x.1 - x.0) * (y.1 - y.0),
            overlap,
        },
    })
}

/// Posed bracket plus stem as one field.
pub(crate) fn bracket_field(
    piece: &Bvh,
    walls: &[&Bvh],
    bracket: &TriangleMesh,
    pose: &RigidTransform,
    pitch: f64,
    overlap: f64,
) -> AssemblyResult<(ScalarField, BracketPlacement)> {
    let stem = plan_stem(piece, walls, bracket, pose, pitch, overlap)?;
    let posed = transform(bracket, pose)?;
    let body = voxelize(&posed, pitch, 3)?;
    let lo = Vector3::new(stem.x.0, stem.y.0, stem.z_base - stem.placement.stem_length - overlap);
    let hi = Vector3::new(stem.x.1, stem.y.1, stem.z_base + pitch);
    let inv = pose.inverse();
    // the stem reaches one voxel into the bracket base
    let stem_field = ScalarField::from_fn(&local_box_bounds(pose, &lo, &hi), pitch, 2, DEFAULT_VOXEL_CAP, |p| {
        stem.distance(&inv.apply_point(p), pitch)
    })?;
    Ok((csg_apply(&body, &stem_field, CsgOp::Union)?, stem.placement))
}

/// Fuses `bracket` (bracket frame, base face towards -z) into `piece` at `pose`.
pub fn place_bracket(piece: &TriangleMesh, bracket: &TriangleMesh, pose: &RigidTransform) -> AssemblyResult<TriangleMesh> {
    Ok(place_bracket_with(piece, bracket, pose, DEFAULT_PITCH, DEFAULT_STEM_OVERLAP)?.0)
}

pub fn place_bracket_with(
    piece: &TriangleMesh,
    bracket: &TriangleMesh,
    pose: &RigidTransform,
    pitch: f64,
    overlap: f64,
) -> AssemblyResult<(TriangleMesh, BracketPlacement)> {
    if !(overlap.is_finite() && overlap >= 0.0) {
        return Err(AssemblyError::InvalidArgument(format!("stem overlap must be >= 0, got {overlap}")));
    }
    let bvh = Bvh::build(piece);
    let (tool, placement) = bracket_field(&bvh, &[&bvh], bracket, pose, pitch, overlap)?;
    let field = voxelize(piece, pitch, 3)?;
    let out = csg_apply(&field, &tool, CsgOp::Union)?;
    Ok((extract_surface(&out).with_name(piece.name.clone().unwrap_or_else(|| "piece".into())), placement))
}
