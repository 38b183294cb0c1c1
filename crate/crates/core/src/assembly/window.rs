//! Window opening: a through bore plus a counterbore for the glued disc.
//!
//! The counterbore floor sits `depth` below the lowest point of the outer
//! surface on the counterbore circle, so the disc rests on a complete rim
//! even where the surface curves away from the window plane.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{AssemblyError, AssemblyPlan, AssemblyResult};
use crate::mesh::{Aabb, Bvh, RigidTransform, TriangleMesh};
use crate::voxel::{csg_apply_local, extract_surface, sdf, voxelize, CsgOp, ScalarField, DEFAULT_VOXEL_CAP};

const RAY_ANGLES: usize = 32;
/// Bore overshoot past the inner surface.
const BORE_MARGIN: f64 = 1.0;

/// Cut geometry along the window axis, in window-frame z (0 = window plane,
/// positive outward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowCut {
    pub top: f64,
    /// Counterbore floor; equal to `top` when there is no counterbore.
    pub floor: f64,
    pub bore_bottom: f64,
    /// How far the outer surface drops below the window plane on the
    /// counterbore circle.
    pub surface_drop: f64,
}

/// Probes the piece along the window axis and sizes the cut.
pub fn plan_window_cut(piece: &TriangleMesh, plan: &AssemblyPlan) -> AssemblyResult<WindowCut> {
    plan_window_cut_bvh(&Bvh::build(piece), plan)
}

pub(crate) fn plan_window_cut_bvh(bvh: &Bvh, plan: &AssemblyPlan) -> AssemblyResult<WindowCut> {
    let w = &plan.window_pose;
    let bb = bvh.bbox().ok_or(AssemblyError::WindowOffPiece)?;
    let reach = bb.extent().norm() + (bb.center() - w.origin()).norm() + 1.0;
    let r_th = plan.through_hole_diameter / 2.0;
    let r_cb = plan.counterbore.diameter / 2.0;

    // (first entering z, following exit z) per probe ray
    let probe = |x: f64, y: f64| -> Option<(f64, Option<f64>)> {
        let o = w.apply_point(&Point3::new(x, y, reach));
        let hits = bvh.ray_hits(&o, &-w.axis(2), 2.0 * reach);
        let first = hits.iter().position(|h| h.entering)?;
        let z1 = reach - hits[first].t;
        let z2 = hits[first + 1..].iter().find(|h| !h.entering).map(|h| reach - h.t);
        Some((z1, z2))
    };
    if probe(0.0, 0.0).is_none() {
        return Err(AssemblyError::WindowOffPiece);
    }
    let ring = |r: f64| -> Vec<Option<(f64, Option<f64>)>> {
        (0..RAY_ANGLES)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / RAY_ANGLES as f64;
                probe(r * a.cos(), r * a.sin())
            })
            .collect()
    };
    let mut top = f64::NEG_INFINITY;
    let mut bottom = f64::INFINITY;
    let mut drop: f64 = 0.0;
    let mut samples = vec![probe(0.0, 0.0)];
    samples.extend(ring(0.5 * r_th));
    samples.extend(ring(r_th));
    for s in samples.iter().flatten() {
        top = top.max(s.0);
        if let Some(z2) = s.1 {
            bottom = bottom.min(z2);
        }
    }
    for s in ring(r_cb).into_iter().flatten() {
        top = top.max(s.0);
        drop = drop.max(-s.0);
    }
    let fallback = -(plan.shell_thickness + plan.counterbore.depth + drop);
    let bore_bottom = if bottom.is_finite() { bottom } else { fallback } - BORE_MARGIN;
    let top = top.max(0.0) + 1.0 + 2.0 * plan.pitch;
    let floor = if plan.counterbore.depth > 0.0 {
        -(plan.counterbore.depth + drop)
    } else {
        top
    };
    Ok(WindowCut {
        top,
        floor,
        bore_bottom: bore_bottom.min(floor - plan.pitch),
        surface_drop: drop,
    })
}

/// Window-frame tool solid for `cut`.
pub(crate) fn window_tool(cut: &WindowCut, plan: &AssemblyPlan) -> impl Fn(&Point3<f64>) -> f64 + Sync {
    let inv = plan.window_pose.inverse();
    let cut = *cut;
    let r_th = plan.through_hole_diameter / 2.0;
    let r_cb = plan.counterbore.diameter / 2.0;
    move |p: &Point3<f64>| {
        let q = inv.apply_point(p);
        let bore = sdf::cylinder_z(&q, r_th, cut.bore_bottom, cut.top);
        if cut.floor < cut.top {
            bore.min(sdf::cylinder_z(&q, r_cb, cut.floor, cut.top))
        } else {
            bore
        }
    }
}

pub(crate) fn window_tool_bounds(cut: &WindowCut, plan: &AssemblyPlan) -> Aabb {
    let r = (plan.counterbore.diameter / 2.0).max(plan.through_hole_diameter / 2.0);
    local_box_bounds(&plan.window_pose, &Vector3::new(-r, -r, cut.bore_bottom), &Vector3::new(r, r, cut.top))
}

pub(crate) fn local_box_bounds(pose: &RigidTransform, lo: &Vector3<f64>, hi: &Vector3<f64>) -> Aabb {
    Aabb::new(Point3::from(*lo), Point3::from(*hi)).transformed(pose)
}

/// Removes the window cut from a piece field.
pub(crate) fn cut_window_field(field: &ScalarField, cut: &WindowCut, plan: &AssemblyPlan) -> AssemblyResult<(ScalarField, ScalarField)> {
    let tool = ScalarField::from_fn(&window_tool_bounds(cut, plan), field.pitch(), 2, DEFAULT_VOXEL_CAP, window_tool(cut, plan))?;
    let mut out = field.clone();
    csg_apply_local(&mut out, &tool, CsgOp::Subtract)?;
    Ok((out, tool))
}

/// Bore and counterbore subtracted from `piece`.
pub fn cut_window(piece: &TriangleMesh, plan: &AssemblyPlan) -> AssemblyResult<TriangleMesh> {
    plan.validate()?;
    let cut = plan_window_cut(piece, plan)?;
    let field = voxelize(piece, plan.pitch, 3)?;
    let (out, _) = cut_window_field(&field, &cut, plan)?;
    Ok(extract_surface(&out).with_name(piece.name.clone().unwrap_or_else(|| "piece".into())))
}

/// Measurements of a cut window taken from the output mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowProbe {
    /// Radial extent of the counterbore floor.
    pub rim_width: Option<f64>,
    /// Every probe ray inside the bore passes below the bore bottom
    /// before touching material.
    pub bore_clear: bool,
}

pub fn probe_window(mesh: &TriangleMesh, plan: &AssemblyPlan, cut: &WindowCut) -> WindowProbe {
    let bvh = Bvh::build(mesh);
    let w = &plan.window_pose;
    let start = cut.top + 5.0;
    let first_z = |x: f64, y: f64| -> Option<f64> {
        let o = w.apply_point(&Point3::new(x, y, start));
        bvh.first_hit(&o, &-w.axis(2), 1e4).map(|h| start - h.t)
    };
    let r_th = plan.through_hole_diameter / 2.0;
    let r_cb = plan.counterbore.diameter / 2.0;
    let angles = 16;
    let mut clear = true;
    for k in 0..angles {
        let a = std::f64::consts::TAU * k as f64 / angles as f64;
        for r in [0.0, 0.5 * r_th, r_th - 2.0 * plan.pitch] {
            if first_z(r * a.cos(), r * a.sin()).is_some_and(|z| z > cut.bore_bottom) {
                clear = false;
            }
        }
    }
    if cut.floor >= cut.top {
        return WindowProbe {
            rim_width: None,
            bore_clear: clear,
        };
    }
    let step = 0.01;
    let mut widths = Vec::new();
    for k in 0..angles {
        let a = std::f64::consts::TAU * (k as f64 + 0.25) / angles as f64;
        let (c, s) = (a.cos(), a.sin());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let n = ((r_cb - r_th + 2.0) / step) as usize;
        for i in 0..=n {
            let r = r_th - 1.0 + i as f64 * step;
            if first_z(r * c, r * s).is_some_and(|z| (z - cut.floor).abs() < 0.5) {
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        if hi > lo {
            widths.push(hi - lo);
        }
    }
    WindowProbe {
        rim_width: (!widths.is_empty()).then(|| widths.iter().sum::<f64>() / widths.len() as f64),
        bore_clear: clear,
    }
}
