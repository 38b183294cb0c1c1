//! Hollowing: the scan minus its inward offset, in the field domain.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{AssemblyError, AssemblyResult};
use crate::mesh::{surface_samples, Bvh, TriangleMesh};
use crate::voxel::{csg_apply, extract_surface, offset_field, voxelize_with, CsgOp, ScalarField, VoxelizeOptions, DEFAULT_PITCH};

/// Surface samples examined for wall thickness.
const THICKNESS_SAMPLES: usize = 20_000;
const MAX_THIN_REPORTS: usize = 16;
/// Thin reports closer than this are merged.
const THIN_SPACING: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThinFeature {
    pub location: [f64; 3],
    /// Material thickness (mm) measured along the inward normal.
    pub thickness: f64,
}

impl ThinFeature {
    pub fn to_error(&self) -> AssemblyError {
        AssemblyError::ThinFeature {
            location: self.location,
            thickness: self.thickness,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Shelled {
    pub mesh: TriangleMesh,
    pub field: ScalarField,
    /// Regions where the offset collapsed and the part is solid.
    pub thin_features: Vec<ThinFeature>,
    /// Smallest sampled distance from the outer to the inner surface.
    pub min_wall_thickness: Option<f64>,
}

pub fn shell(scan: &TriangleMesh, thickness: f64) -> AssemblyResult<Shelled> {
    shell_with(scan, thickness, DEFAULT_PITCH)
}

/// Hollow solid with walls `thickness` thick.
pub fn shell_with(scan: &TriangleMesh, thickness: f64, pitch: f64) -> AssemblyResult<Shelled> {
    if !(pitch.is_finite() && pitch > 0.0) {
        return Err(AssemblyError::InvalidArgument(format!("pitch must be > 0, got {pitch}")));
    }
    if !(thickness.is_finite() && thickness >= 2.0 * pitch) {
        return Err(AssemblyError::InvalidArgument(format!(
            "shell thickness {thickness} must be at least two voxels ({} mm)",
            2.0 * pitch
        )));
    }
    let padding = (thickness / pitch).ceil() as usize + 2;
    let outer = voxelize_with(
        scan,
        &VoxelizeOptions {
            pitch,
            padding,
            // only the band the inner surface needs
            max_distance: Some(thickness + 3.0 * pitch),
            ..Default::default()
        },
    )?;
    let inner = offset_field(&outer, thickness)?;
    let field = csg_apply(&outer, &inner, CsgOp::Subtract)?;
    let mesh = extract_surface(&field).with_name("shell");

    let inner_mesh = extract_surface(&inner);
    let (thin_features, min_wall_thickness) = wall_survey(scan, &inner_mesh, thickness, pitch);
    Ok(Shelled {
        mesh,
        field,
        thin_features,
        min_wall_thickness,
    })
}

/// Flags surface samples whose inner surface is further than a convex
/// corner allows, and measures the remaining walls.
fn wall_survey(scan: &TriangleMesh, inner: &TriangleMesh, thickness: f64, pitch: f64) -> (Vec<ThinFeature>, Option<f64>) {
    let inner_bvh = Bvh::build(inner);
    let scan_bvh = Bvh::build(scan);
    let limit = 3f64.sqrt() * thickness + 2.0 * pitch;
    let mut flagged: Vec<(f64, Point3<f64>)> = Vec::new();
    let mut min_wall: Option<f64> = None;
    for (p, n) in surface_samples(scan, THICKNESS_SAMPLES) {
        match inner_bvh.nearest(&p).map(|(d, _, _)| d) {
            Some(d) if d <= limit => {
                min_wall = Some(min_wall.map_or(d, |m| m.min(d)));
            }
            _ => {
                let eps = 1e-6 * (1.0 + p.coords.abs().max());
                let depth = scan_bvh
                    .ray_hits(&(p - n * eps), &-n, f64::INFINITY)
                    .into_iter()
                    .find(|h| !h.entering)
                    .map_or(0.0, |h| h.t + eps);
                flagged.push((depth, p));
            }
        }
    }
    flagged.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.x.total_cmp(&b.1.x))
            .then(a.1.y.total_cmp(&b.1.y))
            .then(a.1.z.total_cmp(&b.1.z))
    });
    let mut reports: Vec<ThinFeature> = Vec::new();
    for (depth, p) in flagged {
        if reports.len() >= MAX_THIN_REPORTS {
            break;
        }
        if reports.iter().all(|r| (Point3::from(r.location) - p).norm() > THIN_SPACING) {
            reports.push(ThinFeature {
                location: [p.x, p.y, p.z],
                thickness: depth,
            });
        }
    }
    (reports, min_wall)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{metrics, primitives, validate};

    #[test]
    fn zero_thickness_rejected_early() {
        let c = primitives::cube(10.0);
        assert!(matches!(shell(&c, 0.0), Err(AssemblyError::InvalidArgument(_))));
        assert!(matches!(shell(&c, 0.3), Err(AssemblyError::InvalidArgument(_))));
    }

    #[test]
    fn thin_slab_is_reported() {
        // 40 x 40 x 4 plate: a 3 mm offset from both faces collapses
        let slab = primitives::box_mesh(Point3::new(-20.0, -20.0, -2.0), Point3::new(20.0, 20.0, 2.0));
        let s = shell_with(&slab, 3.0, 0.25).unwrap();
        assert!(!s.thin_features.is_empty());
        let t = s.thin_features[0].thickness;
        assert!((t - 4.0).abs() < 0.1, "{t}");
        let d = validate(&s.mesh).unwrap();
        assert!(d.watertight);
        // nothing was hollowed
        assert!((metrics(&s.mesh).signed_volume - 6400.0).abs() / 6400.0 < 0.03);
    }

    #[test]
    fn cube_has_no_thin_report() {
        let s = shell_with(&primitives::cube(20.0), 3.0, 0.25).unwrap();
        assert!(s.thin_features.is_empty(), "{:?}", s.thin_features);
        let w = s.min_wall_thickness.unwrap();
        assert!((w - 3.0).abs() < 0.2, "{w}");
    }
}
