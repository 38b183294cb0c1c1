//! U-channel tray the board slides into, built as an exact prism so its
//! faces stay planar.

use nalgebra::{Point3, Vector3};

use super::{invalid, BlankResult, CircuitSpec};
use crate::geom2d::{self, P2};
use crate::mesh::TriangleMesh;

pub const DEFAULT_FIT_CLEARANCE: f64 = 0.15;
pub const WALL_THICKNESS: f64 = 2.0;
pub const BASE_THICKNESS: f64 = 2.0;
pub const LIP_DEPTH: f64 = 0.8;
/// Height of the walls above the board top, before clearance.
pub const WALL_RISE: f64 = 1.0;
const MAX_LIP_THICKNESS: f64 = 0.5;
const MIN_LIP_THICKNESS: f64 = 0.1;

/// Bracket dimensions in the bracket frame (board top at z = 0 under the
/// sensor point).
#[derive(Debug, Clone, PartialEq)]
pub struct BracketProfile {
    pub x_range: (f64, f64),
    /// Centre line of the channel.
    pub y_center: f64,
    pub inner_half_width: f64,
    pub outer_half_width: f64,
    pub base_bottom: f64,
    pub floor: f64,
    pub wall_top: f64,
    /// `None` when the clearance leaves no room for a lip.
    pub lip_bottom: Option<f64>,
}

impl BracketProfile {
    pub fn new(spec: &CircuitSpec, clearance: f64) -> BlankResult<Self> {
        spec.validate()?;
        if !(clearance.is_finite() && clearance >= 0.0) {
            return Err(invalid("fit_clearance", format!("must be >= 0, got {clearance}")));
        }
        let (long, short) = spec.footprint();
        let h = spec.height();
        let centre = spec.board_to_bracket().apply_point(&Point3::new(0.0, 0.0, h));
        let inner = short / 2.0 + clearance;
        let wall_top = WALL_RISE - clearance;
        let lip = MAX_LIP_THICKNESS.min(WALL_RISE - 2.0 * clearance);
        Ok(BracketProfile {
            x_range: (centre.x - long / 2.0 - clearance, centre.x + long / 2.0 + clearance),
            y_center: centre.y,
            inner_half_width: inner,
            outer_half_width: inner + WALL_THICKNESS,
            base_bottom: -h - clearance - BASE_THICKNESS,
            floor: -h - clearance,
            wall_top,
            lip_bottom: (lip > MIN_LIP_THICKNESS).then_some(wall_top - lip),
        })
    }

    pub fn channel_width(&self) -> f64 {
        2.0 * self.inner_half_width
    }

    /// Counter-clockwise (y, z) outline of the cross-section.
    pub fn outline(&self) -> Vec<P2> {
        let (c, wi, wo) = (self.y_center, self.inner_half_width, self.outer_half_width);
        let (zb, zf, zt) = (self.base_bottom, self.floor, self.wall_top);
        let mut right = vec![P2::new(c + wo, zb), P2::new(c + wo, zt)];
        let mut left = vec![P2::new(c - wi, zf)];
        match self.lip_bottom {
            Some(zl) => {
                let li = wi - LIP_DEPTH;
                right.extend([P2::new(c + li, zt), P2::new(c + li, zl), P2::new(c + wi, zl), P2::new(c + wi, zf)]);
                left.extend([P2::new(c - wi, zl), P2::new(c - li, zl), P2::new(c - li, zt)]);
            }
            None => {
                right.extend([P2::new(c + wi, zt), P2::new(c + wi, zf)]);
                left.push(P2::new(c - wi, zt));
            }
        }
        let mut out = vec![P2::new(c - wo, zb)];
        out.extend(right);
        out.extend(left);
        out.push(P2::new(c - wo, zt));
        out
    }

    /// Corners of the outer base face, counter-clockwise seen from below.
    pub fn base_corners(&self) -> [Point3<f64>; 4] {
        let (x0, x1) = self.x_range;
        let (y0, y1) = (self.y_center - self.outer_half_width, self.y_center + self.outer_half_width);
        let z = self.base_bottom;
        [
            Point3::new(x0, y0, z),
            Point3::new(x0, y1, z),
            Point3::new(x1, y1, z),
            Point3::new(x1, y0, z),
        ]
    }

    /// Outward normal of the base face, bracket frame.
    pub fn base_normal(&self) -> Vector3<f64> {
        -Vector3::z()
    }

    pub fn mesh(&self) -> TriangleMesh {
        extrude_x(&self.outline(), self.x_range.0, self.x_range.1).with_name("bracket")
    }
}

/// Closed prism of a counter-clockwise (y, z) outline between `x0` and `x1`.
fn extrude_x(outline: &[P2], x0: f64, x1: f64) -> TriangleMesh {
    let n = outline.len();
    let mut vertices = Vec::with_capacity(2 * n);
    for x in [x0, x1] {
        vertices.extend(outline.iter().map(|p| Point3::new(x, p.x, p.y)));
    }
    let mut triangles = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        let (a0, a1, b0, b1) = (i as u32, j as u32, (i + n) as u32, (j + n) as u32);
        triangles.push([a0, a1, b1]);
        triangles.push([a0, b1, b0]);
    }
    for t in geom2d::triangulate(outline, &[]) {
        let [a, b, c] = t.map(|v| v as u32);
        triangles.push([a + n as u32, b + n as u32, c + n as u32]);
        triangles.push([a, c, b]);
    }
    TriangleMesh::new(vertices, triangles)
}

/// Bracket mesh in the bracket frame.
pub fn generate_bracket(spec: &CircuitSpec, fit_clearance: f64) -> BlankResult<TriangleMesh> {
    Ok(BracketProfile::new(spec, fit_clearance)?.mesh())
}
