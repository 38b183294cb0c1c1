use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{Aabb, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshMetrics {
    /// mm³; positive for outward-oriented closed solids.
    pub signed_volume: f64,
    /// mm²
    pub surface_area: f64,
    pub bbox: Option<Aabb>,
}

pub fn metrics(mesh: &TriangleMesh) -> MeshMetrics {
    let surface_area = (0..mesh.triangles.len())
        .map(|t| 0.5 * mesh.area_vector(t).norm())
        .sum();
    MeshMetrics {
        signed_volume: signed_volume(mesh),
        surface_area,
        bbox: mesh.bbox(),
    }
}

/// Sum of signed tetrahedra spanned by each triangle and the origin.
pub fn signed_volume(mesh: &TriangleMesh) -> f64 {
    (0..mesh.triangles.len())
        .map(|t| {
            let [a, b, c] = mesh.corners(t);
            a.coords.dot(&b.coords.cross(&c.coords))
        })
        .sum::<f64>()
        / 6.0
}

/// Generalized winding number of `p` with respect to the mesh: ~1 inside a
/// closed outward solid, ~0 outside, fractional near holes.
pub fn winding_number(mesh: &TriangleMesh, p: &Point3<f64>) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.corners(t);
        total += solid_angle(&(a - p), &(b - p), &(c - p));
    }
    total / (4.0 * std::f64::consts::PI)
}

/// About `count` surface points spread in proportion to triangle area,
/// each with its triangle's unit normal. Deterministic: points follow a
/// fixed low-discrepancy sequence inside every triangle.
pub fn surface_samples(mesh: &TriangleMesh, count: usize) -> Vec<(Point3<f64>, nalgebra::Vector3<f64>)> {
    let areas: Vec<f64> = (0..mesh.triangles.len()).map(|t| 0.5 * mesh.area_vector(t).norm()).collect();
    let total: f64 = areas.iter().sum();
    if total <= 0.0 || count == 0 {
        return Vec::new();
    }
    let per_area = count as f64 / total;
    // plastic-number sequence
    const G1: f64 = 0.754_877_666_246_692_8;
    const G2: f64 = 0.569_840_290_998_053_3;
    let mut out = Vec::with_capacity(count + mesh.triangles.len());
    let mut carry = 0.0;
    let mut k = 0u64;
    for (t, &area) in areas.iter().enumerate() {
        if area <= 0.0 {
            continue;
        }
        carry += area * per_area;
        let n = carry.floor();
        carry -= n;
        let [a, b, c] = mesh.corners(t);
        let normal = mesh.area_vector(t) / (2.0 * area);
        for _ in 0..n as usize {
            k += 1;
            let (mut u, mut v) = ((0.5 + G1 * k as f64).fract(), (0.5 + G2 * k as f64).fract());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            out.push((a + (b - a) * u + (c - a) * v, normal));
        }
    }
    out
}

#[inline]
pub(crate) fn solid_angle(
    a: &nalgebra::Vector3<f64>,
    b: &nalgebra::Vector3<f64>,
    c: &nalgebra::Vector3<f64>,
) -> f64 {
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let det = a.dot(&b.cross(c));
    let denom = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    2.0 * det.atan2(denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn cube_volume_and_area() {
        let m = metrics(&primitives::cube(10.0));
        assert!((m.signed_volume - 1000.0).abs() < 1e-9);
        assert!((m.surface_area - 600.0).abs() < 1e-9);
        let bb = m.bbox.unwrap();
        assert_eq!(bb.extent(), nalgebra::Vector3::new(10.0, 10.0, 10.0));
    }

    #[test]
    fn inside_out_cube_is_negative() {
        let m = metrics(&primitives::cube(10.0).flipped());
        assert!((m.signed_volume + 1000.0).abs() < 1e-9);
    }

    #[test]
    fn icosphere_volume_close_to_analytic() {
        let analytic = 4.0 / 3.0 * std::f64::consts::PI * 20f64.powi(3);
        assert!((analytic - 33510.3).abs() < 0.1);
        let v = signed_volume(&primitives::icosphere(Point3::origin(), 20.0, 4));
        assert!(v < analytic, "inscribed polyhedron must under-estimate");
        assert!((v - analytic).abs() / analytic < 0.01, "{v}");
    }

    #[test]
    fn winding_number_inside_outside() {
        let cube = primitives::cube(2.0);
        assert!((winding_number(&cube, &Point3::new(0.1, 0.2, -0.3)) - 1.0).abs() < 1e-9);
        assert!(winding_number(&cube, &Point3::new(3.0, 0.0, 0.0)).abs() < 1e-9);
        // an open box still gives a fractional, sign-meaningful answer
        let mut open = cube.clone();
        open.triangles.truncate(10);
        let w = winding_number(&open, &Point3::origin());
        assert!(w > 0.5 && w < 1.0);
    }
}
