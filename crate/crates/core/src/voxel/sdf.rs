//! Analytic signed-distance primitives (negative inside), used to build tool
//! fields with [`super::ScalarField::from_fn`]. Local-frame variants expect
//! the caller to map world points through the inverse pose first.

use nalgebra::{Point3, Vector2, Vector3};

pub fn sphere(p: &Point3<f64>, center: &Point3<f64>, radius: f64) -> f64 {
    (p - center).norm() - radius
}

/// Axis-aligned box centred on the origin with half extents `half`.
pub fn aabox(p: &Point3<f64>, half: &Vector3<f64>) -> f64 {
    let q = p.coords.abs() - half;
    let outside = q.map(|v| v.max(0.0)).norm();
    outside + q.max().min(0.0)
}

/// Box with edges rounded by `radius`; the outer extent is still `half`.
pub fn rounded_box(p: &Point3<f64>, half: &Vector3<f64>, radius: f64) -> f64 {
    let r = radius.min(half.min()).max(0.0);
    aabox(p, &(half - Vector3::repeat(r))) - r
}

/// Extrusion along z over `[z0, z1]` of a 2D profile distance `d2`.
#[inline]
pub fn extrude_z(d2: f64, z: f64, z0: f64, z1: f64) -> f64 {
    let dz = (z0 - z).max(z - z1);
    let w = Vector2::new(d2.max(0.0), dz.max(0.0));
    w.norm() + d2.max(dz).min(0.0)
}

/// Cylinder about the z axis, radius `r`, spanning `z0..z1`.
pub fn cylinder_z(p: &Point3<f64>, r: f64, z0: f64, z1: f64) -> f64 {
    extrude_z(Vector2::new(p.x, p.y).norm() - r, p.z, z0, z1)
}

/// 2D stadium (obround) centred on the origin, long axis x, overall
/// `length` by `width`.
pub fn stadium_2d(x: f64, y: f64, length: f64, width: f64) -> f64 {
    let r = width / 2.0;
    let h = ((length - width) / 2.0).max(0.0);
    let cx = x.abs().min(h);
    Vector2::new(x - x.signum() * cx, y).norm() - r
}

/// Stadium prism spanning `z0..z1`.
pub fn stadium_prism_z(p: &Point3<f64>, length: f64, width: f64, z0: f64, z1: f64) -> f64 {
    extrude_z(stadium_2d(p.x, p.y, length, width), p.z, z0, z1)
}

/// Half-space `normal · p <= offset` (normal need not be unit).
pub fn halfspace(p: &Point3<f64>, normal: &Vector3<f64>, offset: f64) -> f64 {
    let n = normal.norm();
    (normal.dot(&p.coords) - offset) / n
}

/// Square-section bar from `a` to `b` with half side `half`, the section
/// aligned to the segment and the axis least parallel to it.
pub fn segment_bar(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, half: f64) -> f64 {
    let axis = b - a;
    let len = axis.norm();
    if len < 1e-12 {
        return aabox(&Point3::from(p - a), &Vector3::repeat(half));
    }
    let u = axis / len;
    let helper = if u.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let v = u.cross(&helper).normalize();
    let w = u.cross(&v);
    let d = p - nalgebra::center(a, b);
    let local = Point3::new(d.dot(&u), d.dot(&v), d.dot(&w));
    aabox(&local, &Vector3::new(len / 2.0 + half, half, half))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_distances() {
        let h = Vector3::new(1.0, 2.0, 3.0);
        assert!((aabox(&Point3::origin(), &h) + 1.0).abs() < 1e-12);
        assert!((aabox(&Point3::new(3.0, 0.0, 0.0), &h) - 2.0).abs() < 1e-12);
        assert!((aabox(&Point3::new(2.0, 3.0, 0.0), &h) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rounded_box_keeps_faces() {
        let h = Vector3::new(2.0, 2.0, 2.0);
        assert!(rounded_box(&Point3::new(2.0, 0.0, 0.0), &h, 0.5).abs() < 1e-12);
        // corner is rounded away
        assert!(rounded_box(&Point3::new(2.0, 2.0, 2.0), &h, 0.5) > 0.0);
    }

    #[test]
    fn cylinder_and_stadium() {
        assert!((cylinder_z(&Point3::new(0.0, 0.0, 0.5), 2.0, 0.0, 1.0) + 0.5).abs() < 1e-12);
        assert!((cylinder_z(&Point3::new(3.0, 0.0, 0.5), 2.0, 0.0, 1.0) - 1.0).abs() < 1e-12);
        assert!((stadium_2d(3.0, 0.0, 6.0, 2.0)).abs() < 1e-12);
        assert!((stadium_2d(0.0, 1.0, 6.0, 2.0)).abs() < 1e-12);
        assert!((stadium_2d(0.0, 0.0, 6.0, 2.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn bar_along_diagonal() {
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(10.0, 10.0, 0.0);
        assert!(segment_bar(&Point3::new(5.0, 5.0, 0.0), &a, &b, 0.75) < -0.7);
        assert!(segment_bar(&Point3::new(5.0, 5.0, 2.0), &a, &b, 0.75) > 1.0);
    }
}
