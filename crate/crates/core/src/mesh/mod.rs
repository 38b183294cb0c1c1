//! Indexed triangle meshes: file I/O, validation, basic repair, measurement
//! and rigid transforms.
//!
//! Every other module in the crate consumes and produces [`TriangleMesh`].
//! Coordinates are millimetres. Triangles are wound counter-clockwise when
//! seen from outside the solid.

mod bvh;
mod io;
mod metrics;
pub mod primitives;
mod repair;
mod transform;
mod validate;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bvh::{Bvh, RayHit};
pub use io::{detect_format, parse_mesh, write_mesh, MeshFormat, STL_BANNER};
pub use metrics::{metrics, signed_volume, surface_samples, winding_number, MeshMetrics};
pub use repair::{repair_basic, repair_with, RepairOptions, DEFAULT_WELD_EPSILON};
pub use transform::{transform, RigidTransform, ORTHONORMAL_TOLERANCE};
pub use validate::{validate, validate_with, MeshDiagnostics, ValidateOptions, DEFAULT_DEGENERATE_AREA};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("truncated file: expected {expected} bytes for the declared triangle count, found {actual}")]
    TruncatedFile { expected: usize, actual: usize },
    #[error("malformed record at byte offset {offset}: {message}")]
    MalformedRecord { offset: usize, message: String },
    #[error("unsupported feature on line {line}: {feature}")]
    UnsupportedFeature { line: usize, feature: String },
    #[error("triangle {triangle} references vertex {index}, but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: u32,
        vertex_count: usize,
    },
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
}

pub type MeshResult<T> = Result<T, MeshError>;

/// An indexed triangle soup with counter-clockwise outward orientation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    pub name: Option<String>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            triangles,
            name: None,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Corner positions of triangle `t`.
    #[inline]
    pub fn corners(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Non-normalized normal (twice the area vector) of triangle `t`.
    #[inline]
    pub fn area_vector(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a))
    }

    pub fn check_indices(&self) -> MeshResult<()> {
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            for &i in tri {
                if i as usize >= n {
                    return Err(MeshError::IndexOutOfRange {
                        triangle: t,
                        index: i,
                        vertex_count: n,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn bbox(&self) -> Option<Aabb> {
        Aabb::from_points(self.triangles.iter().flatten().map(|&i| self.vertices[i as usize]))
    }

    /// Reverses the winding of every triangle.
    pub fn flipped(&self) -> TriangleMesh {
        let mut out = self.clone();
        for tri in &mut out.triangles {
            tri.swap(1, 2);
        }
        out
    }

    /// Concatenates two meshes without welding.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let offset = self.vertices.len() as u32;
        let mut out = self.clone();
        out.vertices.extend_from_slice(&other.vertices);
        out.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]));
        out
    }
}

/// Plane `normal · x = offset` with unit `normal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    /// Normalises `normal`; the plane passes through `point`.
    pub fn through(point: &Point3<f64>, normal: &Vector3<f64>) -> Plane {
        let n = normal.normalize();
        Plane {
            normal: n,
            offset: n.dot(&point.coords),
        }
    }

    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    /// Right-handed in-plane axes `(u, v)` with `u × v = normal`.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>) {
        let n = self.normal;
        let helper = if n.x.abs() < 0.6 {
            Vector3::x()
        } else if n.y.abs() < 0.6 {
            Vector3::y()
        } else {
            Vector3::z()
        };
        let u = (helper - n * n.dot(&helper)).normalize();
        (u, n.cross(&u))
    }

    pub fn origin(&self) -> Point3<f64> {
        Point3::from(self.normal * self.offset)
    }

    /// In-plane coordinates of `p`.
    pub fn to_2d(&self, p: &Point3<f64>) -> nalgebra::Point2<f64> {
        let (u, v) = self.basis();
        let d = p - self.origin();
        nalgebra::Point2::new(d.dot(&u), d.dot(&v))
    }

    pub fn from_2d(&self, q: &nalgebra::Point2<f64>) -> Point3<f64> {
        let (u, v) = self.basis();
        self.origin() + u * q.x + v * q.y
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Self {
        Self { min, max }
    }

    pub fn from_points(points: impl IntoIterator<Item = Point3<f64>>) -> Option<Aabb> {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let mut b = Aabb::new(first, first);
        for p in iter {
            b.include(&p);
        }
        Some(b)
    }

    pub fn include(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb::new(self.min.inf(&other.min), self.max.sup(&other.max))
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = Vector3::repeat(margin);
        Aabb::new(self.min - m, self.max + m)
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2.sqrt()
    }
}

/// Closest point on triangle `(a, b, c)` to `p`.
pub fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Squared distance from `p` to triangle `(a, b, c)`.
#[inline]
pub fn point_triangle_distance_sq(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> f64 {
    (closest_point_on_triangle(p, a, b, c) - p).norm_squared()
}
