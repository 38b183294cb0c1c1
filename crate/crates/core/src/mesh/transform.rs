use nalgebra::{Matrix3, Point3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Aabb, MeshError, MeshResult, TriangleMesh};

/// Orthonormality tolerance on rotation entries.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> MeshResult<Self> {
        let t = Self { rotation, translation };
        t.check()?;
        Ok(t)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation by `angle` radians about `axis` through the origin.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self {
            rotation: *r.matrix(),
            translation: Vector3::zeros(),
        }
    }

    /// Frame whose local x, y, z axes are the given orthonormal columns,
    /// with local origin at `origin`.
    pub fn from_frame(x: Vector3<f64>, y: Vector3<f64>, z: Vector3<f64>, origin: Point3<f64>) -> Self {
        Self {
            rotation: Matrix3::from_columns(&[x, y, z]),
            translation: origin.coords,
        }
    }

    pub fn check(&self) -> MeshResult<()> {
        let r = &self.rotation;
        if r.iter().chain(self.translation.iter()).any(|v| !v.is_finite()) {
            return Err(MeshError::InvalidTransform("non-finite entry".into()));
        }
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if err > ORTHONORMAL_TOLERANCE {
            return Err(MeshError::InvalidTransform(format!(
                "rotation columns not orthonormal (max deviation {err:.3e})"
            )));
        }
        if r.determinant() < 0.0 {
            return Err(MeshError::InvalidTransform("rotation is a reflection".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn origin(&self) -> Point3<f64> {
        Point3::from(self.translation)
    }

    pub fn axis(&self, i: usize) -> Vector3<f64> {
        self.rotation.column(i).into_owned()
    }

    /// Rotation angle (radians) of `self⁻¹ ∘ other`.
    pub fn angle_to(&self, other: &RigidTransform) -> f64 {
        let r = self.rotation.transpose() * other.rotation;
        ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    fn is_exact_identity(&self) -> bool {
        self.rotation == Matrix3::identity() && self.translation == Vector3::zeros()
    }
}

#[derive(Serialize, Deserialize)]
struct RigidTransformRepr {
    /// Row-major.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl Aabb {
    /// Axis-aligned box around this box's corners after `t`.
    pub fn transformed(&self, t: &RigidTransform) -> Aabb {
        let (lo, hi) = (self.min, self.max);
        let corners = (0..8).map(|s| {
            t.apply_point(&Point3::new(
                if s & 1 == 0 { lo.x } else { hi.x },
                if s & 2 == 0 { lo.y } else { hi.y },
                if s & 4 == 0 { lo.z } else { hi.z },
            ))
        });
        Aabb::from_points(corners).expect("eight corners")
    }
}

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let r = &self.rotation;
        RigidTransformRepr {
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            translation: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = RigidTransformRepr::deserialize(d)?;
        let r = repr.rotation;
        Ok(RigidTransform {
            rotation: Matrix3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ),
            translation: Vector3::from(repr.translation),
        })
    }
}

/// Maps every vertex through `t`. Topology and winding are unchanged.
pub fn transform(mesh: &TriangleMesh, t: &RigidTransform) -> MeshResult<TriangleMesh> {
    t.check()?;
    if t.is_exact_identity() {
        return Ok(mesh.clone());
    }
    let mut out = mesh.clone();
    for v in &mut out.vertices {
        *v = t.apply_point(v);
    }
    Ok(out)
}
