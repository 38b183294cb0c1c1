//! Dense signed-distance grids: voxelization of closed meshes, Boolean
//! combination, offsetting and isosurface extraction.
//!
//! Values are `f32` millimetres, negative inside. Every grid lives on the
//! global lattice `k * pitch` so two fields with the same pitch line up
//! sample for sample.

mod extract;
pub mod sdf;
mod voxelize;

use std::io::Write;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::Aabb;

pub use extract::extract_surface;
pub use voxelize::{voxelize, voxelize_with, VoxelizeOptions};

/// Default sample spacing (mm).
pub const DEFAULT_PITCH: f64 = 0.2;
/// Default empty margin around the solid (voxels).
pub const DEFAULT_PADDING: usize = 3;
/// Default limit on samples per grid.
pub const DEFAULT_VOXEL_CAP: usize = 1 << 28;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VoxelError {
    #[error("mesh is not watertight ({boundary_edges} boundary edges, {inverted_pairs} inverted pairs, {non_manifold_edges} non-manifold edges)")]
    NotWatertight {
        boundary_edges: usize,
        inverted_pairs: usize,
        non_manifold_edges: usize,
    },
    #[error("grid of {dims:?} = {voxels} voxels exceeds the cap of {cap}")]
    GridTooLarge { dims: [usize; 3], voxels: usize, cap: usize },
    #[error("fields have different pitches ({a} mm vs {b} mm)")]
    PitchMismatch { a: f64, b: f64 },
    #[error("offset {delta} mm exceeds the field padding of {limit} mm")]
    DeltaExceedsPadding { delta: f64, limit: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type VoxelResult<T> = Result<T, VoxelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsgOp {
    Union,
    Intersect,
    Subtract,
}

/// Uniform grid of signed distances.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    /// Lattice index of sample (0, 0, 0); its position is `origin_index * pitch`.
    origin_index: [i64; 3],
    pitch: f64,
    dims: [usize; 3],
    /// Margin (voxels) the field promises between solid and grid boundary.
    padding: usize,
    /// x fastest, then y, then z.
    values: Vec<f32>,
}

impl ScalarField {
    /// Grid covering `bounds` plus `padding` voxels, with `f` sampled at every
    /// lattice point.
    pub fn from_fn<F>(bounds: &Aabb, pitch: f64, padding: usize, cap: usize, f: F) -> VoxelResult<ScalarField>
    where
        F: Fn(&Point3<f64>) -> f64 + Sync,
    {
        let (origin_index, dims) = lattice_for(bounds, pitch, padding, cap)?;
        let mut field = ScalarField {
            origin_index,
            pitch,
            dims,
            padding,
            values: vec![0.0; dims[0] * dims[1] * dims[2]],
        };
        let [nx, ny, _] = dims;
        let o = origin_index;
        field.values.par_chunks_mut(nx * ny).enumerate().for_each(|(k, slab)| {
            for j in 0..ny {
                for i in 0..nx {
                    let p = Point3::new(
                        (o[0] + i as i64) as f64 * pitch,
                        (o[1] + j as i64) as f64 * pitch,
                        (o[2] + k as i64) as f64 * pitch,
                    );
                    slab[i + nx * j] = f(&p) as f32;
                }
            }
        });
        Ok(field)
    }

    pub(crate) fn from_parts(origin_index: [i64; 3], pitch: f64, dims: [usize; 3], padding: usize, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), dims[0] * dims[1] * dims[2]);
        ScalarField {
            origin_index,
            pitch,
            dims,
            padding,
            values,
        }
    }

    pub fn origin(&self) -> Point3<f64> {
        self.lattice_point(0, 0, 0)
    }

    pub fn origin_index(&self) -> [i64; 3] {
        self.origin_index
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Region spanned by the samples.
    pub fn bounds(&self) -> Aabb {
        let d = self.dims;
        Aabb::new(self.origin(), self.lattice_point(d[0] - 1, d[1] - 1, d[2] - 1))
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    #[inline]
    pub fn lattice_point(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        let o = self.origin_index;
        Point3::new(
            (o[0] + i as i64) as f64 * self.pitch,
            (o[1] + j as i64) as f64 * self.pitch,
            (o[2] + k as i64) as f64 * self.pitch,
        )
    }

    /// Trilinear sample. Outside the grid the nearest boundary value is
    /// extended by the distance to the grid box, which keeps the sign of a
    /// padded field positive and the magnitude a lower bound.
    pub fn sample(&self, p: &Point3<f64>) -> f64 {
        let b = self.bounds();
        let mut q = *p;
        for a in 0..3 {
            q[a] = q[a].clamp(b.min[a], b.max[a]);
        }
        let outside = (p - q).norm();
        let mut g = [0usize; 3];
        let mut f = [0.0f64; 3];
        for a in 0..3 {
            let x = (q[a] - b.min[a]) / self.pitch;
            let cell = (x.floor() as usize).min(self.dims[a] - 2);
            g[a] = cell;
            f[a] = (x - cell as f64).clamp(0.0, 1.0);
        }
        let mut v = 0.0;
        for corner in 0..8 {
            let (di, dj, dk) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
            let w = (if di == 1 { f[0] } else { 1.0 - f[0] })
                * (if dj == 1 { f[1] } else { 1.0 - f[1] })
                * (if dk == 1 { f[2] } else { 1.0 - f[2] });
            if w != 0.0 {
                v += w * self.get(g[0] + di, g[1] + dj, g[2] + dk) as f64;
            }
        }
        v + outside
    }

    /// Central-difference gradient of the trilinear interpolant.
    pub fn gradient(&self, p: &Point3<f64>) -> Vector3<f64> {
        let h = 0.5 * self.pitch;
        Vector3::new(
            self.sample(&(p + Vector3::x() * h)) - self.sample(&(p - Vector3::x() * h)),
            self.sample(&(p + Vector3::y() * h)) - self.sample(&(p - Vector3::y() * h)),
            self.sample(&(p + Vector3::z() * h)) - self.sample(&(p - Vector3::z() * h)),
        ) / (2.0 * h)
    }

    /// Number of samples strictly inside.
    pub fn inside_count(&self) -> usize {
        self.values.iter().filter(|&&v| v < 0.0).count()
    }

    /// Sample-count volume estimate: inside samples times the cell volume.
    pub fn inside_volume(&self) -> f64 {
        self.inside_count() as f64 * self.pitch.powi(3)
    }

    /// Applies `f(position, value)` at every sample.
    pub fn map_with_position(&self, f: impl Fn(&Point3<f64>, f32) -> f32 + Sync) -> ScalarField {
        let [nx, ny, _] = self.dims;
        let mut out = self.clone();
        out.values.par_iter_mut().enumerate().for_each(|(n, v)| {
            let (i, j, k) = (n % nx, (n / nx) % ny, n / (nx * ny));
            *v = f(&self.lattice_point(i, j, k), *v);
        });
        out
    }

    /// Applies `f` to every value.
    pub fn map(&self, f: impl Fn(f32) -> f32 + Sync) -> ScalarField {
        let mut out = self.clone();
        out.values.par_iter_mut().for_each(|v| *v = f(*v));
        out
    }

    fn lattice_offset(&self, other: &ScalarField) -> [i64; 3] {
        [0, 1, 2].map(|a| self.origin_index[a] - other.origin_index[a])
    }

    /// Values of `other` at every sample of `self`'s lattice.
    fn resample_from(&self, other: &ScalarField) -> Vec<f32> {
        let off = self.lattice_offset(other);
        let [nx, ny, nz] = self.dims;
        let mut out = vec![0.0f32; nx * ny * nz];
        out.par_chunks_mut(nx * ny).enumerate().for_each(|(k, slab)| {
            for j in 0..ny {
                for i in 0..nx {
                    let oi = [i as i64 + off[0], j as i64 + off[1], k as i64 + off[2]];
                    let inside = (0..3).all(|a| oi[a] >= 0 && (oi[a] as usize) < other.dims[a]);
                    slab[i + nx * j] = if inside {
                        other.get(oi[0] as usize, oi[1] as usize, oi[2] as usize)
                    } else {
                        other.sample(&self.lattice_point(i, j, k)) as f32
                    };
                }
            }
        });
        out
    }

    /// Same-lattice copy enlarged to cover `bounds`; new samples use the
    /// outside-extension rule of [`ScalarField::sample`].
    fn extended_to(&self, bounds: &Aabb) -> ScalarField {
        let lo = [0, 1, 2].map(|a| {
            let k = (bounds.min[a] / self.pitch + 1e-9).floor() as i64;
            k.min(self.origin_index[a])
        });
        let hi = [0, 1, 2].map(|a| {
            let k = (bounds.max[a] / self.pitch - 1e-9).ceil() as i64;
            k.max(self.origin_index[a] + self.dims[a] as i64 - 1)
        });
        let dims = [0, 1, 2].map(|a| (hi[a] - lo[a] + 1) as usize);
        if lo == self.origin_index && dims == self.dims {
            return self.clone();
        }
        let mut out = ScalarField::from_parts(lo, self.pitch, dims, self.padding, vec![0.0; dims[0] * dims[1] * dims[2]]);
        out.values = out.resample_from(self);
        out
    }

    /// Writes `<prefix>.raw` (little-endian f32, x fastest) and `<prefix>.txt`
    /// (dims, origin, pitch).
    pub fn write_debug_dump(&self, prefix: &Path) -> std::io::Result<()> {
        let mut raw = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            raw.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(prefix.with_extension("raw"), raw)?;
        let o = self.origin();
        let mut txt = std::fs::File::create(prefix.with_extension("txt"))?;
        writeln!(txt, "dims {} {} {}", self.dims[0], self.dims[1], self.dims[2])?;
        writeln!(txt, "origin {} {} {}", o.x, o.y, o.z)?;
        writeln!(txt, "pitch {}", self.pitch)?;
        writeln!(txt, "format f32le x-fastest")?;
        Ok(())
    }
}

/// Snapped lattice covering `bounds` with `padding` extra samples per side.
pub(crate) fn lattice_for(bounds: &Aabb, pitch: f64, padding: usize, cap: usize) -> VoxelResult<([i64; 3], [usize; 3])> {
    if !(pitch > 0.0 && pitch.is_finite()) {
        return Err(VoxelError::InvalidArgument(format!("pitch must be positive, got {pitch}")));
    }
    let e = bounds.extent();
    if !(0..3).all(|a| bounds.min[a].is_finite() && e[a].is_finite() && e[a] >= 0.0) {
        return Err(VoxelError::InvalidArgument("bounds are not finite".into()));
    }
    let pad = padding as i64;
    let lo = [0, 1, 2].map(|a| (bounds.min[a] / pitch).floor() as i64 - pad);
    let hi = [0, 1, 2].map(|a| (bounds.max[a] / pitch).ceil() as i64 + pad);
    let dims = [0, 1, 2].map(|a| ((hi[a] - lo[a] + 1).max(2)) as usize);
    let voxels = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX);
    if voxels > cap {
        return Err(VoxelError::GridTooLarge { dims, voxels, cap });
    }
    Ok((lo, dims))
}

/// Boolean combination. `b` is resampled onto `a`'s lattice (directly when
/// the lattices coincide, trilinearly otherwise). A union grows the lattice
/// to cover both operands; intersection and subtraction keep `a`'s grid.
pub fn csg_apply(a: &ScalarField, b: &ScalarField, op: CsgOp) -> VoxelResult<ScalarField> {
    if (a.pitch - b.pitch).abs() > 1e-12 * a.pitch.max(b.pitch) {
        return Err(VoxelError::PitchMismatch { a: a.pitch, b: b.pitch });
    }
    let base = match op {
        CsgOp::Union => {
            let mut f = a.extended_to(&a.bounds().union(&b.bounds()));
            f.padding = a.padding.min(b.padding);
            f
        }
        CsgOp::Intersect | CsgOp::Subtract => a.clone(),
    };
    let bv = base.resample_from(b);
    let mut out = base;
    out.values.par_iter_mut().zip(bv.par_iter()).for_each(|(x, &y)| {
        *x = match op {
            CsgOp::Union => x.min(y),
            CsgOp::Intersect => x.max(y),
            CsgOp::Subtract => x.max(-y),
        }
    });
    Ok(out)
}

/// Union or subtraction applied in place over `tool`'s samples only, for a
/// small tool on a large field. Samples of `a` outside the tool's box are
/// left as they are; where `csg_apply` would differ there, the difference is
/// in magnitude far from the surface, never in sign. Falls back to
/// [`csg_apply`] when the tool is not inside `a`'s grid.
pub fn csg_apply_local(a: &mut ScalarField, tool: &ScalarField, op: CsgOp) -> VoxelResult<()> {
    if (a.pitch - tool.pitch).abs() > 1e-12 * a.pitch.max(tool.pitch) {
        return Err(VoxelError::PitchMismatch { a: a.pitch, b: tool.pitch });
    }
    let off = tool.lattice_offset(a);
    let contained = (0..3).all(|k| off[k] >= 0 && off[k] as usize + tool.dims[k] <= a.dims[k]);
    if op == CsgOp::Intersect || !contained {
        *a = csg_apply(a, tool, op)?;
        return Ok(());
    }
    let [tx, ty, tz] = tool.dims;
    let [ax, ay, _] = a.dims;
    let base = off[0] as usize + ax * (off[1] as usize + ay * off[2] as usize);
    for k in 0..tz {
        for j in 0..ty {
            let row = base + ax * (j + ay * k);
            let dst = &mut a.values[row..row + tx];
            let src = &tool.values[tx * (j + ty * k)..tx * (j + 1 + ty * k)];
            for (x, &y) in dst.iter_mut().zip(src) {
                *x = match op {
                    CsgOp::Union => x.min(y),
                    _ => x.max(-y),
                };
            }
        }
    }
    if op == CsgOp::Union {
        a.padding = a.padding.min(tool.padding);
    }
    Ok(())
}

/// Shifts the zero level set: positive `delta` erodes the solid by `delta`,
/// negative grows it.
pub fn offset_field(f: &ScalarField, delta: f64) -> VoxelResult<ScalarField> {
    let limit = f.padding as f64 * f.pitch;
    if !delta.is_finite() || delta.abs() >= limit {
        return Err(VoxelError::DeltaExceedsPadding { delta, limit });
    }
    if delta == 0.0 {
        return Ok(f.clone());
    }
    let d = delta as f32;
    Ok(f.map(|v| v + d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_field(r: f64, pitch: f64) -> ScalarField {
        let b = Aabb::new(Point3::new(-r, -r, -r), Point3::new(r, r, r));
        ScalarField::from_fn(&b, pitch, 3, DEFAULT_VOXEL_CAP, |p| p.coords.norm() - r).unwrap()
    }

    #[test]
    fn lattice_is_snapped() {
        let f = sphere_field(2.3, 0.5);
        let o = f.origin();
        for a in 0..3 {
            assert!((o[a] / 0.5 - (o[a] / 0.5).round()).abs() < 1e-12);
        }
        assert_eq!(f.padding(), 3);
    }

    #[test]
    fn sample_interpolates_and_extends() {
        let f = sphere_field(2.0, 0.25);
        assert!((f.sample(&Point3::origin()) + 2.0).abs() < 1e-6);
        let p = Point3::new(0.9, 0.3, 0.2);
        assert!((f.sample(&p) - (p.coords.norm() - 2.0)).abs() < 0.05);
        let far = f.sample(&Point3::new(50.0, 0.0, 0.0));
        assert!(far > 40.0);
    }

    #[test]
    fn pitch_mismatch() {
        let a = sphere_field(2.0, 0.25);
        let b = sphere_field(2.0, 0.5);
        assert!(matches!(csg_apply(&a, &b, CsgOp::Union), Err(VoxelError::PitchMismatch { .. })));
    }

    #[test]
    fn subtract_self_is_empty() {
        let a = sphere_field(2.0, 0.25);
        let d = csg_apply(&a, &a, CsgOp::Subtract).unwrap();
        assert_eq!(d.inside_count(), 0);
    }

    #[test]
    fn union_grows_lattice() {
        let a = sphere_field(1.0, 0.25);
        let b_bounds = Aabb::new(Point3::new(4.0, -1.0, -1.0), Point3::new(6.0, 1.0, 1.0));
        let b = ScalarField::from_fn(&b_bounds, 0.25, 3, DEFAULT_VOXEL_CAP, |p| (p - Point3::new(5.0, 0.0, 0.0)).norm() - 1.0).unwrap();
        let u = csg_apply(&a, &b, CsgOp::Union).unwrap();
        assert!(u.sample(&Point3::new(5.0, 0.0, 0.0)) < -0.9);
        assert!(u.sample(&Point3::origin()) < -0.9);
        assert_eq!(u.inside_count(), a.inside_count() + b.inside_count());
    }

    #[test]
    fn offset_limits() {
        let a = sphere_field(2.0, 0.25);
        assert_eq!(offset_field(&a, 0.0).unwrap(), a);
        assert!(offset_field(&a, 0.5).is_ok());
        assert!(matches!(offset_field(&a, 0.75), Err(VoxelError::DeltaExceedsPadding { .. })));
        let e = offset_field(&a, 0.5).unwrap();
        assert!((e.sample(&Point3::origin()) + 1.5).abs() < 1e-6);
    }

    #[test]
    fn debug_dump_files() {
        let f = sphere_field(1.0, 0.5);
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("sphere");
        f.write_debug_dump(&prefix).unwrap();
        let raw = std::fs::read(prefix.with_extension("raw")).unwrap();
        assert_eq!(raw.len(), f.len() * 4);
        let txt = std::fs::read_to_string(prefix.with_extension("txt")).unwrap();
        assert!(txt.starts_with(&format!("dims {} {} {}", f.dims()[0], f.dims()[1], f.dims()[2])));
    }
}
