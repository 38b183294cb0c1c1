use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lattice_for, ScalarField, VoxelError, VoxelResult, DEFAULT_PADDING, DEFAULT_PITCH, DEFAULT_VOXEL_CAP};
use crate::mesh::{point_triangle_distance_sq, validate, winding_number, TriangleMesh};

/// Z-layers per parallel work unit in the exact-distance pass.
const SLAB: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelizeOptions {
    pub pitch: f64,
    pub padding: usize,
    pub cap: usize,
    /// Samples within this many voxels of a triangle's box get exact
    /// distances; the rest are filled by closest-triangle propagation.
    pub exact_band: usize,
    /// Magnitudes beyond this are clamped to it; the sign stays exact.
    pub max_distance: Option<f64>,
}

impl Default for VoxelizeOptions {
    fn default() -> Self {
        Self {
            pitch: DEFAULT_PITCH,
            padding: DEFAULT_PADDING,
            cap: DEFAULT_VOXEL_CAP,
            exact_band: 2,
            max_distance: None,
        }
    }
}

pub fn voxelize(mesh: &TriangleMesh, pitch: f64, padding: usize) -> VoxelResult<ScalarField> {
    voxelize_with(
        mesh,
        &VoxelizeOptions {
            pitch,
            padding,
            ..VoxelizeOptions::default()
        },
    )
}

/// Signed distance to a closed mesh sampled on a padded lattice.
///
/// Inside/outside comes from signed ray crossings along +x (non-zero rule),
/// with a per-row winding-number fallback if a row's crossings do not
/// balance. Magnitudes are exact near the surface and propagated from
/// neighbouring closest triangles elsewhere.
pub fn voxelize_with(mesh: &TriangleMesh, opts: &VoxelizeOptions) -> VoxelResult<ScalarField> {
    if opts.padding < 2 {
        return Err(VoxelError::InvalidArgument(format!(
            "padding must be at least 2 voxels, got {}",
            opts.padding
        )));
    }
    let diag = validate(mesh).map_err(|e| VoxelError::InvalidArgument(e.to_string()))?;
    if !diag.watertight {
        return Err(VoxelError::NotWatertight {
            boundary_edges: diag.boundary_edge_count,
            inverted_pairs: diag.inverted_adjacent_pairs,
            non_manifold_edges: diag.non_manifold_edge_count,
        });
    }
    let bounds = mesh
        .bbox()
        .ok_or_else(|| VoxelError::InvalidArgument("mesh has no triangles".into()))?;
    let (origin_index, dims) = lattice_for(&bounds, opts.pitch, opts.padding, opts.cap)?;
    let grid = Grid {
        origin: origin_index.map(|o| o as f64 * opts.pitch),
        pitch: opts.pitch,
        dims,
    };
    let tris: Vec<[Point3<f64>; 3]> = (0..mesh.triangles.len()).map(|t| mesh.corners(t)).collect();

    let inside = inside_flags(mesh, &tris, &grid);
    let (mut dist, owner) = exact_band(&tris, &grid, opts.exact_band);
    propagate(&tris, &grid, &mut dist, owner, opts.max_distance.map_or(f32::INFINITY, |d| d as f32));

    let values: Vec<f32> = dist
        .par_iter()
        .zip(inside.par_iter())
        .map(|(&d, &ins)| {
            let d = d.min(opts.max_distance.map_or(f32::INFINITY, |m| m as f32));
            if ins {
                -d
            } else {
                d
            }
        })
        .collect();
    Ok(ScalarField::from_parts(origin_index, opts.pitch, dims, opts.padding, values))
}

struct Grid {
    origin: [f64; 3],
    pitch: f64,
    dims: [usize; 3],
}

impl Grid {
    #[inline]
    fn point(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        Point3::new(
            self.origin[0] + i as f64 * self.pitch,
            self.origin[1] + j as f64 * self.pitch,
            self.origin[2] + k as f64 * self.pitch,
        )
    }

    fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Inclusive index range of samples with coordinate in `[lo, hi]` on `axis`.
    /// Widened by a hair so samples lying exactly on `lo` or `hi` are never
    /// lost to rounding; callers apply exact tests afterwards.
    fn range(&self, axis: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let eps = 1e-6;
        let a = ((lo - self.origin[axis]) / self.pitch - eps).ceil().max(0.0);
        let b = ((hi - self.origin[axis]) / self.pitch + eps).floor();
        let max = (self.dims[axis] - 1) as f64;
        if b < 0.0 || a > max || a > b {
            return None;
        }
        Some((a as usize, b.min(max) as usize))
    }
}

/// Sign of the 2D orientation of `q` relative to the directed segment
/// `p -> r`, with exact antisymmetry under swapping endpoints and a
/// symbolic perturbation `q + (e, e^2)` deciding exact zeros.
#[inline]
fn edge_sign(p: [f64; 2], r: [f64; 2], q: [f64; 2]) -> i8 {
    let (u, v, flip) = if (p[0], p[1]) <= (r[0], r[1]) { (p, r, 1) } else { (r, p, -1) };
    let val = (v[0] - u[0]) * (q[1] - u[1]) - (v[1] - u[1]) * (q[0] - u[0]);
    let s = if val > 0.0 {
        1
    } else if val < 0.0 {
        -1
    } else if v[1] != u[1] {
        if v[1] > u[1] {
            -1
        } else {
            1
        }
    } else if v[0] > u[0] {
        1
    } else {
        -1
    };
    s * flip
}

/// Per-sample inside flags from signed crossings of +x rays.
fn inside_flags(mesh: &TriangleMesh, tris: &[[Point3<f64>; 3]], grid: &Grid) -> Vec<bool> {
    let [nx, ny, nz] = grid.dims;
    // crossings per (j, k) row: (x, +1 entering / -1 leaving)
    let mut rows: Vec<Vec<(f64, i8)>> = vec![Vec::new(); ny * nz];
    for tri in tris {
        let yz = tri.map(|p| [p.y, p.z]);
        let (ylo, yhi) = (yz.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), yz.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max));
        let (zlo, zhi) = (yz.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min), yz.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max));
        let (Some((j0, j1)), Some((k0, k1))) = (grid.range(1, ylo, yhi), grid.range(2, zlo, zhi)) else {
            continue;
        };
        let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
        if n.x == 0.0 {
            continue;
        }
        for k in k0..=k1 {
            for j in j0..=j1 {
                let q = [grid.origin[1] + j as f64 * grid.pitch, grid.origin[2] + k as f64 * grid.pitch];
                let s0 = edge_sign(yz[0], yz[1], q);
                let s1 = edge_sign(yz[1], yz[2], q);
                let s2 = edge_sign(yz[2], yz[0], q);
                if s0 != s1 || s1 != s2 {
                    continue;
                }
                let a = tri[0];
                let x = a.x - (n.y * (q[0] - a.y) + n.z * (q[1] - a.z)) / n.x;
                // counter-clockwise in (y, z) means the normal has +x: leaving
                rows[j + ny * k].push((x, -s0));
            }
        }
    }

    let mut inside = vec![false; grid.len()];
    inside.par_chunks_mut(nx).zip(rows.par_iter_mut()).enumerate().for_each(|(row, (out, crossings))| {
        let (j, k) = (row % ny, row / ny);
        crossings.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let total: i32 = crossings.iter().map(|c| c.1 as i32).sum();
        if total != 0 {
                    for (i, flag) in out.iter_mut().enumerate() {
                *flag = winding_number(mesh, &grid.point(i, j, k)) > 0.5;
            }
            return;
        }
        let mut w = 0i32;
        let mut c = 0;
        for (i, flag) in out.iter_mut().enumerate() {
            let x = grid.origin[0] + i as f64 * grid.pitch;
            while c < crossings.len() && crossings[c].0 < x {
                w += crossings[c].1 as i32;
                c += 1;
            }
            *flag = w != 0;
        }
    });
    inside
}

/// Exact distances for samples near each triangle. Returns unsigned
/// distances (infinite where unset) and the owning triangle per sample.
fn exact_band(tris: &[[Point3<f64>; 3]], grid: &Grid, band: usize) -> (Vec<f32>, Vec<u32>) {
    let [nx, ny, nz] = grid.dims;
    let margin = band as f64 * grid.pitch;
    let slabs = nz.div_ceil(SLAB);
    let mut by_slab: Vec<Vec<u32>> = vec![Vec::new(); slabs];
    let boxes: Vec<([f64; 3], [f64; 3])> = tris
        .iter()
        .map(|t| {
            let lo = [0, 1, 2].map(|a| t.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min) - margin);
            let hi = [0, 1, 2].map(|a| t.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max) + margin);
            (lo, hi)
        })
        .collect();
    for (ti, (lo, hi)) in boxes.iter().enumerate() {
        if let Some((k0, k1)) = grid.range(2, lo[2], hi[2]) {
            for s in k0 / SLAB..=k1 / SLAB {
                by_slab[s].push(ti as u32);
            }
        }
    }

    let mut dist = vec![f32::INFINITY; grid.len()];
    let mut owner = vec![u32::MAX; grid.len()];
    let slab_len = nx * ny * SLAB;
    dist.par_chunks_mut(slab_len)
        .zip(owner.par_chunks_mut(slab_len))
        .enumerate()
        .for_each(|(s, (dslab, oslab))| {
            let kbase = s * SLAB;
            let kend = (kbase + SLAB).min(nz) - 1;
            for &ti in &by_slab[s] {
                let (lo, hi) = &boxes[ti as usize];
                let (Some((i0, i1)), Some((j0, j1)), Some((k0, k1))) =
                    (grid.range(0, lo[0], hi[0]), grid.range(1, lo[1], hi[1]), grid.range(2, lo[2], hi[2]))
                else {
                    continue;
                };
                let [a, b, c] = &tris[ti as usize];
                for k in k0.max(kbase)..=k1.min(kend) {
                    for j in j0..=j1 {
                        for i in i0..=i1 {
                            let p = grid.point(i, j, k);
                            let d = point_triangle_distance_sq(&p, a, b, c).sqrt() as f32;
                            let idx = i + nx * (j + ny * (k - kbase));
                            if d < dslab[idx] || (d == dslab[idx] && ti < oslab[idx]) {
                                dslab[idx] = d;
                                oslab[idx] = ti;
                            }
                        }
                    }
                }
            }
        });
    (dist, owner)
}

/// Fills remaining samples by passing closest-triangle candidates between
/// face neighbours in order of increasing distance (bucketed queue).
/// Samples further than `limit` are left unset.
fn propagate(tris: &[[Point3<f64>; 3]], grid: &Grid, dist: &mut [f32], mut owner: Vec<u32>, limit: f32) {
    let [nx, ny, nz] = grid.dims;
    let width = grid.pitch as f32;
    let bucket_of = |d: f32| (d / width) as usize;
    let mut buckets: Vec<Vec<u32>> = Vec::new();
    let push = |buckets: &mut Vec<Vec<u32>>, b: usize, v: u32| {
        if buckets.len() <= b {
            buckets.resize_with(b + 1, Vec::new);
        }
        buckets[b].push(v);
    };
    for (v, &d) in dist.iter().enumerate() {
        if d.is_finite() {
            push(&mut buckets, bucket_of(d), v as u32);
        }
    }
    let mut b = 0;
    while b < buckets.len() {
        while let Some(v) = buckets[b].pop() {
            let v = v as usize;
            let t = owner[v];
            let (i, j, k) = (v % nx, (v / nx) % ny, v / (nx * ny));
            let [pa, pb, pc] = &tris[t as usize];
            let mut neighbours = [usize::MAX; 6];
            if i > 0 {
                neighbours[0] = v - 1;
            }
            if i + 1 < nx {
                neighbours[1] = v + 1;
            }
            if j > 0 {
                neighbours[2] = v - nx;
            }
            if j + 1 < ny {
                neighbours[3] = v + nx;
            }
            if k > 0 {
                neighbours[4] = v - nx * ny;
            }
            if k + 1 < nz {
                neighbours[5] = v + nx * ny;
            }
            for n in neighbours {
                if n == usize::MAX || owner[n] == t {
                    continue;
                }
                let (ni, nj, nk) = (n % nx, (n / nx) % ny, n / (nx * ny));
                let d = point_triangle_distance_sq(&grid.point(ni, nj, nk), pa, pb, pc).sqrt() as f32;
                if d <= limit && (d < dist[n] || (d == dist[n] && t < owner[n])) {
                    dist[n] = d;
                    owner[n] = t;
                    push(&mut buckets, bucket_of(d).max(b), n as u32);
                }
            }
        }
        b += 1;
    }
}
