use rayon::slice::ParallelSliceMut;

use serde::{Deserialize, Serialize};

use super::{MeshResult, TriangleMesh};

/// Triangles with area below this (mm²) count as degenerate.
pub const DEFAULT_DEGENERATE_AREA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    pub degenerate_area: f64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            degenerate_area: DEFAULT_DEGENERATE_AREA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshDiagnostics {
    pub watertight: bool,
    pub manifold: bool,
    pub boundary_edge_count: usize,
    /// Edges shared by two triangles that traverse it in the same direction.
    pub inverted_adjacent_pairs: usize,
    pub degenerate_triangle_count: usize,
    pub connected_components: usize,
    pub non_manifold_edge_count: usize,
}

pub fn validate(mesh: &TriangleMesh) -> MeshResult<MeshDiagnostics> {
    validate_with(mesh, &ValidateOptions::default())
}

/// Exact edge-pairing diagnostics over vertex indices.
pub fn validate_with(mesh: &TriangleMesh, opts: &ValidateOptions) -> MeshResult<MeshDiagnostics> {
    mesh.check_indices()?;

    // directed edges keyed by (min, max) with the direction in the low bit
    let mut keys: Vec<u64> = Vec::with_capacity(mesh.triangles.len() * 3);
    for tri in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if a == b {
                continue;
            }
            let (lo, hi) = (a.min(b) as u64, a.max(b) as u64);
            keys.push((lo << 33) | (hi << 1) | (a > b) as u64);
        }
    }
    keys.par_sort_unstable();

    let mut boundary = 0;
    let mut inverted = 0;
    let mut non_manifold = 0;
    for run in keys.chunk_by(|x, y| x >> 1 == y >> 1) {
        let bwd = run.iter().filter(|&&k| k & 1 == 1).count();
        let fwd = run.len() - bwd;
        match fwd + bwd {
            1 => boundary += 1,
            2 if fwd != 1 => inverted += 1,
            2 => {}
            _ => non_manifold += 1,
        }
    }

    let degenerate = (0..mesh.triangles.len())
        .filter(|&t| 0.5 * mesh.area_vector(t).norm() < opts.degenerate_area)
        .count();

    Ok(MeshDiagnostics {
        watertight: boundary == 0 && inverted == 0 && non_manifold == 0,
        manifold: non_manifold == 0,
        boundary_edge_count: boundary,
        inverted_adjacent_pairs: inverted,
        degenerate_triangle_count: degenerate,
        connected_components: count_components(mesh),
        non_manifold_edge_count: non_manifold,
    })
}

pub(crate) struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    pub(crate) fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins, keeps results independent of call order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Components of triangles connected through shared vertices.
fn count_components(mesh: &TriangleMesh) -> usize {
    let mut uf = UnionFind::new(mesh.vertices.len());
    let mut used = vec![false; mesh.vertices.len()];
    for tri in &mesh.triangles {
        uf.union(tri[0], tri[1]);
        uf.union(tri[1], tri[2]);
        for &v in tri {
            used[v as usize] = true;
        }
    }
    (0..mesh.vertices.len() as u32)
        .filter(|&v| used[v as usize] && uf.find(v) == v)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{primitives, MeshError};

    #[test]
    fn closed_cube() {
        let d = validate(&primitives::cube(1.0)).unwrap();
        assert!(d.watertight && d.manifold);
        assert_eq!(d.boundary_edge_count, 0);
        assert_eq!(d.connected_components, 1);
        assert_eq!(d.degenerate_triangle_count, 0);
    }

    #[test]
    fn cube_missing_one_triangle() {
        let mut cube = primitives::cube(1.0);
        cube.triangles.pop();
        let d = validate(&cube).unwrap();
        assert!(!d.watertight);
        // the removed triangle's three edges are now unpaired
        assert_eq!(d.boundary_edge_count, 3);
    }

    #[test]
    fn cube_with_flipped_triangle() {
        let mut cube = primitives::cube(1.0);
        cube.triangles[5].swap(1, 2);
        let d = validate(&cube).unwrap();
        assert!(!d.watertight);
        assert!(d.inverted_adjacent_pairs >= 1);
        // each of its three edges now pairs with a same-direction neighbour
        assert_eq!(d.inverted_adjacent_pairs, 3);
    }

    #[test]
    fn two_cubes_two_components() {
        let a = primitives::cube(1.0);
        let b = primitives::box_mesh([5.0, 0.0, 0.0].into(), [6.0, 1.0, 1.0].into());
        let d = validate(&a.merged(&b)).unwrap();
        assert_eq!(d.connected_components, 2);
        assert!(d.watertight);
    }

    #[test]
    fn index_out_of_range() {
        let mut cube = primitives::cube(1.0);
        cube.triangles[0][2] = 99;
        assert!(matches!(validate(&cube), Err(MeshError::IndexOutOfRange { index: 99, .. })));
    }

    #[test]
    fn non_manifold_edge() {
        let mut cube = primitives::cube(1.0);
        let extra = cube.triangles[0];
        cube.triangles.push(extra);
        let d = validate(&cube).unwrap();
        assert!(!d.manifold);
        assert!(!d.watertight);
    }
}
