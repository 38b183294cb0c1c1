use std::collections::HashMap;

use nalgebra::Point3;

use super::ScalarField;
use crate::mesh::TriangleMesh;

/// Edge-crossing parameters are kept this far from lattice points so that
/// distinct vertices never coincide.
const T_CLAMP: f64 = 0.01;

/// Six tetrahedra sharing the cube diagonal 0-7; corner bit 1 = +x, 2 = +y,
/// 4 = +z. Adjacent cubes induce identical face diagonals, so the
/// decomposition is conforming across the whole grid.
const TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Zero isosurface by marching tetrahedra.
///
/// Samples on the grid boundary are treated as outside, so the result is
/// always closed. Triangles face from negative to non-negative samples.
/// Returns an empty mesh when no sample is negative.
pub fn extract_surface(f: &ScalarField) -> TriangleMesh {
    let [nx, ny, nz] = f.dims();
    let value = |i: usize, j: usize, k: usize| -> f64 {
        let v = f.get(i, j, k) as f64;
        if i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1 {
            v.max(0.0)
        } else {
            v
        }
    };

    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut edge_vertex: HashMap<u64, u32> = HashMap::new();

    let mut corner_val = [0.0f64; 8];
    let mut corner_idx = [[0usize; 3]; 8];
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut any_in = false;
                let mut any_out = false;
                for c in 0..8 {
                    let (ci, cj, ck) = (i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                    let v = value(ci, cj, ck);
                    corner_val[c] = v;
                    corner_idx[c] = [ci, cj, ck];
                    if v < 0.0 {
                        any_in = true;
                    } else {
                        any_out = true;
                    }
                }
                if !(any_in && any_out) {
                    continue;
                }
                for tet in &TETS {
                    let inside: Vec<usize> = tet.iter().copied().filter(|&c| corner_val[c] < 0.0).collect();
                    if inside.is_empty() || inside.len() == 4 {
                        continue;
                    }
                    let outside: Vec<usize> = tet.iter().copied().filter(|&c| corner_val[c] >= 0.0).collect();

                    let mut vertex = |a: usize, b: usize| -> u32 {
                        // a inside, b outside; key by lower lattice point and direction
                        let (lo, hi) = if a & !b == 0 { (a, b) } else { (b, a) };
                        let [li, lj, lk] = corner_idx[lo];
                        let key = (f.index(li, lj, lk) as u64) * 8 + (lo ^ hi) as u64;
                        *edge_vertex.entry(key).or_insert_with(|| {
                            let (vl, vh) = (corner_val[lo], corner_val[hi]);
                            let t = (vl / (vl - vh)).clamp(T_CLAMP, 1.0 - T_CLAMP);
                            let pl = f.lattice_point(li, lj, lk);
                            let [hi_i, hj, hk] = corner_idx[hi];
                            let ph = f.lattice_point(hi_i, hj, hk);
                            vertices.push(pl + (ph - pl) * t);
                            (vertices.len() - 1) as u32
                        })
                    };

                    let polygon: Vec<u32> = match inside.len() {
                        1 => {
                            let a = inside[0];
                            outside.iter().map(|&b| vertex(a, b)).collect()
                        }
                        3 => {
                            let b = outside[0];
                            inside.iter().map(|&a| vertex(a, b)).collect()
                        }
                        _ => {
                            let (i0, i1) = (inside[0], inside[1]);
                            let (o0, o1) = (outside[0], outside[1]);
                            vec![vertex(i0, o0), vertex(i0, o1), vertex(i1, o1), vertex(i1, o0)]
                        }
                    };

                    let centroid = |cs: &[usize]| {
                        let mut s = nalgebra::Vector3::zeros();
                        for &c in cs {
                            let [a, b, d] = corner_idx[c];
                            s += f.lattice_point(a, b, d).coords;
                        }
                        s / cs.len() as f64
                    };
                    let out_dir = centroid(&outside) - centroid(&inside);

                    let mut emit = |tri: [u32; 3]| {
                        let [a, b, c] = tri.map(|v| vertices[v as usize]);
                        let n = (b - a).cross(&(c - a));
                        if n.dot(&out_dir) < 0.0 {
                            triangles.push([tri[0], tri[2], tri[1]]);
                        } else {
                            triangles.push(tri);
                        }
                    };
                    if polygon.len() == 3 {
                        emit([polygon[0], polygon[1], polygon[2]]);
                    } else {
                        let q = polygon;
                        let area = |a: u32, b: u32, c: u32| {
                            let [pa, pb, pc] = [a, b, c].map(|v| vertices[v as usize]);
                            (pb - pa).cross(&(pc - pa)).norm()
                        };
                        let d1 = area(q[0], q[1], q[2]).min(area(q[0], q[2], q[3]));
                        let d2 = area(q[0], q[1], q[3]).min(area(q[1], q[2], q[3]));
                        if d1 >= d2 {
                            emit([q[0], q[1], q[2]]);
                            emit([q[0], q[2], q[3]]);
                        } else {
                            emit([q[0], q[1], q[3]]);
                            emit([q[1], q[2], q[3]]);
                        }
                    }
                }
            }
        }
    }
    TriangleMesh::new(vertices, triangles)
}
