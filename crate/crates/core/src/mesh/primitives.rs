//! Closed, outward-oriented primitive solids used as fixtures and tools.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::TriangleMesh;

/// Axis-aligned box between two corners.
pub fn box_mesh(min: Point3<f64>, max: Point3<f64>) -> TriangleMesh {
    let vertices = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        })
        .collect();
    let triangles = vec![
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
    ];
    TriangleMesh::new(vertices, triangles)
}

/// Cube of edge `size` centred on the origin.
pub fn cube(size: f64) -> TriangleMesh {
    let h = size / 2.0;
    box_mesh(Point3::new(-h, -h, -h), Point3::new(h, h, h))
}

/// Unit right-corner tetrahedron.
pub fn tetrahedron() -> TriangleMesh {
    TriangleMesh::new(
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ],
        vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
    )
}

/// Subdivided icosahedron projected onto a sphere.
pub fn icosphere(center: Point3<f64>, radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector3::new(v[0], v[1], v[2]).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(verts.iter().map(|v| center + v * radius).collect(), faces)
}

/// Closed cylinder with axis +z from `z0` to `z1`.
pub fn cylinder(center_xy: [f64; 2], radius: f64, z0: f64, z1: f64, segments: u32) -> TriangleMesh {
    let n = segments.max(3);
    let mut vertices = Vec::with_capacity(2 * n as usize + 2);
    for z in [z0, z1] {
        for i in 0..n {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            vertices.push(Point3::new(
                center_xy[0] + radius * a.cos(),
                center_xy[1] + radius * a.sin(),
                z,
            ));
        }
    }
    let cb = vertices.len() as u32;
    vertices.push(Point3::new(center_xy[0], center_xy[1], z0));
    vertices.push(Point3::new(center_xy[0], center_xy[1], z1));
    let ct = cb + 1;
    let mut triangles = Vec::with_capacity(4 * n as usize);
    for i in 0..n {
        let j = (i + 1) % n;
        let (bi, bj, ti, tj) = (i, j, n + i, n + j);
        triangles.push([bi, bj, tj]);
        triangles.push([bi, tj, ti]);
        triangles.push([cb, bj, bi]);
        triangles.push([ct, ti, tj]);
    }
    TriangleMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{metrics, validate};

    #[test]
    fn primitives_are_closed_and_outward() {
        for m in [
            cube(2.0),
            tetrahedron(),
            icosphere(Point3::origin(), 3.0, 2),
            cylinder([1.0, 2.0], 2.0, -1.0, 3.0, 24),
        ] {
            let d = validate(&m).unwrap();
            assert!(d.watertight, "{d:?}");
            assert!(metrics(&m).signed_volume > 0.0);
        }
    }

    #[test]
    fn icosphere_counts() {
        let s = icosphere(Point3::origin(), 1.0, 4);
        assert_eq!(s.triangles.len(), 20 * 256);
        assert_eq!(s.vertices.len(), 10 * 256 + 2);
    }
}
