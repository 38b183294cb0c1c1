//! Exact plane clipping of closed meshes with triangulated caps.

use std::collections::{BTreeMap, HashMap};

use nalgebra::Point3;

use super::{AssemblyError, AssemblyResult};
use crate::geom2d::{self, P2};
use crate::mesh::{Plane, TriangleMesh};

/// Closed cross-section loops of a solid, in plane coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub plane: Plane,
    /// Each loop is counter-clockwise about the plane normal for outer
    /// boundaries and clockwise for holes.
    pub loops: Vec<Vec<P2>>,
}

impl Section {
    pub fn perimeter(&self, i: usize) -> f64 {
        let l = &self.loops[i];
        (0..l.len()).map(|k| (l[(k + 1) % l.len()] - l[k]).norm()).sum()
    }

    /// Index of the loop with the largest enclosed area.
    pub fn outer_loop(&self) -> Option<usize> {
        (0..self.loops.len()).max_by(|&a, &b| {
            geom2d::signed_area(&self.loops[a])
                .abs()
                .total_cmp(&geom2d::signed_area(&self.loops[b]).abs())
        })
    }

    /// Inside the material: covered by an odd number of loops.
    pub fn contains(&self, p: &P2) -> bool {
        self.loops.iter().filter(|l| geom2d::point_in_polygon(p, l)).count() % 2 == 1
    }

    /// Distance from `p` to the nearest loop edge.
    pub fn boundary_distance(&self, p: &P2) -> f64 {
        self.nearest_edge(p).map_or(f64::INFINITY, |(q, _)| (p - q).norm())
    }

    /// Closest boundary point and the unit direction of its edge.
    pub fn nearest_edge(&self, p: &P2) -> Option<(P2, nalgebra::Vector2<f64>)> {
        let mut best: Option<(f64, P2, nalgebra::Vector2<f64>)> = None;
        for l in &self.loops {
            for k in 0..l.len() {
                let (a, b) = (l[k], l[(k + 1) % l.len()]);
                let ab = b - a;
                let len2 = ab.norm_squared();
                if len2 == 0.0 {
                    continue;
                }
                let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
                let q = a + ab * t;
                let d = (p - q).norm();
                if best.is_none_or(|b| d < b.0) {
                    best = Some((d, q, ab / len2.sqrt()));
                }
            }
        }
        best.map(|(_, q, dir)| (q, dir))
    }
}

/// Splits a closed solid into the parts below (`normal · x <= offset`) and
/// above the plane, capping both along the cut.
pub fn split_by_plane(solid: &TriangleMesh, plane: &Plane) -> AssemblyResult<(TriangleMesh, TriangleMesh)> {
    let (below, above, _) = split_with_section(solid, plane)?;
    Ok((below, above))
}

/// Cross-section of `solid` by `plane`.
pub fn plane_section(solid: &TriangleMesh, plane: &Plane) -> AssemblyResult<Section> {
    Ok(split_with_section(solid, plane)?.2)
}

pub(crate) fn split_with_section(solid: &TriangleMesh, plane: &Plane) -> AssemblyResult<(TriangleMesh, TriangleMesh, Section)> {
    solid.check_indices()?;
    let scale = solid
        .bbox()
        .map(|b| b.extent().norm().max(b.min.coords.abs().max()).max(b.max.coords.abs().max()))
        .unwrap_or(1.0)
        .max(1.0);
    let snap = 1e-10 * scale;
    let d: Vec<f64> = solid
        .vertices
        .iter()
        .map(|v| {
            let x = plane.signed_distance(v);
            if x.abs() < snap { 0.0 } else { x }
        })
        .collect();
    // vertices on the plane count as below; the cut must cross the interior
    if !d.iter().any(|&x| x < 0.0) || !d.iter().any(|&x| x > 0.0) {
        return Err(AssemblyError::PlaneMiss);
    }

    let mut vertices = solid.vertices.clone();
    let mut cut: HashMap<(u32, u32), u32> = HashMap::new();
    let mut crossing = |a: u32, b: u32, vertices: &mut Vec<Point3<f64>>| -> u32 {
        // a below, b above
        if d[a as usize] == 0.0 {
            return a;
        }
        let key = (a.min(b), a.max(b));
        *cut.entry(key).or_insert_with(|| {
            let (p, q) = (key.0 as usize, key.1 as usize);
            let t = d[p] / (d[p] - d[q]);
            let x = solid.vertices[p] + (solid.vertices[q] - solid.vertices[p]) * t;
            vertices.push(x);
            (vertices.len() - 1) as u32
        })
    };

    let mut lower: Vec<[u32; 3]> = Vec::new();
    let mut upper: Vec<[u32; 3]> = Vec::new();
    for tri in &solid.triangles {
        let side = tri.map(|v| d[v as usize] > 0.0);
        if side.iter().all(|&s| !s) {
            lower.push(*tri);
            continue;
        }
        if side.iter().all(|&s| s) {
            upper.push(*tri);
            continue;
        }
        let mut lo_poly: Vec<u32> = Vec::with_capacity(4);
        let mut hi_poly: Vec<u32> = Vec::with_capacity(4);
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let (sa, sb) = (side[k], side[(k + 1) % 3]);
            if sa {
                hi_poly.push(a);
            } else {
                lo_poly.push(a);
            }
            if sa != sb {
                let x = if sa { crossing(b, a, &mut vertices) } else { crossing(a, b, &mut vertices) };
                push_distinct(&mut lo_poly, x);
                push_distinct(&mut hi_poly, x);
            }
        }
        fan(&lo_poly, &mut lower);
        fan(&hi_poly, &mut upper);
    }

    // open edges of the lower part, directed as they appear there
    let mut directed: HashMap<(u32, u32), i32> = HashMap::new();
    for t in &lower {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if a == b {
                continue;
            }
            *directed.entry((a, b)).or_default() += 1;
            *directed.entry((b, a)).or_default() -= 1;
        }
    }
    let mut open: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    let mut keys: Vec<(u32, u32)> = directed.iter().filter(|(_, &c)| c > 0).map(|(&k, _)| k).collect();
    keys.sort_unstable();
    for (a, b) in keys {
        for _ in 0..directed[&(a, b)] {
            open.entry(a).or_default().push(b);
        }
    }
    let loops = chain_loops(&mut open);

    let to2d = |i: u32| plane.to_2d(&vertices[i as usize]);
    // the lower part's boundary runs clockwise seen from +normal; the cap
    // reverses it
    let loops_2d: Vec<Vec<P2>> = loops.iter().map(|l| l.iter().rev().map(|&i| to2d(i)).collect()).collect();
    let loops_idx: Vec<Vec<u32>> = loops.iter().map(|l| l.iter().rev().copied().collect()).collect();

    let mut depth = vec![0usize; loops.len()];
    for i in 0..loops.len() {
        let probe = loop_probe(&loops_2d[i]);
        depth[i] = (0..loops.len())
            .filter(|&j| j != i && geom2d::point_in_polygon(&probe, &loops_2d[j]))
            .count();
    }
    let mut cap: Vec<[u32; 3]> = Vec::new();
    for i in 0..loops.len() {
        if depth[i] % 2 == 1 {
            continue;
        }
        let probe_holes: Vec<usize> = (0..loops.len())
            .filter(|&j| depth[j] == depth[i] + 1 && geom2d::point_in_polygon(&loop_probe(&loops_2d[j]), &loops_2d[i]))
            .collect();
        let holes: Vec<Vec<P2>> = probe_holes.iter().map(|&j| loops_2d[j].clone()).collect();
        let mut index: Vec<u32> = loops_idx[i].clone();
        for &j in &probe_holes {
            index.extend_from_slice(&loops_idx[j]);
        }
        for t in geom2d::triangulate(&loops_2d[i], &holes) {
            cap.push(t.map(|k| index[k]));
        }
    }
    for t in &cap {
        lower.push(*t);
        upper.push([t[0], t[2], t[1]]);
    }

    let section = Section {
        plane: *plane,
        loops: loops_2d
            .iter()
            .zip(&depth)
            .map(|(l, &dep)| {
                let ccw = geom2d::signed_area(l) > 0.0;
                if ccw == (dep % 2 == 0) { l.clone() } else { l.iter().rev().copied().collect() }
            })
            .collect(),
    };
    let name = solid.name.clone();
    let mut lo = compact(&vertices, &lower);
    let mut hi = compact(&vertices, &upper);
    lo.name = name.as_ref().map(|n| format!("{n}_below"));
    hi.name = name.map(|n| format!("{n}_above"));
    Ok((lo, hi, section))
}

fn push_distinct(poly: &mut Vec<u32>, v: u32) {
    if poly.last() != Some(&v) && poly.first() != Some(&v) {
        poly.push(v);
    } else if poly.is_empty() {
        poly.push(v);
    }
}

fn fan(poly: &[u32], out: &mut Vec<[u32; 3]>) {
    for k in 1..poly.len().saturating_sub(1) {
        let t = [poly[0], poly[k], poly[k + 1]];
        if t[0] != t[1] && t[1] != t[2] && t[0] != t[2] {
            out.push(t);
        }
    }
}

/// Chains directed open edges into closed loops, always taking the
/// smallest-index continuation.
fn chain_loops(open: &mut BTreeMap<u32, Vec<u32>>) -> Vec<Vec<u32>> {
    let mut loops = Vec::new();
    while let Some((&start, _)) = open.iter().find(|(_, v)| !v.is_empty()) {
        let mut l = vec![start];
        let mut cur = start;
        loop {
            let Some(nexts) = open.get_mut(&cur) else { break };
            if nexts.is_empty() {
                break;
            }
            let next = nexts.remove(0);
            if next == start {
                break;
            }
            l.push(next);
            cur = next;
        }
        open.retain(|_, v| !v.is_empty());
        if l.len() >= 3 {
            loops.push(l);
        }
    }
    loops
}

/// A point strictly inside the loop near its first edge, for nesting tests.
fn loop_probe(l: &[P2]) -> P2 {
    let ccw = geom2d::signed_area(l) > 0.0;
    let (a, b) = (l[0], l[1 % l.len()]);
    let m = nalgebra::center(&a, &b);
    let t = b - a;
    let n = if ccw { nalgebra::Vector2::new(-t.y, t.x) } else { nalgebra::Vector2::new(t.y, -t.x) };
    let len = n.norm().max(f64::MIN_POSITIVE);
    m + n / len * (1e-6 * t.norm()).max(1e-9)
}

fn compact(vertices: &[Point3<f64>], triangles: &[[u32; 3]]) -> TriangleMesh {
    let mut map = vec![u32::MAX; vertices.len()];
    let mut out_v = Vec::new();
    let mut out_t = Vec::with_capacity(triangles.len());
    for t in triangles {
        out_t.push(t.map(|v| {
            let m = &mut map[v as usize];
            if *m == u32::MAX {
                *m = out_v.len() as u32;
                out_v.push(vertices[v as usize]);
            }
            *m
        }));
    }
    TriangleMesh::new(out_v, out_t)
}
