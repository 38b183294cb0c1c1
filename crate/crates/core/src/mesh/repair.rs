use std::collections::{HashMap, VecDeque};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::metrics::solid_angle;
use super::{TriangleMesh, DEFAULT_DEGENERATE_AREA};

/// Default vertex weld distance (mm).
pub const DEFAULT_WELD_EPSILON: f64 = 1e-4;

/// Above this many components the nesting test is skipped and every
/// component is oriented with positive volume.
const MAX_NESTING_COMPONENTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairOptions {
    pub weld_epsilon: f64,
    pub degenerate_area: f64,
}

impl Default for RepairOptions {
    fn default() -> Self {
        Self {
            weld_epsilon: DEFAULT_WELD_EPSILON,
            degenerate_area: DEFAULT_DEGENERATE_AREA,
        }
    }
}

pub fn repair_basic(mesh: &TriangleMesh, weld_epsilon: f64) -> TriangleMesh {
    repair_with(
        mesh,
        &RepairOptions {
            weld_epsilon,
            ..RepairOptions::default()
        },
    )
}

/// Best-effort cleanup: weld, remove degenerate and cancelling triangles,
/// drop unreferenced vertices, unify orientation per component.
///
/// Components are oriented so that outer surfaces have positive volume and
/// surfaces nested inside an odd number of others (cavities) have negative
/// volume. The result is a fixed point: repairing it again changes nothing.
pub fn repair_with(mesh: &TriangleMesh, opts: &RepairOptions) -> TriangleMesh {
    let n = mesh.vertices.len();
    let mut tris: Vec<[u32; 3]> = mesh
        .triangles
        .iter()
        .copied()
        .filter(|t| t.iter().all(|&i| (i as usize) < n))
        .collect();

    let remap = weld(&mesh.vertices, opts.weld_epsilon.max(0.0));
    for t in &mut tris {
        for i in t.iter_mut() {
            *i = remap[*i as usize];
        }
    }
    tris.retain(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2]);

    let tris = collapse_degenerate(&mesh.vertices, tris, opts.degenerate_area);
    let tris = drop_cancelling_pairs(tris);
    let (vertices, mut tris) = compact(&mesh.vertices, tris);

    orient(&vertices, &mut tris);

    TriangleMesh {
        vertices,
        triangles: tris,
        name: mesh.name.clone(),
    }
}

/// Greedy weld: each vertex maps to the first earlier representative within
/// `eps`, otherwise becomes a representative. Representatives are pairwise
/// farther apart than `eps`.
fn weld(vertices: &[Point3<f64>], eps: f64) -> Vec<u32> {
    let mut remap = Vec::with_capacity(vertices.len());
    if eps <= 0.0 {
        // exact duplicates only
        let mut seen: HashMap<[u64; 3], u32> = HashMap::new();
        for (i, v) in vertices.iter().enumerate() {
            let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
            remap.push(*seen.entry(key).or_insert(i as u32));
        }
        return remap;
    }
    let cell = |v: &Point3<f64>| -> [i64; 3] { [0, 1, 2].map(|k| (v[k] / eps).floor() as i64) };
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    let eps2 = eps * eps;
    for (i, v) in vertices.iter().enumerate() {
        let c = cell(v);
        let mut found: Option<u32> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let key = [c[0] + dx, c[1] + dy, c[2] + dz];
                    if let Some(reps) = grid.get(&key) {
                        for &r in reps {
                            if (vertices[r as usize] - v).norm_squared() <= eps2
                                && found.is_none_or(|f| r < f)
                            {
                                found = Some(r);
                            }
                        }
                    }
                }
            }
        }
        match found {
            Some(r) => remap.push(r),
            None => {
                grid.entry(c).or_default().push(i as u32);
                remap.push(i as u32);
            }
        }
    }
    remap
}

fn area(vertices: &[Point3<f64>], t: &[u32; 3]) -> f64 {
    let [a, b, c] = t.map(|i| vertices[i as usize]);
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Collapses the shortest edge of each degenerate triangle into its
/// lower-index endpoint until none remain (or progress stalls), then drops
/// whatever is still degenerate.
fn collapse_degenerate(vertices: &[Point3<f64>], mut tris: Vec<[u32; 3]>, min_area: f64) -> Vec<[u32; 3]> {
    for _ in 0..16 {
        let mut target: Vec<u32> = (0..vertices.len() as u32).collect();
        let mut changed = false;
        for t in &tris {
            if area(vertices, t) >= min_area {
                continue;
            }
            let mut best = (f64::INFINITY, 0, 0);
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let len = (vertices[a as usize] - vertices[b as usize]).norm_squared();
                if len < best.0 {
                    best = (len, a.min(b), a.max(b));
                }
            }
            let (lo, hi) = (resolve(&mut target, best.1), resolve(&mut target, best.2));
            if lo != hi {
                let (lo, hi) = (lo.min(hi), lo.max(hi));
                target[hi as usize] = lo;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for t in &mut tris {
            for i in t.iter_mut() {
                *i = resolve(&mut target, *i);
            }
        }
        tris.retain(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2]);
    }
    tris.retain(|t| area(vertices, t) >= min_area);
    tris
}

fn resolve(target: &mut [u32], mut i: u32) -> u32 {
    while target[i as usize] != i {
        let next = target[i as usize];
        target[i as usize] = target[next as usize];
        i = next;
    }
    i
}

/// Removes pairs of triangles over the same three vertices with opposite
/// winding (zero-volume fins left behind by welding or collapse), and exact
/// duplicates beyond the first.
fn drop_cancelling_pairs(tris: Vec<[u32; 3]>) -> Vec<[u32; 3]> {
    let canonical = |t: &[u32; 3]| -> ([u32; 3], bool) {
        // rotate so the smallest index leads; parity tells winding
        let k = (0..3).min_by_key(|&k| t[k]).unwrap();
        let r = [t[k], t[(k + 1) % 3], t[(k + 2) % 3]];
        if r[1] < r[2] {
            (r, true)
        } else {
            ([r[0], r[2], r[1]], false)
        }
    };
    let mut groups: HashMap<[u32; 3], (Vec<usize>, Vec<usize>)> = HashMap::new();
    for (i, t) in tris.iter().enumerate() {
        let (key, pos) = canonical(t);
        let g = groups.entry(key).or_default();
        if pos {
            g.0.push(i);
        } else {
            g.1.push(i);
        }
    }
    let mut keep = vec![true; tris.len()];
    for (pos, neg) in groups.values() {
        let cancel = pos.len().min(neg.len());
        for &i in pos.iter().take(cancel).chain(neg.iter().take(cancel)) {
            keep[i] = false;
        }
        let (rest, start) = if pos.len() > neg.len() { (pos, cancel) } else { (neg, cancel) };
        for &i in rest.iter().skip(start + 1) {
            keep[i] = false;
        }
    }
    tris.into_iter().zip(keep).filter_map(|(t, k)| k.then_some(t)).collect()
}

/// Drops unreferenced vertices, preserving the order of those that remain.
fn compact(vertices: &[Point3<f64>], mut tris: Vec<[u32; 3]>) -> (Vec<Point3<f64>>, Vec<[u32; 3]>) {
    let mut used = vec![false; vertices.len()];
    for t in &tris {
        for &i in t {
            used[i as usize] = true;
        }
    }
    let mut new_index = vec![u32::MAX; vertices.len()];
    let mut out = Vec::new();
    for (i, v) in vertices.iter().enumerate() {
        if used[i] {
            new_index[i] = out.len() as u32;
            out.push(*v);
        }
    }
    for t in &mut tris {
        for i in t.iter_mut() {
            *i = new_index[*i as usize];
        }
    }
    (out, tris)
}

/// Makes winding consistent across manifold edges within each edge-connected
/// component, then flips whole components to the sign their nesting depth
/// calls for.
fn orient(vertices: &[Point3<f64>], tris: &mut [[u32; 3]]) {
    let mut edge_tris: HashMap<(u32, u32), Vec<u32>> = HashMap::with_capacity(tris.len() * 2);
    for (ti, t) in tris.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            edge_tris.entry((a.min(b), a.max(b))).or_default().push(ti as u32);
        }
    }
    let areas: Vec<f64> = tris.iter().map(|t| area(vertices, t)).collect();

    // Edge-connected components, each listed in ascending triangle order.
    let mut comp = vec![u32::MAX; tris.len()];
    let mut components: Vec<Vec<u32>> = Vec::new();
    for seed in 0..tris.len() {
        if comp[seed] != u32::MAX {
            continue;
        }
        let id = components.len() as u32;
        let mut members = vec![seed as u32];
        comp[seed] = id;
        let mut stack = vec![seed as u32];
        while let Some(ti) = stack.pop() {
            let t = tris[ti as usize];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                for &nb in &edge_tris[&(a.min(b), a.max(b))] {
                    if comp[nb as usize] == u32::MAX {
                        comp[nb as usize] = id;
                        members.push(nb);
                        stack.push(nb);
                    }
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }

    let mut visited = vec![false; tris.len()];
    for members in &components {
        let start = *members
            .iter()
            .max_by(|&&a, &&b| areas[a as usize].total_cmp(&areas[b as usize]).then(b.cmp(&a)))
            .unwrap();
        visited[start as usize] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(ti) = queue.pop_front() {
            let t = tris[ti as usize];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let sharing = &edge_tris[&(a.min(b), a.max(b))];
                if sharing.len() != 2 {
                    continue;
                }
                let nb = if sharing[0] == ti { sharing[1] } else { sharing[0] };
                if nb == ti || visited[nb as usize] {
                    continue;
                }
                visited[nb as usize] = true;
                let n = &mut tris[nb as usize];
                let same_direction = (0..3).any(|j| n[j] == a && n[(j + 1) % 3] == b);
                if same_direction {
                    n.swap(1, 2);
                }
                queue.push_back(nb);
            }
        }
    }

    let volumes: Vec<f64> = components
        .iter()
        .map(|m| {
            m.iter()
                .map(|&ti| {
                    let [a, b, c] = tris[ti as usize].map(|i| vertices[i as usize]);
                    a.coords.dot(&b.coords.cross(&c.coords))
                })
                .sum::<f64>()
                / 6.0
        })
        .collect();

    let depth = nesting_depths(vertices, tris, &components, &volumes);
    for (ci, members) in components.iter().enumerate() {
        let want_negative = depth[ci] % 2 == 1;
        let v = volumes[ci];
        if (want_negative && v > 0.0) || (!want_negative && v < 0.0) {
            for &ti in members {
                tris[ti as usize].swap(1, 2);
            }
        }
    }
}

/// Number of other closed components enclosing each component, judged by the
/// winding number of one of its vertices.
fn nesting_depths(vertices: &[Point3<f64>], tris: &[[u32; 3]], components: &[Vec<u32>], volumes: &[f64]) -> Vec<usize> {
    let c = components.len();
    if c < 2 || c > MAX_NESTING_COMPONENTS {
        return vec![0; c];
    }
    let probes: Vec<Point3<f64>> = components
        .iter()
        .map(|m| vertices[tris[m[0] as usize][0] as usize])
        .collect();
    let mut depth = vec![0; c];
    for (i, probe) in probes.iter().enumerate() {
        for (j, members) in components.iter().enumerate() {
            if i == j || volumes[j] == 0.0 {
                continue;
            }
            let mut w = 0.0;
            for &ti in members {
                let [a, b, cc] = tris[ti as usize].map(|k| vertices[k as usize]);
                w += solid_angle(&(a - probe), &(b - probe), &(cc - probe));
            }
            let w = w / (4.0 * std::f64::consts::PI);
            if w.abs() > 0.5 {
                depth[i] += 1;
            }
        }
    }
    depth
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{metrics, primitives, signed_volume, validate};

    fn cube_with_duplicate_corner() -> TriangleMesh {
        let mut cube = primitives::cube(10.0);
        // split vertex 0 into a near-coincident twin used by one triangle
        let twin = cube.vertices[0] + nalgebra::Vector3::new(1e-6, 0.0, 0.0);
        cube.vertices.push(twin);
        let idx = cube.triangles.iter().position(|t| t.contains(&0)).unwrap();
        for i in cube.triangles[idx].iter_mut() {
            if *i == 0 {
                *i = 8;
            }
        }
        cube
    }

    #[test]
    fn welds_near_coincident_vertices() {
        let cube = cube_with_duplicate_corner();
        assert!(!validate(&cube).unwrap().watertight);
        let fixed = repair_basic(&cube, DEFAULT_WELD_EPSILON);
        assert_eq!(fixed.vertices.len(), 8);
        assert_eq!(fixed.triangles.len(), 12);
        assert!(validate(&fixed).unwrap().watertight);
    }

    #[test]
    fn clean_cube_unchanged() {
        let cube = primitives::cube(10.0);
        assert_eq!(repair_basic(&cube, DEFAULT_WELD_EPSILON), cube);
    }

    #[test]
    fn inside_out_cube_is_reoriented() {
        let fixed = repair_basic(&primitives::cube(1.0).flipped(), DEFAULT_WELD_EPSILON);
        assert!((signed_volume(&fixed) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_flipped_triangle_fixed() {
        let mut cube = primitives::cube(2.0);
        cube.triangles[3].swap(1, 2);
        let fixed = repair_basic(&cube, DEFAULT_WELD_EPSILON);
        let d = validate(&fixed).unwrap();
        assert!(d.watertight);
        assert!((signed_volume(&fixed) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_needle_collapsed() {
        // square split into two triangles plus a needle sliver on one side
        let mut m = primitives::cube(1.0);
        let n = m.vertices.len() as u32;
        m.vertices.push(m.vertices[0] + nalgebra::Vector3::new(0.0, 0.0, 1e-9));
        m.triangles.push([0, n, 1]);
        let fixed = repair_basic(&m, 1e-12);
        assert_eq!(validate(&fixed).unwrap().degenerate_triangle_count, 0);
        assert_eq!(fixed.triangles.len(), 12);
    }

    #[test]
    fn hollow_shell_keeps_cavity_negative() {
        let outer = primitives::cube(10.0);
        let inner = primitives::cube(6.0);
        // both components outward: repair must flip the inner one
        let fixed = repair_basic(&outer.merged(&inner), DEFAULT_WELD_EPSILON);
        let v = metrics(&fixed).signed_volume;
        assert!((v - (1000.0 - 216.0)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn idempotent_on_messy_input() {
        let mut m = cube_with_duplicate_corner().merged(&primitives::tetrahedron().flipped());
        m.triangles[1].swap(0, 1);
        let once = repair_basic(&m, DEFAULT_WELD_EPSILON);
        assert_eq!(repair_basic(&once, DEFAULT_WELD_EPSILON), once);
    }
}
