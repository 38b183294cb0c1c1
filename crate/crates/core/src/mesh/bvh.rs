use nalgebra::{Point3, Vector3};

use super::{closest_point_on_triangle, Aabb, TriangleMesh};

const LEAF_SIZE: usize = 4;

/// Ray/triangle intersection record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Ray parameter; the hit point is `origin + t * dir`.
    pub t: f64,
    pub triangle: usize,
    pub point: Point3<f64>,
    /// True when the ray crosses from outside to inside (against the normal).
    pub entering: bool,
}

#[derive(Debug, Clone)]
struct Node {
    bbox: Aabb,
    /// Leaf: range into `order`. Inner: `left` child index, right is `left + 1`.
    start: u32,
    count: u32,
    left: u32,
}

/// Bounding-volume hierarchy over a mesh's triangles for ray casts and
/// nearest-point queries.
#[derive(Debug, Clone)]
pub struct Bvh {
    tris: Vec<[Point3<f64>; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Bvh {
        let tris: Vec<[Point3<f64>; 3]> = (0..mesh.triangles.len()).map(|t| mesh.corners(t)).collect();
        let centroids: Vec<Point3<f64>> = tris
            .iter()
            .map(|[a, b, c]| Point3::from((a.coords + b.coords + c.coords) / 3.0))
            .collect();
        let boxes: Vec<Aabb> = tris.iter().map(|t| Aabb::from_points(t.iter().copied()).unwrap()).collect();
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            nodes.push(Node {
                bbox: boxes[0],
                start: 0,
                count: 0,
                left: 0,
            });
            split(&mut nodes, 0, &mut order, 0, &boxes, &centroids);
        }
        Bvh { tris, order, nodes }
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    pub fn bbox(&self) -> Option<Aabb> {
        self.nodes.first().map(|n| n.bbox)
    }

    /// Closest surface point to `p`: (distance, point, triangle).
    pub fn nearest(&self, p: &Point3<f64>) -> Option<(f64, Point3<f64>, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, Point3::origin(), usize::MAX);
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            let d = node.bbox.distance(p);
            if d * d >= best.0 {
                continue;
            }
            if node.count > 0 {
                for &ti in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    let [a, b, c] = &self.tris[ti as usize];
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d2 = (q - p).norm_squared();
                    if d2 < best.0 || (d2 == best.0 && (ti as usize) < best.2) {
                        best = (d2, q, ti as usize);
                    }
                }
            } else {
                let (l, r) = (node.left, node.left + 1);
                let dl = self.nodes[l as usize].bbox.distance(p);
                let dr = self.nodes[r as usize].bbox.distance(p);
                // nearer child popped first
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        Some((best.0.sqrt(), best.1, best.2))
    }

    /// Every hit with `0 < t <= t_max`, sorted by `t` then triangle index.
    pub fn ray_hits(&self, origin: &Point3<f64>, dir: &Vector3<f64>, t_max: f64) -> Vec<RayHit> {
        let mut hits = Vec::new();
        self.traverse(origin, dir, t_max, &mut |hit| {
            hits.push(hit);
            t_max
        });
        hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.triangle.cmp(&b.triangle)));
        hits
    }

    /// Nearest hit with `0 < t <= t_max`.
    pub fn first_hit(&self, origin: &Point3<f64>, dir: &Vector3<f64>, t_max: f64) -> Option<RayHit> {
        let mut best: Option<RayHit> = None;
        self.traverse(origin, dir, t_max, &mut |hit| {
            let better = match &best {
                None => true,
                Some(b) => hit.t < b.t || (hit.t == b.t && hit.triangle < b.triangle),
            };
            if better {
                best = Some(hit);
            }
            best.as_ref().map_or(t_max, |b| b.t)
        });
        best
    }

    /// Calls `visit` for each hit; the returned value shrinks the search range.
    fn traverse(
        &self,
        origin: &Point3<f64>,
        dir: &Vector3<f64>,
        t_max: f64,
        visit: &mut dyn FnMut(RayHit) -> f64,
    ) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut limit = t_max;
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if !slab_test(&node.bbox, origin, &inv, limit) {
                continue;
            }
            if node.count > 0 {
                for &ti in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    let [a, b, c] = &self.tris[ti as usize];
                    if let Some((t, entering)) = intersect(origin, dir, a, b, c) {
                        if t > 0.0 && t <= limit {
                            limit = visit(RayHit {
                                t,
                                triangle: ti as usize,
                                point: origin + dir * t,
                                entering,
                            });
                        }
                    }
                }
            } else {
                stack.push(node.left + 1);
                stack.push(node.left);
            }
        }
    }
}

fn split(nodes: &mut Vec<Node>, ni: usize, order: &mut [u32], start: usize, boxes: &[Aabb], centroids: &[Point3<f64>]) {
    let mut bbox = boxes[order[0] as usize];
    let mut cbox = Aabb::new(centroids[order[0] as usize], centroids[order[0] as usize]);
    for &t in order.iter() {
        bbox = bbox.union(&boxes[t as usize]);
        cbox.include(&centroids[t as usize]);
    }
    nodes[ni].bbox = bbox;
    let ext = cbox.extent();
    if order.len() <= LEAF_SIZE || ext.max() <= 0.0 {
        nodes[ni].start = start as u32;
        nodes[ni].count = order.len() as u32;
        return;
    }
    let axis = ext.imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let left = nodes.len();
    let blank = Node {
        bbox,
        start: 0,
        count: 0,
        left: 0,
    };
    nodes.push(blank.clone());
    nodes.push(blank);
    nodes[ni].left = left as u32;
    let (lo, hi) = order.split_at_mut(mid);
    split(nodes, left, lo, start, boxes, centroids);
    split(nodes, left + 1, hi, start + mid, boxes, centroids);
}

fn slab_test(b: &Aabb, origin: &Point3<f64>, inv: &Vector3<f64>, t_max: f64) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = t_max;
    for i in 0..3 {
        let mut ta = (b.min[i] - origin[i]) * inv[i];
        let mut tb = (b.max[i] - origin[i]) * inv[i];
        if ta.is_nan() || tb.is_nan() {
            // origin on a slab plane with a zero direction component
            if origin[i] < b.min[i] || origin[i] > b.max[i] {
                return false;
            }
            continue;
        }
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 * (1.0 + 4.0 * f64::EPSILON) + 1e-12 {
            return false;
        }
    }
    true
}

/// Möller–Trumbore, two-sided. Returns `(t, entering)`.
fn intersect(
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> Option<(f64, bool)> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 * e1.norm() * e2.norm() * dir.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    Some((t, det > 0.0))
}
