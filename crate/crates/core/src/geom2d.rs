//! Planar polygon helpers: orientation, containment and triangulation of
//! polygons with holes by ear clipping.
//!
//! Triangulation keeps every input vertex (collinear ones included) so the
//! result shares its boundary edges exactly with the mesh the loops came
//! from.

use nalgebra::Point2;

pub type P2 = Point2<f64>;

/// Twice the signed area; positive for counter-clockwise loops.
pub fn signed_area2(poly: &[P2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum()
}

pub fn signed_area(poly: &[P2]) -> f64 {
    0.5 * signed_area2(poly)
}

/// Even-odd containment.
pub fn point_in_polygon(p: &P2, poly: &[P2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

#[inline]
fn cross(o: &P2, a: &P2, b: &P2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Triangulates `outer` minus `holes`. Indices refer to the concatenation
/// `outer ++ holes[0] ++ holes[1] ++ ...`. Output triangles are
/// counter-clockwise regardless of input orientation.
pub fn triangulate(outer: &[P2], holes: &[Vec<P2>]) -> Vec<[usize; 3]> {
    let mut pts: Vec<P2> = outer.to_vec();
    let mut ring: Vec<usize> = (0..outer.len()).collect();
    if signed_area2(outer) < 0.0 {
        ring.reverse();
    }

    let mut hole_rings: Vec<Vec<usize>> = Vec::new();
    for h in holes {
        let base = pts.len();
        pts.extend_from_slice(h);
        let mut r: Vec<usize> = (base..base + h.len()).collect();
        if signed_area2(h) > 0.0 {
            r.reverse();
        }
        hole_rings.push(r);
    }
    // bridge holes in order of decreasing rightmost x
    hole_rings.sort_by(|a, b| {
        let ma = a.iter().map(|&i| pts[i].x).fold(f64::NEG_INFINITY, f64::max);
        let mb = b.iter().map(|&i| pts[i].x).fold(f64::NEG_INFINITY, f64::max);
        mb.total_cmp(&ma)
    });
    for hole in hole_rings {
        ring = bridge(&pts, ring, &hole);
    }
    ear_clip(&pts, ring)
}

/// Splices `hole` (clockwise) into `ring` (counter-clockwise) through a
/// mutually visible vertex pair.
fn bridge(pts: &[P2], ring: Vec<usize>, hole: &[usize]) -> Vec<usize> {
    let (hpos, &m) = hole
        .iter()
        .enumerate()
        .max_by(|a, b| pts[*a.1].x.total_cmp(&pts[*b.1].x).then(b.0.cmp(&a.0)))
        .unwrap();
    let mp = pts[m];

    // closest edge hit by the ray from M towards +x
    let n = ring.len();
    let mut best: Option<(f64, usize)> = None;
    for i in 0..n {
        let (a, b) = (pts[ring[i]], pts[ring[(i + 1) % n]]);
        if (a.y > mp.y) == (b.y > mp.y) && a.y != mp.y && b.y != mp.y {
            continue;
        }
        if a.y == b.y {
            continue;
        }
        let t = (mp.y - a.y) / (b.y - a.y);
        if !(0.0..=1.0).contains(&t) {
            continue;
        }
        let x = a.x + t * (b.x - a.x);
        if x < mp.x {
            continue;
        }
        if best.is_none_or(|(bx, _)| x < bx) {
            // candidate endpoint: the one with larger x
            let cand = if a.x > b.x { i } else { (i + 1) % n };
            best = Some((x, cand));
        }
    }
    let Some((ix, cand)) = best else {
        // hole not inside: append as separate loop (degenerate input)
        let mut out = ring;
        out.extend(hole.iter().copied());
        return out;
    };
    let ip = P2::new(ix, mp.y);
    let pp = pts[ring[cand]];

    // any reflex vertex inside triangle (M, I, P) blocks the view; pick the
    // one with the smallest angle to the ray
    let mut chosen = cand;
    let mut best_key = (f64::INFINITY, f64::INFINITY);
    let tri = if cross(&mp, &ip, &pp) >= 0.0 { [mp, ip, pp] } else { [mp, pp, ip] };
    for i in 0..n {
        if i == cand {
            continue;
        }
        let v = pts[ring[i]];
        let prev = pts[ring[(i + n - 1) % n]];
        let next = pts[ring[(i + 1) % n]];
        if cross(&prev, &v, &next) > 0.0 {
            continue;
        }
        if v.x < mp.x || !in_triangle_closed(&v, &tri[0], &tri[1], &tri[2]) {
            continue;
        }
        let d = v - mp;
        let angle = (d.y.abs() / d.norm()).asin();
        let key = (angle, d.norm_squared());
        if key < best_key {
            best_key = key;
            chosen = i;
        }
    }

    let mut out = Vec::with_capacity(ring.len() + hole.len() + 2);
    out.extend_from_slice(&ring[..=chosen]);
    for k in 0..=hole.len() {
        out.push(hole[(hpos + k) % hole.len()]);
    }
    out.push(ring[chosen]);
    out.extend_from_slice(&ring[chosen + 1..]);
    out
}

fn in_triangle_closed(p: &P2, a: &P2, b: &P2, c: &P2) -> bool {
    cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
}

fn ear_clip(pts: &[P2], ring: Vec<usize>) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(ring.len().saturating_sub(2));
    let mut poly = ring;
    let scale = poly
        .iter()
        .map(|&i| pts[i].coords.abs().max())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let eps = 1e-14 * scale * scale;

    // relaxation: 0 strict ears, 1 ignore points on the ear boundary, 2 any
    // convex-or-flat vertex, 3 anything
    let mut level = 0;
    let mut i = 0;
    let mut since_clip = 0;
    while poly.len() > 3 {
        let n = poly.len();
        let (ia, ib, ic) = ((i + n - 1) % n, i % n, (i + 1) % n);
        if is_ear(pts, &poly, ia, ib, ic, level, eps) {
            out.push([poly[ia], poly[ib], poly[ic]]);
            poly.remove(ib);
            since_clip = 0;
            level = 0;
            i = if ib == 0 { 0 } else { ib - 1 };
            continue;
        }
        i = (i + 1) % n;
        since_clip += 1;
        if since_clip > n {
            level += 1;
            since_clip = 0;
        }
    }
    if poly.len() == 3 {
        out.push([poly[0], poly[1], poly[2]]);
    }
    out
}

fn is_ear(pts: &[P2], poly: &[usize], ia: usize, ib: usize, ic: usize, level: u32, eps: f64) -> bool {
    let (a, b, c) = (pts[poly[ia]], pts[poly[ib]], pts[poly[ic]]);
    let turn = cross(&a, &b, &c);
    match level {
        0 | 1 if turn <= eps => return false,
        2 if turn < 0.0 => return false,
        3.. => return true,
        _ => {}
    }
    if level >= 2 {
        return true;
    }
    for (k, &vi) in poly.iter().enumerate() {
        if k == ia || k == ib || k == ic {
            continue;
        }
        let p = pts[vi];
        if p == a || p == b || p == c {
            continue;
        }
        let (d0, d1, d2) = (cross(&a, &b, &p), cross(&b, &c, &p), cross(&c, &a, &p));
        let inside = if level == 0 {
            d0 >= 0.0 && d1 >= 0.0 && d2 >= 0.0
        } else {
            d0 > 0.0 && d1 > 0.0 && d2 > 0.0
        };
        if inside {
            return false;
        }
    }
    true
}
