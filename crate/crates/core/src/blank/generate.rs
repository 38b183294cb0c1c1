//! Blank generation: the expanded board envelope, the unexpanded window
//! with its bump collar, and cable ribbons, contoured from one analytic
//! field.

use nalgebra::{Point3, Vector3};

use super::{BlankResult, BlankSpec, Fiducial};
use crate::mesh::{Aabb, RigidTransform, TriangleMesh};
use crate::voxel::{extract_surface, sdf, ScalarField, DEFAULT_PITCH, DEFAULT_VOXEL_CAP};

/// Half side of the square ribbon section printed for a cable.
pub const RIBBON_HALF: f64 = 0.75;
/// Clearance between the window edge and the collar rim.
const COLLAR_MARGIN: f64 = 2.5;
const RIBBON_SEGMENTS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlankOptions {
    pub pitch: f64,
    pub voxel_cap: usize,
}

impl Default for BlankOptions {
    fn default() -> Self {
        BlankOptions {
            pitch: DEFAULT_PITCH,
            voxel_cap: DEFAULT_VOXEL_CAP,
        }
    }
}

/// Blank in the window frame when a window exists, otherwise in the board
/// frame.
pub fn generate_blank(spec: &BlankSpec) -> BlankResult<TriangleMesh> {
    generate_blank_with(spec, &BlankOptions::default())
}

pub fn generate_blank_with(spec: &BlankSpec, opts: &BlankOptions) -> BlankResult<TriangleMesh> {
    spec.validate()?;
    let shape = BlankShape::new(spec);
    let field = ScalarField::from_fn(&shape.bounds(), opts.pitch, 2, opts.voxel_cap, |p| shape.distance(p))?;
    Ok(extract_surface(&field).with_name("blank"))
}

struct Envelope {
    center: Point3<f64>,
    half: Vector3<f64>,
}

struct Window {
    radius: f64,
    standoff: f64,
    collar: f64,
}

/// Analytic distance bound for the blank, in the output frame.
pub(crate) struct BlankShape {
    /// Board frame to output frame; envelopes are evaluated after the inverse.
    to_output: RigidTransform,
    from_output: RigidTransform,
    expansion: f64,
    envelopes: Vec<Envelope>,
    window: Option<Window>,
    bumps: Vec<(Point3<f64>, f64)>,
    ribbons: Vec<Vec<Point3<f64>>>,
}

impl BlankShape {
    pub(crate) fn new(spec: &BlankSpec) -> Self {
        let c = &spec.circuit;
        let to_output = match c.window {
            Some(_) => c.board_to_window(),
            None => RigidTransform::identity(),
        };
        let [l, w, h] = c.board_size;
        let mut envelopes = vec![Envelope {
            center: Point3::new(0.0, 0.0, h / 2.0),
            half: Vector3::new(l, w, h) / 2.0,
        }];
        for k in &c.keepouts {
            let (a, b) = (Point3::from(k.min), Point3::from(k.max));
            envelopes.push(Envelope {
                center: nalgebra::center(&a, &b),
                half: (b - a) / 2.0,
            });
        }
        let fids = spec.fiducial_layout();
        let window = c.window.as_ref().map(|win| {
            let r = win.diameter / 2.0;
            let reach = fids.iter().map(|f| f.radius_mm + f.bump_radius + 0.5).fold(0.0, f64::max);
            Window {
                radius: r,
                standoff: win.standoff,
                collar: (r + COLLAR_MARGIN).max(reach),
            }
        });
        let bumps = fids.iter().map(|f: &Fiducial| (bump_center(f), f.bump_radius)).collect();
        let ribbons = c
            .flexible_links
            .iter()
            .map(|lk| {
                bowed_path(&Point3::from(lk.from), &Point3::from(lk.to), lk.slack_length, RIBBON_SEGMENTS)
                    .into_iter()
                    .map(|p| to_output.apply_point(&p))
                    .collect()
            })
            .collect();
        BlankShape {
            from_output: to_output.inverse(),
            to_output,
            expansion: spec.expansion,
            envelopes,
            window,
            bumps,
            ribbons,
        }
    }

    pub(crate) fn bounds(&self) -> Aabb {
        let e = self.expansion;
        let mut pts = Vec::new();
        for env in &self.envelopes {
            let h = env.half + Vector3::repeat(e);
            for s in 0..8 {
                let sign = Vector3::new(
                    if s & 1 == 0 { -1.0 } else { 1.0 },
                    if s & 2 == 0 { -1.0 } else { 1.0 },
                    if s & 4 == 0 { -1.0 } else { 1.0 },
                );
                pts.push(self.to_output.apply_point(&(env.center + h.component_mul(&sign))));
            }
        }
        if let Some(w) = &self.window {
            let r = w.collar;
            pts.push(Point3::new(-r, -r, -w.standoff));
            pts.push(Point3::new(r, r, 0.0));
        }
        for (c, r) in &self.bumps {
            pts.push(c + Vector3::repeat(*r));
            pts.push(c - Vector3::repeat(*r));
        }
        for path in &self.ribbons {
            for p in path {
                pts.push(p + Vector3::repeat(RIBBON_HALF * 1.8));
                pts.push(p - Vector3::repeat(RIBBON_HALF * 1.8));
            }
        }
        let mut b = Aabb::from_points(pts).expect("board envelope is always present");
        if self.window.is_some() {
            // nothing but bumps rises above the window face
            let top = self.bumps.iter().map(|(c, r)| c.z + r).fold(0.0, f64::max);
            b.max.z = b.max.z.min(top);
        }
        b
    }

    pub(crate) fn distance(&self, p: &Point3<f64>) -> f64 {
        let q = self.from_output.apply_point(p);
        let mut d = self
            .envelopes
            .iter()
            .map(|env| sdf::rounded_box(&Point3::from(q - env.center), &(env.half + Vector3::repeat(self.expansion)), self.expansion))
            .fold(f64::INFINITY, f64::min);
        if let Some(w) = &self.window {
            d = d.max(p.z);
            d = d.min(sdf::cylinder_z(p, w.collar, -w.standoff, 0.0));
            d = d.min(sdf::cylinder_z(p, w.radius, -w.standoff, 0.0));
        }
        for (c, r) in &self.bumps {
            d = d.min(sdf::sphere(p, c, *r));
        }
        for path in &self.ribbons {
            for s in path.windows(2) {
                d = d.min(sdf::segment_bar(p, &s[0], &s[1], RIBBON_HALF));
            }
        }
        d
    }
}

fn bump_center(f: &Fiducial) -> Point3<f64> {
    let a = f.angle_deg.to_radians();
    Point3::new(f.radius_mm * a.cos(), f.radius_mm * a.sin(), 0.0)
}

/// Circular arc from `a` to `b` of arc length `length`, bowed upward (or
/// sideways for vertical chords), as `segments + 1` points.
pub(crate) fn bowed_path(a: &Point3<f64>, b: &Point3<f64>, length: f64, segments: usize) -> Vec<Point3<f64>> {
    let chord = b - a;
    let c = chord.norm();
    let u = chord / c;
    let up = if u.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
    let n = (up - u * u.dot(&up)).normalize();
    let ratio = (c / length).min(1.0);
    if ratio > 1.0 - 1e-9 {
        return (0..=segments).map(|i| a + chord * (i as f64 / segments as f64)).collect();
    }
    // half angle x with sin(x)/x = chord/length
    let (mut lo, mut hi) = (1e-9, std::f64::consts::PI);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid.sin() / mid > ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let r = length / (2.0 * x);
    let mid = nalgebra::center(a, b);
    // circle centre below the chord so the arc bulges along n
    let centre = mid - n * (r * x.cos());
    (0..=segments)
        .map(|i| {
            let t = -x + 2.0 * x * i as f64 / segments as f64;
            centre + r * (u * t.sin() + n * t.cos())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_length_matches_slack() {
        let a = Point3::new(0.0, 0.0, 0.0);
        let b = Point3::new(10.0, 0.0, 0.0);
        for slack in [10.0, 12.0, 20.0, 30.0] {
            let p = bowed_path(&a, &b, slack, 400);
            let len: f64 = p.windows(2).map(|s| (s[1] - s[0]).norm()).sum();
            assert!((len - slack).abs() < 1e-3 * slack, "{len} vs {slack}");
            assert!((p[0] - a).norm() < 1e-9 && (p[400] - b).norm() < 1e-9);
        }
    }
}
