//! Shape descriptor: the integrated path resampled to evenly spaced points
//! by arc length, moved to start at the origin and scaled so the longer
//! side of its bounding box is 1.

use crate::stroke::Stroke;
use crate::{GestureError, GestureResult};

pub const FEATURE_POINTS: usize = 16;
pub const FEATURE_DIM: usize = 2 * FEATURE_POINTS;

/// Descriptor of a stroke, `x0 y0 x1 y1 ...`.
pub fn featurize(stroke: &Stroke) -> GestureResult<Vec<f64>> {
    stroke.check()?;
    featurize_path(&stroke.path())
}

/// Descriptor of a polyline.
pub fn featurize_path(path: &[[f64; 2]]) -> GestureResult<Vec<f64>> {
    let pts = resample(path, FEATURE_POINTS)?;
    let o = pts[0];
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pts {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let side = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    if !(side > 0.0) {
        return Err(GestureError::ZeroLengthPath);
    }
    Ok(pts.iter().flat_map(|p| [(p[0] - o[0]) / side, (p[1] - o[1]) / side]).collect())
}

/// `n` points evenly spaced along the polyline, both ends included.
pub fn resample(path: &[[f64; 2]], n: usize) -> GestureResult<Vec<[f64; 2]>> {
    let seg = |i: usize| {
        let (a, b) = (path[i], path[i + 1]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    };
    let total: f64 = (0..path.len().saturating_sub(1)).map(seg).sum();
    if !(total > 0.0) || n < 2 {
        return Err(GestureError::ZeroLengthPath);
    }
    let mut out = Vec::with_capacity(n);
    out.push(path[0]);
    let mut i = 0;
    let mut walked = 0.0;
    for k in 1..n - 1 {
        let target = total * k as f64 / (n - 1) as f64;
        while i + 2 < path.len() && walked + seg(i) < target {
            walked += seg(i);
            i += 1;
        }
        let l = seg(i);
        let t = if l > 0.0 { ((target - walked) / l).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (path[i], path[i + 1]);
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    out.push(path[path.len() - 1]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stroke::FlowSample;

    fn stroke(deltas: &[(i32, i32)], dt: u64) -> Stroke {
        Stroke::new(deltas.iter().enumerate().map(|(k, &(dx, dy))| FlowSample::new(dx, dy, (k as u64 + 1) * dt)).collect())
            .unwrap()
    }

    #[test]
    fn straight_right_ends_at_unit_x() {
        let f = featurize(&stroke(&[(5, 0); 10], 10)).unwrap();
        assert_eq!(f.len(), FEATURE_DIM);
        for k in 0..FEATURE_POINTS {
            assert!((f[2 * k] - k as f64 / 15.0).abs() < 1e-12);
            assert_eq!(f[2 * k + 1], 0.0);
        }
        assert_eq!(&f[30..], &[1.0, 0.0]);
    }

    #[test]
    fn time_scale_does_not_matter() {
        let d = [(3, 1), (4, 2), (0, 5), (-2, 3), (-4, 0)];
        assert_eq!(featurize(&stroke(&d, 20)).unwrap(), featurize(&stroke(&d, 10)).unwrap());
    }

    #[test]
    fn still_stroke_has_no_path() {
        assert!(matches!(featurize(&stroke(&[(0, 0); 6], 10)), Err(GestureError::ZeroLengthPath)));
    }

    #[test]
    fn circle_matches_denser_sampling() {
        let circle = |n: usize| -> Vec<[f64; 2]> {
            (0..=n)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    [50.0 * a.sin(), 50.0 * (1.0 - a.cos())]
                })
                .collect()
        };
        let a = featurize_path(&circle(200)).unwrap();
        let b = featurize_path(&circle(400)).unwrap();
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }
}
