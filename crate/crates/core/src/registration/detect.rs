//! Best-effort automatic bump finder. Manual points remain the primary
//! input; this only saves the clicks when the scan is clean.

use nalgebra::{DMatrix, DVector, Point3, Vector3};

use super::{fit_plane, FiducialObservation, ObservationSource, RegistrationError, RegistrationResult};
use crate::mesh::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub bump_radius: f64,
    /// Candidates must rise at least this fraction of the bump radius.
    pub min_height_fraction: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            bump_radius: 1.0,
            min_height_fraction: 0.5,
        }
    }
}

pub fn detect_fiducials(scan: &TriangleMesh, hint_center: &Point3<f64>, hint_radius: f64) -> RegistrationResult<FiducialObservation> {
    detect_fiducials_with(scan, hint_center, hint_radius, &DetectOptions::default())
}

/// Finds three bump apexes within `hint_radius` of `hint_center`, sorted by
/// angle about the local plane normal.
pub fn detect_fiducials_with(
    scan: &TriangleMesh,
    hint_center: &Point3<f64>,
    hint_radius: f64,
    opts: &DetectOptions,
) -> RegistrationResult<FiducialObservation> {
    let r = opts.bump_radius;
    let idx: Vec<usize> = (0..scan.vertices.len())
        .filter(|&i| (scan.vertices[i] - hint_center).norm() <= hint_radius)
        .collect();
    if idx.len() < 3 {
        return Err(RegistrationError::DetectionFailed { found: 0 });
    }
    let pts: Vec<Point3<f64>> = idx.iter().map(|&i| scan.vertices[i]).collect();

    // outward side from the area-weighted normals of faces in the ball
    let outward: Vector3<f64> = (0..scan.triangles.len())
        .filter(|&t| {
            let c = scan.corners(t);
            (Point3::from((c[0].coords + c[1].coords + c[2].coords) / 3.0) - hint_center).norm() <= hint_radius
        })
        .map(|t| scan.area_vector(t))
        .sum();
    let outward = (outward.norm() > 0.0).then_some(outward);

    // refit without the bumps so they do not lift the base plane
    let mut plane = fit_plane(&pts, outward.as_ref()).map_err(|_| RegistrationError::DetectionFailed { found: 0 })?;
    for _ in 0..3 {
        let base: Vec<Point3<f64>> = pts.iter().filter(|p| plane.signed_distance(p).abs() < 0.25 * r).copied().collect();
        if base.len() < 3 {
            break;
        }
        match fit_plane(&base, Some(&plane.normal)) {
            Ok(p) => plane = p,
            Err(_) => break,
        }
    }

    let mut order: Vec<usize> = (0..pts.len()).collect();
    let heights: Vec<f64> = pts.iter().map(|p| plane.signed_distance(p)).collect();
    order.sort_by(|&a, &b| heights[b].total_cmp(&heights[a]).then(a.cmp(&b)));
    let mut peaks: Vec<usize> = Vec::new();
    for &i in &order {
        if heights[i] < opts.min_height_fraction * r {
            break;
        }
        if peaks.iter().all(|&k| (pts[k] - pts[i]).norm() > 2.0 * r) {
            peaks.push(i);
        }
    }
    if peaks.len() < 3 {
        return Err(RegistrationError::DetectionFailed { found: peaks.len() });
    }
    peaks.truncate(3);

    let n = plane.normal;
    let mut apexes: Vec<Point3<f64>> = peaks.iter().map(|&i| refine_apex(&pts, &heights, &pts[i], &n, r)).collect();

    let centre = Point3::from(apexes.iter().map(|p| p.coords).sum::<Vector3<f64>>() / 3.0);
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = n.cross(&helper).normalize();
    let e2 = n.cross(&e1);
    apexes.sort_by(|a, b| {
        let (da, db) = (a - centre, b - centre);
        da.dot(&e2).atan2(da.dot(&e1)).total_cmp(&db.dot(&e2).atan2(db.dot(&e1)))
    });
    FiducialObservation::new([apexes[0], apexes[1], apexes[2]], ObservationSource::Detected)
}

/// Sphere fit to the cap around a peak; the apex is the top of the fitted
/// sphere along the plane normal. Falls back to the peak vertex.
fn refine_apex(pts: &[Point3<f64>], heights: &[f64], peak: &Point3<f64>, n: &Vector3<f64>, r: f64) -> Point3<f64> {
    let cap: Vec<&Point3<f64>> = pts
        .iter()
        .zip(heights)
        .filter(|(p, &h)| h > 0.2 * r && {
            let d = *p - peak;
            (d - n * d.dot(n)).norm() < 1.2 * r
        })
        .map(|(p, _)| p)
        .collect();
    if cap.len() < 8 {
        return *peak;
    }
    // |p|² = 2 c·p + k, linear in (c, k); centred on the peak for conditioning
    let mut a = DMatrix::zeros(cap.len(), 4);
    let mut b = DVector::zeros(cap.len());
    for (row, p) in cap.iter().enumerate() {
        let d = *p - peak;
        a[(row, 0)] = 2.0 * d.x;
        a[(row, 1)] = 2.0 * d.y;
        a[(row, 2)] = 2.0 * d.z;
        a[(row, 3)] = 1.0;
        b[row] = d.norm_squared();
    }
    let Ok(sol) = a.svd(true, true).solve(&b, 1e-12) else {
        return *peak;
    };
    let c = Vector3::new(sol[0], sol[1], sol[2]);
    let rad2 = sol[3] + c.norm_squared();
    if !(rad2 > 0.0) {
        return *peak;
    }
    let rad = rad2.sqrt();
    if !(rad > 0.3 * r && rad < 3.0 * r) {
        return *peak;
    }
    peak + c + n * rad
}
