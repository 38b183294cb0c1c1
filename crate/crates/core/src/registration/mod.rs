//! Recovering the embedded board's pose in a scan from the three fiducial
//! bumps on its window.
//!
//! Poses map window-frame coordinates into scan coordinates. The layout's
//! reference points are the bump apexes, which is what a user clicks and
//! what the detector reports.

mod detect;

use nalgebra::{Matrix3, Point3, Vector3, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blank::{triangle_sides, CircuitSpec, SIDE_SEPARATION};
pub use crate::mesh::Plane;
use crate::mesh::RigidTransform;

pub use detect::{detect_fiducials, detect_fiducials_with, DetectOptions};

/// Minimum area (mm²) of the observed triangle.
pub const MIN_TRIANGLE_AREA: f64 = 1.0;
pub const MAX_RESIDUAL_RMS: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistrationError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("ambiguous correspondence: triangle sides {sides:?} are not separated by {SIDE_SEPARATION} mm")]
    AmbiguousCorrespondence { sides: [f64; 3] },
    #[error("fit residual {rms:.3} mm exceeds {limit} mm; check the picked points")]
    HighResidual { rms: f64, limit: f64 },
    #[error("fiducial detection found {found} of 3 bumps")]
    DetectionFailed { found: usize },
    #[error("points file line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type RegistrationResult<T> = Result<T, RegistrationError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSource {
    Manual,
    Detected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiducialObservation {
    pub points: [Point3<f64>; 3],
    pub source: ObservationSource,
}

impl FiducialObservation {
    pub fn new(points: [Point3<f64>; 3], source: ObservationSource) -> RegistrationResult<Self> {
        let obs = FiducialObservation { points, source };
        obs.check()?;
        Ok(obs)
    }

    pub fn check(&self) -> RegistrationResult<()> {
        let p = &self.points;
        if p.iter().any(|q| !q.coords.iter().all(|v| v.is_finite())) {
            return Err(RegistrationError::DegenerateInput("non-finite point".into()));
        }
        let area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
        if area <= MIN_TRIANGLE_AREA {
            return Err(RegistrationError::DegenerateInput(format!(
                "fiducial triangle area {area:.4} mm² is not above {MIN_TRIANGLE_AREA} mm²"
            )));
        }
        Ok(())
    }
}

/// Exact plane through three points, least squares for more. The normal
/// is flipped to agree with `outward` when given; otherwise it follows the
/// right-hand order of the first three points.
pub fn fit_plane(points: &[Point3<f64>], outward: Option<&Vector3<f64>>) -> RegistrationResult<Plane> {
    if points.len() < 3 {
        return Err(RegistrationError::DegenerateInput(format!("need 3 points, got {}", points.len())));
    }
    let centroid = Point3::from(points.iter().map(|p| p.coords).sum::<Vector3<f64>>() / points.len() as f64);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    if !(eig.eigenvalues[order[1]] > 1e-12 * eig.eigenvalues[order[2]]) {
        return Err(RegistrationError::DegenerateInput("points are collinear".into()));
    }
    let mut normal = if points.len() == 3 {
        (points[1] - points[0]).cross(&(points[2] - points[0]))
    } else {
        eig.eigenvectors.column(order[0]).into_owned()
    };
    normal.normalize_mut();
    let reference = match outward {
        Some(o) => *o,
        None => (points[1] - points[0]).cross(&(points[2] - points[0])),
    };
    if normal.dot(&reference) < 0.0 {
        normal = -normal;
    }
    Ok(Plane {
        normal,
        offset: normal.dot(&centroid.coords),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    /// Window frame to scan frame.
    pub pose: RigidTransform,
    /// RMS distance (mm) between posed reference points and observations.
    pub residual_rms: f64,
    /// `correspondence[i]` is the observed point matched to reference `i`.
    pub correspondence: [usize; 3],
}

/// Matches observed points to `reference` by side lengths and solves the
/// least-squares rigid motion in closed form.
pub fn pose_from_fiducials(obs: &FiducialObservation, reference: &[Point3<f64>]) -> RegistrationResult<Registration> {
    obs.check()?;
    if reference.len() != 3 {
        return Err(RegistrationError::DegenerateInput(format!(
            "layout has {} fiducials, need 3",
            reference.len()
        )));
    }
    let sides = triangle_sides(reference);
    for i in 0..3 {
        for j in i + 1..3 {
            if (sides[i] - sides[j]).abs() < SIDE_SEPARATION {
                return Err(RegistrationError::AmbiguousCorrespondence { sides });
            }
        }
    }
    let observed = triangle_sides(&obs.points);
    // side i is opposite point i, so a point permutation permutes sides alike
    let correspondence = PERMUTATIONS
        .iter()
        .map(|perm| {
            let cost: f64 = (0..3).map(|i| (sides[i] - observed[perm[i]]).powi(2)).sum();
            (cost, *perm)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, p)| p)
        .unwrap();
    let matched = correspondence.map(|k| obs.points[k]);
    let pose = kabsch(reference, &matched);
    let residual_rms = rms(&pose, reference, &matched);
    if residual_rms > MAX_RESIDUAL_RMS {
        return Err(RegistrationError::HighResidual {
            rms: residual_rms,
            limit: MAX_RESIDUAL_RMS,
        });
    }
    Ok(Registration {
        pose,
        residual_rms,
        correspondence,
    })
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn rms(pose: &RigidTransform, from: &[Point3<f64>], to: &[Point3<f64>]) -> f64 {
    let s: f64 = from.iter().zip(to).map(|(a, b)| (pose.apply_point(a) - b).norm_squared()).sum();
    (s / from.len() as f64).sqrt()
}

/// Proper rotation and translation minimising squared distances from
/// `from` to `to`.
pub fn kabsch(from: &[Point3<f64>], to: &[Point3<f64>]) -> RigidTransform {
    let n = from.len() as f64;
    let ca = from.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;
    let cb = to.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (a, b) in from.iter().zip(to) {
        h += (a.coords - ca) * (b.coords - cb).transpose();
    }
    let svd = SVD::new(h, true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    RigidTransform {
        rotation: r,
        translation: cb - r * ca,
    }
}

/// Bracket frame in scan coordinates for a recovered window pose.
pub fn bracket_pose(window_pose: &RigidTransform, spec: &CircuitSpec) -> RigidTransform {
    window_pose.compose(&spec.bracket_in_window())
}

/// Board frame in scan coordinates for a recovered window pose.
pub fn board_pose(window_pose: &RigidTransform, spec: &CircuitSpec) -> RigidTransform {
    bracket_pose(window_pose, spec).compose(&spec.board_to_bracket())
}

/// Reads exactly three `x y z` lines; blank lines and `#` comments are
/// skipped, commas count as separators.
pub fn parse_points(text: &str) -> RegistrationResult<[Point3<f64>; 3]> {
    let mut pts = Vec::with_capacity(3);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| RegistrationError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        if vals.len() != 3 || !vals.iter().all(|v| v.is_finite()) {
            return Err(RegistrationError::Parse {
                line: i + 1,
                message: format!("expected 3 finite coordinates, got {}", vals.len()),
            });
        }
        if pts.len() == 3 {
            return Err(RegistrationError::Parse {
                line: i + 1,
                message: "more than 3 points".into(),
            });
        }
        pts.push(Point3::new(vals[0], vals[1], vals[2]));
    }
    if pts.len() != 3 {
        return Err(RegistrationError::Parse {
            line: text.lines().count(),
            message: format!("expected 3 points, found {}", pts.len()),
        });
    }
    Ok([pts[0], pts[1], pts[2]])
}
