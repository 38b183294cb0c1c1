//! Parametric circuit descriptions and the printable parts derived from
//! them: the expanded sculpting blank and the snap-in mounting bracket.
//!
//! Frames used throughout:
//!
//! * board frame: board centre at the origin of the footprint, x along the
//!   first `board_size` entry, y along the second, board spanning z in
//!   `[0, height]`. Keepouts and link endpoints are given in this frame.
//! * bracket frame: origin at the sensor point (board top under the window
//!   centre), x along the longer footprint side, base outward normal `-z`.
//! * window frame: origin at the window centre on the window face, `+z`
//!   pointing out of the object.
//!
//! `bracket = window ∘ Tz(-standoff) ∘ Rx(tilt)`.

mod bracket;
mod generate;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::RigidTransform;
use crate::voxel::VoxelError;

pub use bracket::{generate_bracket, BracketProfile, DEFAULT_FIT_CLEARANCE};
pub(crate) use generate::BlankShape;
pub use generate::{generate_blank, generate_blank_with, BlankOptions};

pub const DEFAULT_EXPANSION: f64 = 3.0;
/// Minimum separation of fiducial triangle sides for unambiguous matching.
pub const SIDE_SEPARATION: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlankError {
    #[error("invalid spec field `{field}`: {reason}")]
    SpecInvalid { field: String, reason: String },
    #[error(transparent)]
    Voxel(#[from] VoxelError),
}

pub type BlankResult<T> = Result<T, BlankError>;

fn invalid(field: &str, reason: impl Into<String>) -> BlankError {
    BlankError::SpecInvalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowShape {
    #[default]
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    #[serde(default)]
    pub shape: WindowShape,
    /// mm
    pub diameter: f64,
    /// Window centre relative to the board centre, board frame (mm).
    #[serde(default)]
    pub center_offset: [f64; 2],
    /// Height of the window face above the board top along the window axis (mm).
    pub standoff: f64,
}

/// Axis-aligned box in the board frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keepout {
    #[serde(default)]
    pub name: Option<String>,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// A cable between two board-frame points, printed as a bowed ribbon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlexibleLink {
    pub from: [f64; 3],
    pub to: [f64; 3],
    /// Ribbon length (mm), at least the straight-line distance.
    pub slack_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    /// (length, width, height) mm
    pub board_size: [f64; 3],
    #[serde(default)]
    pub window: Option<WindowSpec>,
    #[serde(default)]
    pub tilt_deg: f64,
    #[serde(default)]
    pub keepouts: Vec<Keepout>,
    #[serde(default)]
    pub flexible_links: Vec<FlexibleLink>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fiducial {
    pub angle_deg: f64,
    /// Distance of the bump centre from the window centre (mm).
    pub radius_mm: f64,
    pub bump_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlankSpec {
    pub circuit: CircuitSpec,
    #[serde(default = "default_expansion")]
    pub expansion: f64,
    /// `None` selects the default layout when a window exists; an empty
    /// list disables bumps.
    #[serde(default)]
    pub fiducials: Option<Vec<Fiducial>>,
    /// Planned shell wall; when given, expansion must be at least this.
    #[serde(default)]
    pub shell_thickness: Option<f64>,
}

fn default_expansion() -> f64 {
    DEFAULT_EXPANSION
}

impl CircuitSpec {
    pub fn board(length: f64, width: f64, height: f64) -> Self {
        CircuitSpec {
            board_size: [length, width, height],
            window: None,
            tilt_deg: 0.0,
            keepouts: Vec::new(),
            flexible_links: Vec::new(),
        }
    }

    pub fn validate(&self) -> BlankResult<()> {
        for (i, &v) in self.board_size.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(&format!("board_size[{i}]"), format!("must be > 0, got {v}")));
            }
        }
        if let Some(w) = &self.window {
            if !(w.diameter.is_finite() && w.diameter >= 1.0) {
                return Err(invalid("window.diameter", format!("must be >= 1 mm, got {}", w.diameter)));
            }
            if !(w.standoff.is_finite() && w.standoff >= 0.0) {
                return Err(invalid("window.standoff", format!("must be >= 0, got {}", w.standoff)));
            }
            if !w.center_offset.iter().all(|v| v.is_finite()) {
                return Err(invalid("window.center_offset", "must be finite"));
            }
        }
        if !(self.tilt_deg.is_finite() && (0.0..=30.0).contains(&self.tilt_deg)) {
            return Err(invalid("tilt_deg", format!("must be within [0, 30] degrees, got {}", self.tilt_deg)));
        }
        for (i, k) in self.keepouts.iter().enumerate() {
            for a in 0..3 {
                if !(k.min[a].is_finite() && k.max[a].is_finite() && k.max[a] > k.min[a]) {
                    return Err(invalid(&format!("keepouts[{i}]"), "max must exceed min on every axis"));
                }
            }
        }
        for (i, l) in self.flexible_links.iter().enumerate() {
            let chord = (Point3::from(l.to) - Point3::from(l.from)).norm();
            if !(l.slack_length.is_finite() && l.slack_length > 0.0 && chord > 0.0) {
                return Err(invalid(&format!("flexible_links[{i}]"), "endpoints must differ and slack_length be > 0"));
            }
            if l.slack_length + 1e-9 < chord {
                return Err(invalid(
                    &format!("flexible_links[{i}].slack_length"),
                    format!("{} is shorter than the endpoint distance {chord:.3}", l.slack_length),
                ));
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.board_size[0]
    }

    pub fn width(&self) -> f64 {
        self.board_size[1]
    }

    pub fn height(&self) -> f64 {
        self.board_size[2]
    }

    pub fn standoff(&self) -> f64 {
        self.window.as_ref().map_or(0.0, |w| w.standoff)
    }

    /// Sensor point (board top under the window centre), board frame.
    pub fn sensor_point(&self) -> Point3<f64> {
        let o = self.window.as_ref().map_or([0.0, 0.0], |w| w.center_offset);
        Point3::new(o[0], o[1], self.height())
    }

    /// Maps board-frame points into the bracket frame.
    pub fn board_to_bracket(&self) -> RigidTransform {
        let q = if self.length() < self.width() {
            // bracket x follows the board's y
            Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0)
        } else {
            Matrix3::identity()
        };
        RigidTransform {
            rotation: q,
            translation: -(q * self.sensor_point().coords),
        }
    }

    /// Bracket frame expressed in the window frame: `Tz(-standoff) ∘ Rx(tilt)`.
    pub fn bracket_in_window(&self) -> RigidTransform {
        RigidTransform::from_translation(Vector3::new(0.0, 0.0, -self.standoff()))
            .compose(&RigidTransform::from_axis_angle(&Vector3::x(), self.tilt_deg.to_radians()))
    }

    /// Maps board-frame points into the window frame.
    pub fn board_to_window(&self) -> RigidTransform {
        self.bracket_in_window().compose(&self.board_to_bracket())
    }

    /// (long, short) footprint sides.
    pub fn footprint(&self) -> (f64, f64) {
        let (l, w) = (self.length(), self.width());
        (l.max(w), l.min(w))
    }
}

impl BlankSpec {
    pub fn new(circuit: CircuitSpec) -> Self {
        BlankSpec {
            circuit,
            expansion: DEFAULT_EXPANSION,
            fiducials: None,
            shell_thickness: None,
        }
    }

    /// Resolved bump layout: explicit list, or the default when a window exists.
    pub fn fiducial_layout(&self) -> Vec<Fiducial> {
        match (&self.fiducials, &self.circuit.window) {
            (Some(f), _) => f.clone(),
            (None, Some(w)) => default_fiducials(w.diameter / 2.0),
            (None, None) => Vec::new(),
        }
    }

    /// Bump apexes in the window frame, in layout order.
    pub fn fiducial_reference_points(&self) -> Vec<Point3<f64>> {
        self.fiducial_layout().iter().map(fiducial_apex).collect()
    }

    pub fn validate(&self) -> BlankResult<()> {
        self.circuit.validate()?;
        if !(self.expansion.is_finite() && self.expansion >= 0.0) {
            return Err(invalid("expansion", format!("must be >= 0, got {}", self.expansion)));
        }
        if let Some(t) = self.shell_thickness {
            if self.expansion + 1e-12 < t {
                return Err(invalid(
                    "expansion",
                    format!("{} is less than the planned shell thickness {t}", self.expansion),
                ));
            }
        }
        let layout = self.fiducial_layout();
        if layout.is_empty() {
            return Ok(());
        }
        if self.circuit.window.is_none() {
            return Err(invalid("fiducials", "bumps need a window to sit on"));
        }
        if layout.len() != 3 {
            return Err(invalid("fiducials", format!("need exactly 3 bumps, got {}", layout.len())));
        }
        for (i, f) in layout.iter().enumerate() {
            if !(f.radius_mm.is_finite() && f.radius_mm > 0.0 && f.bump_radius.is_finite() && f.bump_radius > 0.0) {
                return Err(invalid(&format!("fiducials[{i}]"), "radius_mm and bump_radius must be > 0"));
            }
            if !f.angle_deg.is_finite() {
                return Err(invalid(&format!("fiducials[{i}].angle_deg"), "must be finite"));
            }
        }
        let mut angles: Vec<f64> = layout.iter().map(|f| f.angle_deg.rem_euclid(360.0)).collect();
        angles.sort_by(f64::total_cmp);
        let gaps = [angles[1] - angles[0], angles[2] - angles[1], 360.0 - angles[2] + angles[0]];
        if gaps.iter().any(|&g| g < 1e-6) {
            return Err(invalid("fiducials", "angles must be pairwise distinct"));
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if (gaps[i] - gaps[j]).abs() < 1e-6 {
                    return Err(invalid("fiducials", "angular gaps must all differ (symmetric spacing)"));
                }
            }
        }
        let sides = triangle_sides(&self.fiducial_reference_points());
        for i in 0..3 {
            for j in i + 1..3 {
                if (sides[i] - sides[j]).abs() < SIDE_SEPARATION {
                    return Err(invalid(
                        "fiducials",
                        format!("bump triangle is not scalene: sides {:.3} and {:.3} within {SIDE_SEPARATION} mm", sides[i], sides[j]),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Default bump layout: 0°, 100°, 220° at window radius + 1 mm, 1 mm bumps.
pub fn default_fiducials(window_radius: f64) -> Vec<Fiducial> {
    [0.0, 100.0, 220.0]
        .iter()
        .map(|&a| Fiducial {
            angle_deg: a,
            radius_mm: window_radius + 1.0,
            bump_radius: 1.0,
        })
        .collect()
}

/// Highest point of a bump, window frame.
pub fn fiducial_apex(f: &Fiducial) -> Point3<f64> {
    let a = f.angle_deg.to_radians();
    Point3::new(f.radius_mm * a.cos(), f.radius_mm * a.sin(), f.bump_radius)
}

/// Side lengths `[|p1 - p2|, |p2 - p0|, |p0 - p1|]` (side i opposite point i).
pub fn triangle_sides(p: &[Point3<f64>]) -> [f64; 3] {
    [(p[1] - p[2]).norm(), (p[2] - p[0]).norm(), (p[0] - p[1]).norm()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mouse() -> BlankSpec {
        let mut c = CircuitSpec::board(38.0, 51.0, 4.0);
        c.window = Some(WindowSpec {
            shape: WindowShape::Circle,
            diameter: 14.0,
            center_offset: [0.0, 15.0],
            standoff: 8.0,
        });
        c.tilt_deg = 10.0;
        BlankSpec::new(c)
    }

    #[test]
    fn default_layout_is_valid_and_scalene() {
        let s = mouse();
        s.validate().unwrap();
        let sides = triangle_sides(&s.fiducial_reference_points());
        for i in 0..3 {
            for j in i + 1..3 {
                assert!((sides[i] - sides[j]).abs() >= SIDE_SEPARATION);
            }
        }
    }

    #[test]
    fn symmetric_layout_rejected() {
        let mut s = mouse();
        s.fiducials = Some(
            [0.0, 120.0, 240.0]
                .iter()
                .map(|&a| Fiducial {
                    angle_deg: a,
                    radius_mm: 8.0,
                    bump_radius: 1.0,
                })
                .collect(),
        );
        assert!(matches!(s.validate(), Err(BlankError::SpecInvalid { .. })));
    }

    #[test]
    fn field_named_in_errors() {
        let mut s = mouse();
        s.circuit.tilt_deg = 45.0;
        match s.validate() {
            Err(BlankError::SpecInvalid { field, .. }) => assert_eq!(field, "tilt_deg"),
            other => panic!("{other:?}"),
        }
        let mut s = mouse();
        s.circuit.window.as_mut().unwrap().diameter = 0.5;
        assert!(matches!(s.validate(), Err(BlankError::SpecInvalid { field, .. }) if field == "window.diameter"));
        let mut s = mouse();
        s.shell_thickness = Some(4.0);
        assert!(matches!(s.validate(), Err(BlankError::SpecInvalid { field, .. }) if field == "expansion"));
    }

    #[test]
    fn frames_compose() {
        let c = mouse().circuit;
        // the sensor point lands at (0, 0, -standoff) in the window frame
        let s = c.board_to_window().apply_point(&c.sensor_point());
        assert!((s - Point3::new(0.0, 0.0, -8.0)).norm() < 1e-12);
        // long board side (y here) becomes bracket x
        let d = c.board_to_bracket().apply_vector(&Vector3::y());
        assert!((d - Vector3::x()).norm() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let s = mouse();
        let text = serde_json::to_string_pretty(&s).unwrap();
        let back: BlankSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
        let minimal: BlankSpec = serde_json::from_str(r#"{"circuit":{"board_size":[10,10,10]}}"#).unwrap();
        assert_eq!(minimal.expansion, 3.0);
        assert!(minimal.fiducial_layout().is_empty());
    }
}
