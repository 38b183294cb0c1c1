//! Design checks for a sensing window against the optical-flow sensor's
//! working envelope.

use serde::{Deserialize, Serialize};

use crate::{GestureError, GestureResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorGeometry {
    /// Widest window the sensor sees through (mm).
    pub window_diameter: f64,
    /// Diameter over which motion is tracked reliably (mm).
    pub accurate_diameter: f64,
    /// Lens-to-surface band that stays in focus (mm).
    pub depth_of_field: (f64, f64),
    pub optimal_distance: f64,
    pub tilt_deg: f64,
    /// Clear cover sheet over the window (mm).
    pub cover_thickness: f64,
}

impl Default for SensorGeometry {
    fn default() -> Self {
        Self {
            window_diameter: 14.0,
            accurate_diameter: 13.0,
            depth_of_field: (1.4, 2.1),
            optimal_distance: 2.0,
            tilt_deg: 10.0,
            cover_thickness: 2.0,
        }
    }
}

impl SensorGeometry {
    pub fn check(&self) -> GestureResult<()> {
        let (lo, hi) = self.depth_of_field;
        if !(self.accurate_diameter > 0.0 && self.accurate_diameter <= self.window_diameter) {
            return Err(GestureError::InvalidConfig(format!(
                "accurate diameter {} must be in (0, window diameter {}]",
                self.accurate_diameter, self.window_diameter
            )));
        }
        if !(lo > 0.0 && lo <= self.optimal_distance && self.optimal_distance <= hi) {
            return Err(GestureError::InvalidConfig(format!(
                "optimal distance {} must lie in the depth of field [{lo}, {hi}]",
                self.optimal_distance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub present: bool,
    pub thickness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowDesign {
    pub hole_diameter: f64,
    pub cover: Cover,
    /// Gap from the lens to the underside of the cover (mm).
    pub standoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UncoveredHole {
        explanation: String,
    },
    OutOfDepthOfField {
        surface_distance: f64,
        range: (f64, f64),
        explanation: String,
    },
    WindowTooSmall {
        diameter: f64,
        required: f64,
        explanation: String,
    },
}

impl Violation {
    pub fn explanation(&self) -> &str {
        match self {
            Violation::UncoveredHole { explanation }
            | Violation::OutOfDepthOfField { explanation, .. }
            | Violation::WindowTooSmall { explanation, .. } => explanation,
        }
    }
}

/// Every rule the design breaks, in a fixed order.
pub fn check_geometry(design: &WindowDesign, sensor: &SensorGeometry) -> Vec<Violation> {
    let mut out = Vec::new();
    if !design.cover.present {
        out.push(Violation::UncoveredHole {
            explanation: "an open hole lets the fingertip bulge into it, so the skin drifts out of the sensor's focus \
                          band; cover the window with a clear sheet"
                .into(),
        });
    } else {
        let d = design.standoff + design.cover.thickness;
        let (lo, hi) = sensor.depth_of_field;
        if !(lo..=hi).contains(&d) {
            out.push(Violation::OutOfDepthOfField {
                surface_distance: d,
                range: (lo, hi),
                explanation: format!(
                    "the finger surface sits {d:.2} mm from the lens, outside the {lo}-{hi} mm band where the \
                     sensor tracks motion"
                ),
            });
        }
    }
    if design.hole_diameter < sensor.accurate_diameter {
        out.push(Violation::WindowTooSmall {
            diameter: design.hole_diameter,
            required: sensor.accurate_diameter,
            explanation: format!(
                "a {:.1} mm window is narrower than the {:.1} mm area the sensor tracks reliably, leaving too little \
                 room for a finger stroke",
                design.hole_diameter, sensor.accurate_diameter
            ),
        });
    }
    out
}
