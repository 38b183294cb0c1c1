//! Turning a scanned sculpture and a recovered board pose into two
//! printable parts: shell, split, window bore, fused bracket and
//! friction-fit fasteners.
//!
//! The split is exact mesh clipping; every other Boolean runs on signed
//! distance fields at the plan's pitch.

mod bracket;
mod fasten;
mod pipeline;
mod shell;
mod split;
mod window;

use nalgebra::{Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blank::{BlankError, CircuitSpec, DEFAULT_FIT_CLEARANCE};
use crate::mesh::{MeshError, Plane, RigidTransform, TriangleMesh};
use crate::registration::RegistrationError;
use crate::voxel::{VoxelError, DEFAULT_PITCH};

pub use bracket::{place_bracket, place_bracket_with, BracketPlacement, DEFAULT_STEM_OVERLAP, MAX_STEM_SEARCH};
pub use fasten::{add_fasteners, boss_side_area, fastener_boss_profile, interference_bound, PartReport, PartSet, BOSS_EMBED};
pub use pipeline::{
    run_pipeline, write_outputs, Conservation, InputReport, OutputPaths, PipelineError, PipelineOutput, PipelineReport,
    RegistrationReport, Stage,
};
pub use shell::{shell, shell_with, Shelled, ThinFeature};
pub use split::{plane_section, split_by_plane, Section};
pub use window::{cut_window, plan_window_cut, probe_window, WindowCut, WindowProbe};

pub const DEFAULT_SHELL_THICKNESS: f64 = 3.0;
pub const DEFAULT_THROUGH_HOLE: f64 = 16.0;
pub const DEFAULT_COUNTERBORE_DIAMETER: f64 = 20.0;
pub const DEFAULT_COUNTERBORE_DEPTH: f64 = 2.0;
pub const DEFAULT_BOSS_PROFILE: [f64; 2] = [6.0, 2.0];
pub const DEFAULT_BOSS_HEIGHT: f64 = 3.0;
pub const DEFAULT_BOSS_CLEARANCE: f64 = 0.15;
/// Extra cavity depth so a boss cannot bottom out before the faces meet.
pub const CAVITY_RELIEF: f64 = 0.3;
/// Rim length served by one fastener.
pub const RIM_PER_FASTENER: f64 = 60.0;
pub const MIN_FASTENERS: usize = 3;
/// Clearance a default boss outline keeps from both rim edges.
const RIM_FIT_MARGIN: f64 = 0.25;
/// Arc-length step when sliding a default boss to a straighter stretch.
const RIM_SLIDE_STEP: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("split plane does not cross the solid's interior")]
    PlaneMiss,
    #[error("region thinner than twice the shell thickness near ({:.2}, {:.2}, {:.2}); local wall {thickness:.2} mm", location[0], location[1], location[2])]
    ThinFeature { location: [f64; 3], thickness: f64 },
    #[error("window axis does not pass through this piece")]
    WindowOffPiece,
    #[error("bracket is not inside the shell cavity: {0}")]
    BracketOutsideCavity(String),
    #[error("fastener {index} at ({:.2}, {:.2}) does not fit inside the wall ring", position[0], position[1])]
    BossOffWall { index: usize, position: [f64; 2] },
    #[error("mesh is not watertight: {boundary_edges} boundary edges, {non_manifold_edges} non-manifold edges, {inverted_pairs} inverted pairs")]
    NotWatertight {
        boundary_edges: usize,
        non_manifold_edges: usize,
        inverted_pairs: usize,
    },
    #[error("invalid plan field `{field}`: {reason}")]
    InvalidPlan { field: String, reason: String },
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
    #[error(transparent)]
    Blank(#[from] BlankError),
    #[error("i/o: {0}")]
    Io(String),
}

pub type AssemblyResult<T> = Result<T, AssemblyError>;

fn invalid_plan(field: &str, reason: impl Into<String>) -> AssemblyError {
    AssemblyError::InvalidPlan {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counterbore {
    pub diameter: f64,
    pub depth: f64,
}

/// Obround boss on part A with a matching cavity in part B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fastener {
    /// Boss centre in split-plane coordinates (see [`Plane::basis`]).
    pub position: [f64; 2],
    /// (length, width) mm
    #[serde(default = "default_profile")]
    pub profile: [f64; 2],
    #[serde(default = "default_boss_height")]
    pub height: f64,
    #[serde(default = "default_boss_clearance")]
    pub clearance: f64,
}

/// Named fastener shapes. Plans use `Obround`; the other two are earlier
/// designs kept for comparison and never chosen automatically.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FastenerPreset {
    #[default]
    Obround,
    /// 3 mm round pin, 5 mm tall; snaps off easily.
    Pin,
    /// Long low rib; holds poorly against peeling.
    Tongue,
}

impl FastenerPreset {
    pub fn at(self, position: [f64; 2]) -> Fastener {
        let (profile, height) = match self {
            FastenerPreset::Obround => (DEFAULT_BOSS_PROFILE, DEFAULT_BOSS_HEIGHT),
            FastenerPreset::Pin => ([3.0, 3.0], 5.0),
            FastenerPreset::Tongue => ([24.0, 2.0], 2.0),
        };
        Fastener {
            position,
            profile,
            height,
            clearance: DEFAULT_BOSS_CLEARANCE,
        }
    }
}

fn default_profile() -> [f64; 2] {
    DEFAULT_BOSS_PROFILE
}

fn default_boss_height() -> f64 {
    DEFAULT_BOSS_HEIGHT
}

fn default_boss_clearance() -> f64 {
    DEFAULT_BOSS_CLEARANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyPlan {
    pub shell_thickness: f64,
    pub split_plane: Plane,
    /// Window frame (origin on the window face, +z outward) in scan coordinates.
    pub window_pose: RigidTransform,
    pub through_hole_diameter: f64,
    pub counterbore: Counterbore,
    pub fasteners: Vec<Fastener>,
    /// Bracket fit clearance around the board.
    pub fit_clearance: f64,
    pub pitch: f64,
}

/// Partial plan; present fields replace the defaults verbatim.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanOverrides {
    pub shell_thickness: Option<f64>,
    pub split_plane: Option<Plane>,
    pub through_hole_diameter: Option<f64>,
    pub counterbore: Option<Counterbore>,
    pub fasteners: Option<Vec<Fastener>>,
    pub fastener_count: Option<usize>,
    pub fastener_profile: Option<[f64; 2]>,
    pub fastener_height: Option<f64>,
    pub fastener_clearance: Option<f64>,
    pub fit_clearance: Option<f64>,
    pub pitch: Option<f64>,
}

impl AssemblyPlan {
    pub fn validate(&self) -> AssemblyResult<()> {
        let pos = |field: &str, v: f64| -> AssemblyResult<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid_plan(field, format!("must be > 0, got {v}")))
            }
        };
        pos("pitch", self.pitch)?;
        pos("shell_thickness", self.shell_thickness)?;
        if self.shell_thickness < 2.0 * self.pitch {
            return Err(invalid_plan(
                "shell_thickness",
                format!("{} is below two voxels ({} mm)", self.shell_thickness, 2.0 * self.pitch),
            ));
        }
        pos("through_hole_diameter", self.through_hole_diameter)?;
        pos("counterbore.diameter", self.counterbore.diameter)?;
        if !(self.counterbore.depth.is_finite() && self.counterbore.depth >= 0.0) {
            return Err(invalid_plan("counterbore.depth", "must be >= 0"));
        }
        if self.counterbore.diameter <= self.through_hole_diameter {
            return Err(invalid_plan(
                "counterbore.diameter",
                format!(
                    "{} must exceed the through hole {} to leave a rim",
                    self.counterbore.diameter, self.through_hole_diameter
                ),
            ));
        }
        if !(self.fit_clearance.is_finite() && self.fit_clearance >= 0.0) {
            return Err(invalid_plan("fit_clearance", "must be >= 0"));
        }
        let n = self.split_plane.normal.norm();
        if !(n.is_finite() && (n - 1.0).abs() < 1e-6 && self.split_plane.offset.is_finite()) {
            return Err(invalid_plan("split_plane", "normal must be a unit vector"));
        }
        self.window_pose
            .check()
            .map_err(|e| invalid_plan("window_pose", e.to_string()))?;
        for (i, f) in self.fasteners.iter().enumerate() {
            let field = format!("fasteners[{i}]");
            let [l, w] = f.profile;
            if !(l.is_finite() && w.is_finite() && w > 0.0 && l >= w) {
                return Err(invalid_plan(&field, "profile must be length >= width > 0"));
            }
            if w >= self.shell_thickness {
                return Err(invalid_plan(
                    &field,
                    format!("boss width {w} must be below the shell thickness {}", self.shell_thickness),
                ));
            }
            pos(&format!("{field}.height"), f.height)?;
            if !(f.clearance.is_finite() && f.clearance >= 0.0) {
                return Err(invalid_plan(&format!("{field}.clearance"), "must be >= 0"));
            }
            if !f.position.iter().all(|v| v.is_finite()) {
                return Err(invalid_plan(&format!("{field}.position"), "must be finite"));
            }
        }
        Ok(())
    }

    /// Rim width left for the window disc to rest on.
    pub fn rim_width(&self) -> f64 {
        (self.counterbore.diameter - self.through_hole_diameter) / 2.0
    }

    pub fn window_axis(&self) -> Vector3<f64> {
        self.window_pose.axis(2)
    }
}

/// Volume centroid of a closed mesh.
pub fn volume_centroid(mesh: &TriangleMesh) -> Option<Point3<f64>> {
    let mut v = 0.0;
    let mut c = Vector3::zeros();
    for t in 0..mesh.triangles.len() {
        let [a, b, d] = mesh.corners(t);
        let tv = a.coords.dot(&b.coords.cross(&d.coords)) / 6.0;
        v += tv;
        c += (a.coords + b.coords + d.coords) * (tv / 4.0);
    }
    (v.abs() > 1e-12).then(|| Point3::from(c / v))
}

/// Default plan: split parallel to the window through the volume centroid,
/// fasteners spread evenly around the longest rim loop.
pub fn plan_default(scan: &TriangleMesh, window_pose: &RigidTransform, spec: &CircuitSpec) -> AssemblyResult<AssemblyPlan> {
    plan_with_overrides(scan, window_pose, spec, &PlanOverrides::default())
}

pub fn plan_with_overrides(
    scan: &TriangleMesh,
    window_pose: &RigidTransform,
    spec: &CircuitSpec,
    overrides: &PlanOverrides,
) -> AssemblyResult<AssemblyPlan> {
    spec.validate()?;
    let thickness = overrides.shell_thickness.unwrap_or(DEFAULT_SHELL_THICKNESS);
    let split_plane = match overrides.split_plane {
        Some(p) => p,
        None => {
            let c = volume_centroid(scan).ok_or(AssemblyError::PlaneMiss)?;
            Plane::through(&c, &window_pose.axis(2))
        }
    };
    let fasteners = match &overrides.fasteners {
        Some(f) => f.clone(),
        None => {
            let section = plane_section(scan, &split_plane)?;
            let template = Fastener {
                position: [0.0, 0.0],
                profile: overrides.fastener_profile.unwrap_or(DEFAULT_BOSS_PROFILE),
                height: overrides.fastener_height.unwrap_or(DEFAULT_BOSS_HEIGHT),
                clearance: overrides.fastener_clearance.unwrap_or(DEFAULT_BOSS_CLEARANCE),
            };
            rim_fasteners(&section, thickness, overrides.fastener_count, &template)
        }
    };
    let plan = AssemblyPlan {
        shell_thickness: thickness,
        split_plane,
        window_pose: *window_pose,
        through_hole_diameter: overrides.through_hole_diameter.unwrap_or(DEFAULT_THROUGH_HOLE),
        counterbore: overrides.counterbore.unwrap_or(Counterbore {
            diameter: DEFAULT_COUNTERBORE_DIAMETER,
            depth: DEFAULT_COUNTERBORE_DEPTH,
        }),
        fasteners,
        fit_clearance: overrides.fit_clearance.unwrap_or(DEFAULT_FIT_CLEARANCE),
        pitch: overrides.pitch.unwrap_or(DEFAULT_PITCH),
    };
    plan.validate()?;
    Ok(plan)
}

/// Number of fasteners for a rim of `perimeter` mm.
pub fn fastener_count(perimeter: f64) -> usize {
    ((perimeter / RIM_PER_FASTENER).floor() as usize).max(MIN_FASTENERS)
}

/// Fasteners evenly spaced along the section's longest loop, centred half a
/// wall thickness inside it. A boss that would poke out of the wall on a
/// tight bend slides along the rim to the nearest spot where it fits.
pub fn rim_fasteners(section: &Section, thickness: f64, count: Option<usize>, template: &Fastener) -> Vec<Fastener> {
    let Some(li) = (0..section.loops.len()).max_by(|&a, &b| section.perimeter(a).total_cmp(&section.perimeter(b))) else {
        return Vec::new();
    };
    let mut l = section.loops[li].clone();
    if crate::geom2d::signed_area(&l) < 0.0 {
        l.reverse();
    }
    // canonical start: largest u, then largest v
    let start = (0..l.len())
        .max_by(|&a, &b| l[a].x.total_cmp(&l[b].x).then(l[a].y.total_cmp(&l[b].y)))
        .unwrap_or(0);
    l.rotate_left(start);
    let perimeter = section.perimeter(li);
    let n = count.unwrap_or_else(|| fastener_count(perimeter));
    let mut cum = vec![0.0];
    for k in 0..l.len() {
        let s = cum[k] + (l[(k + 1) % l.len()] - l[k]).norm();
        cum.push(s);
    }
    let at = |s: f64| {
        let s = s.rem_euclid(perimeter);
        let k = cum.partition_point(|&c| c <= s).saturating_sub(1).min(l.len() - 1);
        let (a, b) = (l[k], l[(k + 1) % l.len()]);
        let seg = cum[k + 1] - cum[k];
        let t = if seg > 0.0 { (s - cum[k]) / seg } else { 0.0 };
        let dir = (b - a).normalize();
        // counter-clockwise loop: material lies to the left
        let inward = nalgebra::Vector2::new(-dir.y, dir.x);
        (a + (b - a) * t + inward * (thickness / 2.0), dir, inward)
    };
    let outline = fasten::fastener_boss_profile(template, template.clearance);
    let fits = |c: &Point2<f64>, dir: &nalgebra::Vector2<f64>, inward: &nalgebra::Vector2<f64>| {
        outline.iter().all(|q| {
            let p = c + dir * q.x + inward * q.y;
            let d = crate::geom2d::point_in_polygon(&p, &l).then(|| section.boundary_distance(&p));
            d.is_some_and(|d| d >= RIM_FIT_MARGIN && d <= thickness - RIM_FIT_MARGIN)
        })
    };
    let reach = perimeter / (2.0 * n as f64);
    (0..n)
        .map(|i| {
            let s = perimeter * (i as f64 + 0.5) / n as f64;
            let steps = (reach / RIM_SLIDE_STEP) as usize;
            let slid = (0..=steps)
                .flat_map(|k| [k as f64, -(k as f64)])
                .map(|k| at(s + k * RIM_SLIDE_STEP))
                .find(|(c, d, v)| fits(c, d, v));
            let (c, _, _) = slid.unwrap_or_else(|| at(s));
            Fastener {
                position: [c.x, c.y],
                ..*template
            }
        })
        .collect()
}
