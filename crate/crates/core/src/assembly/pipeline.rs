//! Scan to printable parts in one pass, with a JSON run report.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::bracket::{bracket_field, BracketPlacement};
use super::fasten::{fasten_fields, interference_volume, part_report, PartReport, PartSet};
use super::shell::{shell_with, ThinFeature};
use super::split::split_with_section;
use super::window::{cut_window_field, plan_window_cut_bvh, WindowCut};
use super::{plan_with_overrides, AssemblyError, AssemblyPlan, PlanOverrides};
use crate::blank::{generate_bracket, BlankSpec};
use crate::mesh::{metrics, repair_with, validate, write_mesh, Bvh, MeshFormat, RepairOptions, RigidTransform, TriangleMesh};
use crate::registration::{board_pose, bracket_pose, pose_from_fiducials, FiducialObservation};
use crate::voxel::{csg_apply, csg_apply_local, extract_surface, CsgOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Repair,
    Validate,
    Register,
    Plan,
    Shell,
    Split,
    Window,
    Bracket,
    Fasteners,
    Export,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Repair => "repair",
            Stage::Validate => "validate",
            Stage::Register => "register",
            Stage::Plan => "plan",
            Stage::Shell => "shell",
            Stage::Split => "split",
            Stage::Window => "window",
            Stage::Bracket => "bracket",
            Stage::Fasteners => "fasteners",
            Stage::Export => "export",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage} stage failed: {error}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub error: AssemblyError,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<AssemblyError>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError { stage, error: e.into() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputReport {
    pub triangles: usize,
    pub triangles_after_repair: usize,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationReport {
    pub window_pose: RigidTransform,
    pub bracket_pose: RigidTransform,
    pub board_pose: RigidTransform,
    pub residual_rms: f64,
    /// Observed point index matched to each layout fiducial.
    pub correspondence: [usize; 3],
}

/// Independently measured volume terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conservation {
    pub shell: f64,
    pub bracket_added: f64,
    pub bosses_added: f64,
    pub window_removed: f64,
    pub cavities_removed: f64,
    pub expected: f64,
    pub actual: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub input: InputReport,
    pub registration: RegistrationReport,
    pub plan: AssemblyPlan,
    pub shell_volume: f64,
    pub min_wall_thickness: Option<f64>,
    pub thin_features: Vec<ThinFeature>,
    pub split_volumes: [f64; 2],
    pub section_loops: usize,
    /// "a" or "b".
    pub window_part: String,
    pub window: WindowCut,
    pub bracket: BracketPlacement,
    pub conservation: Conservation,
    pub parts: PartReport,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub parts: PartSet,
    pub report: PipelineReport,
}

fn thin_warning(t: &ThinFeature) -> String {
    format!(
        "solid region near ({:.1}, {:.1}, {:.1}): local thickness {:.2} mm is under twice the shell",
        t.location[0], t.location[1], t.location[2], t.thickness
    )
}

/// Runs repair, validation, registration, planning, shell, split, window,
/// bracket and fasteners in order. The first failure stops the run and
/// names its stage.
pub fn run_pipeline(
    scan: &TriangleMesh,
    spec: &BlankSpec,
    fiducials: &FiducialObservation,
    overrides: &PlanOverrides,
) -> Result<PipelineOutput, PipelineError> {
    spec.validate().at(Stage::Plan)?;
    let repaired = repair_with(scan, &RepairOptions::default());
    let diag = validate(&repaired).at(Stage::Repair)?;
    if !(diag.watertight && diag.manifold) {
        return Err(PipelineError {
            stage: Stage::Validate,
            error: AssemblyError::NotWatertight {
                boundary_edges: diag.boundary_edge_count,
                non_manifold_edges: diag.non_manifold_edge_count,
                inverted_pairs: diag.inverted_adjacent_pairs,
            },
        });
    }
    let input = InputReport {
        triangles: scan.triangles.len(),
        triangles_after_repair: repaired.triangles.len(),
        volume: metrics(&repaired).signed_volume,
    };

    let reg = pose_from_fiducials(fiducials, &spec.fiducial_reference_points()).at(Stage::Register)?;
    let window_pose = reg.pose;
    let kpose = bracket_pose(&window_pose, &spec.circuit);
    let registration = RegistrationReport {
        window_pose,
        bracket_pose: kpose,
        board_pose: board_pose(&window_pose, &spec.circuit),
        residual_rms: reg.residual_rms,
        correspondence: reg.correspondence,
    };

    let mut overrides = overrides.clone();
    if overrides.shell_thickness.is_none() {
        overrides.shell_thickness = spec.shell_thickness;
    }
    let plan = plan_with_overrides(&repaired, &window_pose, &spec.circuit, &overrides).at(Stage::Plan)?;
    let pitch = plan.pitch;

    let shelled = shell_with(&repaired, plan.shell_thickness, pitch).at(Stage::Shell)?;
    let mut warnings: Vec<String> = shelled.thin_features.iter().map(thin_warning).collect();
    let shell_volume = metrics(&shelled.mesh).signed_volume;

    let (below, above, section) = split_with_section(&shelled.mesh, &plan.split_plane).at(Stage::Split)?;
    if section.loops.len() > 2 {
        warnings.push(format!("split section has {} loops; fasteners use the longest", section.loops.len()));
    }
    let split_volumes = [metrics(&below).signed_volume, metrics(&above).signed_volume];
    let bvh = [Bvh::build(&below), Bvh::build(&above)];

    // part A is the piece under the bracket base
    let bracket = generate_bracket(&spec.circuit, plan.fit_clearance).at(Stage::Bracket)?;
    let base = bracket.bbox().map_or(Point3::origin(), |b| Point3::new(b.center().x, b.center().y, b.min.z));
    let a_idx = nearest_piece(&bvh, &kpose.apply_point(&base), &kpose.apply_vector(&-Vector3::z())).ok_or_else(|| {
        PipelineError {
            stage: Stage::Bracket,
            error: AssemblyError::BracketOutsideCavity("no shell below the bracket base".into()),
        }
    })?;
    // piece fields: the shell field clipped to each side of the cut
    let plane = plan.split_plane;
    let clip = |sign: f64| shelled.field.map_with_position(|p, v| v.max((sign * plane.signed_distance(p)) as f32));
    let (mut fa, mut fb) = if a_idx == 0 { (clip(1.0), clip(-1.0)) } else { (clip(-1.0), clip(1.0)) };

    // window
    let reach = repaired.bbox().map_or(1.0, |b| b.extent().norm() + (b.center() - window_pose.origin()).norm());
    let far = window_pose.apply_point(&Point3::new(0.0, 0.0, reach));
    let w_idx = nearest_piece(&bvh, &far, &-window_pose.axis(2)).ok_or(PipelineError {
        stage: Stage::Window,
        error: AssemblyError::WindowOffPiece,
    })?;
    let cut = plan_window_cut_bvh(&bvh[w_idx], &plan).at(Stage::Window)?;
    let target = if w_idx == a_idx { &mut fa } else { &mut fb };
    let (cut_field, tool) = cut_window_field(target, &cut, &plan).at(Stage::Window)?;
    let window_removed = csg_apply(&tool, target, CsgOp::Intersect).at(Stage::Window)?.inside_volume();
    *target = cut_field;

    // bracket, kept on part A's side of the cut
    let (tool, placement) = bracket_field(&bvh[a_idx], &[&bvh[0], &bvh[1]], &bracket, &kpose, pitch, plan.shell_thickness / 2.0).at(Stage::Bracket)?;
    let side = if a_idx == 0 { -1.0 } else { 1.0 };
    let tool = tool.map_with_position(|p, v| v.max((-side * plane.signed_distance(p)) as f32));
    let bracket_added = csg_apply(&tool, &fa, CsgOp::Subtract).at(Stage::Bracket)?.inside_volume();
    csg_apply_local(&mut fa, &tool, CsgOp::Union).at(Stage::Bracket)?;
    drop(tool);

    let towards_b = plane.normal * -side;
    let done = fasten_fields(&fa, &fb, &section, &plan, &towards_b).at(Stage::Fasteners)?;
    let interference = interference_volume(&done.a, &done.b).at(Stage::Fasteners)?;
    let part_a = extract_surface(&done.a).with_name("part_a");
    let part_b = extract_surface(&done.b).with_name("part_b");
    let mut parts_report = part_report(&part_a, &part_b, &plan, interference, done.cavity_depths).at(Stage::Fasteners)?;
    parts_report.min_wall_thickness = shelled.min_wall_thickness;
    parts_report.thin_features = shelled.thin_features.clone();
    if !(parts_report.watertight_a && parts_report.watertight_b) {
        warnings.push("an output part is not watertight".into());
    }
    if interference > parts_report.interference_bound {
        warnings.push(format!(
            "interference {interference:.2} mm3 exceeds the bound {:.2} mm3",
            parts_report.interference_bound
        ));
    }

    let expected = shell_volume + bracket_added + done.added - window_removed - done.removed;
    let actual = parts_report.volume_a + parts_report.volume_b;
    let conservation = Conservation {
        shell: shell_volume,
        bracket_added,
        bosses_added: done.added,
        window_removed,
        cavities_removed: done.removed,
        expected,
        actual,
        relative_error: (actual - expected).abs() / expected.abs().max(f64::MIN_POSITIVE),
    };
    let report = PipelineReport {
        input,
        registration,
        plan,
        shell_volume,
        min_wall_thickness: shelled.min_wall_thickness,
        thin_features: shelled.thin_features,
        split_volumes,
        section_loops: section.loops.len(),
        window_part: if w_idx == a_idx { "a" } else { "b" }.into(),
        window: cut,
        bracket: placement,
        conservation,
        parts: parts_report.clone(),
        warnings,
    };
    Ok(PipelineOutput {
        parts: PartSet {
            part_a,
            part_b,
            report: parts_report,
        },
        report,
    })
}

/// Index of the piece a ray meets first.
fn nearest_piece(bvh: &[Bvh; 2], origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<usize> {
    let hits = bvh.each_ref().map(|b| b.first_hit(origin, dir, f64::INFINITY).map(|h| h.t));
    match hits {
        [Some(a), Some(b)] => Some(if b < a { 1 } else { 0 }),
        [Some(_), None] => Some(0),
        [None, Some(_)] => Some(1),
        [None, None] => None,
    }
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub part_a: PathBuf,
    pub part_b: PathBuf,
    pub report: PathBuf,
}

/// Writes `<name>_a.stl`, `<name>_b.stl` and `<name>_report.json` into `dir`.
pub fn write_outputs(out: &PipelineOutput, dir: &Path, name: &str) -> Result<OutputPaths, PipelineError> {
    let io = |e: std::io::Error| PipelineError {
        stage: Stage::Export,
        error: AssemblyError::Io(e.to_string()),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let paths = OutputPaths {
        part_a: dir.join(format!("{name}_a.stl")),
        part_b: dir.join(format!("{name}_b.stl")),
        report: dir.join(format!("{name}_report.json")),
    };
    std::fs::write(&paths.part_a, write_mesh(&out.parts.part_a, MeshFormat::StlBinary)).map_err(io)?;
    std::fs::write(&paths.part_b, write_mesh(&out.parts.part_b, MeshFormat::StlBinary)).map_err(io)?;
    let json = serde_json::to_string_pretty(&out.report).map_err(|e| PipelineError {
        stage: Stage::Export,
        error: AssemblyError::Io(e.to_string()),
    })?;
    std::fs::write(&paths.report, json + "\n").map_err(io)?;
    Ok(paths)
}
