//! Mesh, blank and assembly subcommands.

use nalgebra::{Point3, Vector3};
use serde_json::{json, Value};

use crate::args::{BlankArgs, BracketArgs, FastenArgs, PipelineArgs, PlaceArgs, ShellArgs, SplitArgs, ValidateArgs};
use crate::run::{at, read_mesh, read_points, read_spec, read_text, stem, Failure, Run};
use shellforge::assembly::{
    add_fasteners, place_bracket_with, run_pipeline, shell_with, split_by_plane, volume_centroid, AssemblyPlan,
    PlanOverrides,
};
use shellforge::blank::{generate_blank_with, generate_bracket, triangle_sides, BlankOptions, BracketProfile};
use shellforge::mesh::{metrics, repair_with, validate as check_mesh, Plane, RepairOptions, TriangleMesh};
use shellforge::registration::{bracket_pose, pose_from_fiducials, FiducialObservation, ObservationSource};

fn solid_summary(mesh: &TriangleMesh) -> Result<Value, Failure> {
    let diag = check_mesh(mesh).map_err(at("validate"))?;
    Ok(json!({
        "triangles": mesh.triangles.len(),
        "metrics": metrics(mesh),
        "diagnostics": diag,
    }))
}

/// Fails the `validate` stage unless `mesh` is a closed oriented solid.
fn require_solid(mesh: &TriangleMesh, what: &str) -> Result<(), Failure> {
    let d = check_mesh(mesh).map_err(at("validate"))?;
    if d.watertight && d.manifold {
        return Ok(());
    }
    Err(Failure::new(
        "validate",
        format!(
            "{what} is not a closed solid: {} boundary edges, {} non-manifold edges, {} inverted pairs",
            d.boundary_edge_count, d.non_manifold_edge_count, d.inverted_adjacent_pairs
        ),
    )
    .with_detail(json!({ "diagnostics": d })))
}

pub fn blank(run: &mut Run, a: &BlankArgs) -> Result<Value, Failure> {
    let spec = read_spec(&a.spec)?;
    run.progress("generating blank");
    let opts = BlankOptions {
        pitch: run.pitch(),
        ..BlankOptions::default()
    };
    let mesh = generate_blank_with(&spec, &opts).map_err(at("blank"))?;
    run.write_mesh("blank.stl", &mesh)?;
    let refs = spec.fiducial_reference_points();
    Ok(json!({
        "blank": solid_summary(&mesh)?,
        "fiducials": spec.fiducial_layout(),
        "fiducial_points_window_frame": refs.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>(),
        "fiducial_triangle_sides": if refs.len() == 3 { Some(triangle_sides(&refs)) } else { None },
    }))
}

pub fn bracket(run: &mut Run, a: &BracketArgs) -> Result<Value, Failure> {
    let spec = read_spec(&a.spec)?;
    let mesh = generate_bracket(&spec.circuit, a.clearance).map_err(at("bracket"))?;
    let profile = BracketProfile::new(&spec.circuit, a.clearance).map_err(at("bracket"))?;
    run.write_mesh("bracket.stl", &mesh)?;
    run.say(format!("channel width {:.3} mm", profile.channel_width()));
    Ok(json!({
        "bracket": solid_summary(&mesh)?,
        "channel_width": profile.channel_width(),
    }))
}

pub fn validate(run: &mut Run, a: &ValidateArgs) -> Result<Value, Failure> {
    let mut mesh = read_mesh(&a.mesh)?;
    let before = solid_summary(&mesh)?;
    if a.repair {
        run.progress("repairing");
        let opts = RepairOptions {
            weld_epsilon: a.weld,
            ..RepairOptions::default()
        };
        mesh = repair_with(&mesh, &opts);
        run.write_mesh(&format!("{}_repaired.stl", stem(&a.mesh)), &mesh)?;
    }
    let after = solid_summary(&mesh)?;
    let d = check_mesh(&mesh).map_err(at("validate"))?;
    run.say(format!(
        "watertight {}, manifold {}, {} boundary edges, {} components",
        d.watertight, d.manifold, d.boundary_edge_count, d.connected_components
    ));
    require_solid(&mesh, "mesh")?;
    Ok(json!({ "input": before, "checked": after }))
}

pub fn shell(run: &mut Run, a: &ShellArgs) -> Result<Value, Failure> {
    let scan = read_mesh(&a.mesh)?;
    require_solid(&scan, "input")?;
    run.progress(format!("shelling at {} mm pitch", run.pitch()));
    let shelled = shell_with(&scan, a.thickness, run.pitch()).map_err(at("shell"))?;
    for t in &shelled.thin_features {
        run.warn(format!(
            "solid region near ({:.1}, {:.1}, {:.1}): only {:.2} mm across",
            t.location[0], t.location[1], t.location[2], t.thickness
        ));
    }
    run.write_mesh(&format!("{}_shell.stl", stem(&a.mesh)), &shelled.mesh)?;
    let input_volume = metrics(&scan).signed_volume;
    Ok(json!({
        "input_volume": input_volume,
        "shell": solid_summary(&shelled.mesh)?,
        "min_wall_thickness": shelled.min_wall_thickness,
        "thin_features": shelled.thin_features,
    }))
}

fn unit(v: [f64; 3], what: &str) -> Result<Vector3<f64>, Failure> {
    let n = Vector3::from(v);
    if n.norm() < 1e-12 {
        return Err(Failure::new("input", format!("{what} must be non-zero")));
    }
    Ok(n.normalize())
}

pub fn split(run: &mut Run, a: &SplitArgs) -> Result<Value, Failure> {
    let solid = read_mesh(&a.mesh)?;
    require_solid(&solid, "input")?;
    let normal = unit(a.normal, "plane normal")?;
    let point = match a.point {
        Some(p) => Point3::from(p),
        None => volume_centroid(&solid).ok_or_else(|| Failure::new("split", "solid has no volume"))?,
    };
    let plane = Plane::through(&point, &normal);
    let (below, above) = split_by_plane(&solid, &plane).map_err(at("split"))?;
    let name = stem(&a.mesh);
    run.write_mesh(&format!("{name}_a.stl"), &above)?;
    run.write_mesh(&format!("{name}_b.stl"), &below)?;
    let whole = metrics(&solid).signed_volume;
    let (va, vb) = (metrics(&above).signed_volume, metrics(&below).signed_volume);
    let rel = ((va + vb) - whole).abs() / whole.abs().max(f64::MIN_POSITIVE);
    run.say(format!("volumes {va:.3} + {vb:.3} of {whole:.3} mm³ (relative difference {rel:.2e})"));
    Ok(json!({
        "plane": plane,
        "input_volume": whole,
        "a": solid_summary(&above)?,
        "b": solid_summary(&below)?,
        "volume_relative_difference": rel,
    }))
}

pub fn place(run: &mut Run, a: &PlaceArgs) -> Result<Value, Failure> {
    let piece = read_mesh(&a.piece)?;
    require_solid(&piece, "piece")?;
    let spec = read_spec(&a.spec)?;
    let points = read_points(&a.fiducials)?;
    let obs = FiducialObservation::new(points, ObservationSource::Manual).map_err(at("register"))?;
    let reg = pose_from_fiducials(&obs, &spec.fiducial_reference_points()).map_err(at("register"))?;
    let pose = bracket_pose(&reg.pose, &spec.circuit);
    let tray = generate_bracket(&spec.circuit, a.clearance).map_err(at("bracket"))?;
    run.progress("placing bracket");
    let (mesh, placement) = place_bracket_with(&piece, &tray, &pose, run.pitch(), a.overlap).map_err(at("bracket"))?;
    run.write_mesh(&format!("{}_bracket.stl", stem(&a.piece)), &mesh)?;
    run.say(format!("registration residual {:.4} mm", reg.residual_rms));
    Ok(json!({
        "registration": reg,
        "bracket_pose": pose,
        "placement": placement,
        "result": solid_summary(&mesh)?,
    }))
}

/// An assembly plan, either bare or inside a pipeline report.
fn read_plan(path: &std::path::Path) -> Result<AssemblyPlan, Failure> {
    let text = read_text(path)?;
    let bad = |e: serde_json::Error| Failure::new("input", format!("{}: {e}", path.display()));
    let value: Value = serde_json::from_str(&text).map_err(bad)?;
    let plan = value
        .pointer("/result/plan")
        .or_else(|| value.get("plan"))
        .cloned()
        .unwrap_or(value);
    serde_json::from_value(plan).map_err(bad)
}

pub fn fasten(run: &mut Run, a: &FastenArgs) -> Result<Value, Failure> {
    let part_a = read_mesh(&a.a)?;
    let part_b = read_mesh(&a.b)?;
    require_solid(&part_a, "piece A")?;
    require_solid(&part_b, "piece B")?;
    let mut plan = read_plan(&a.plan)?;
    if let Some(p) = run.pitch_override() {
        plan.pitch = p;
    }
    run.progress(format!("{} fasteners", plan.fasteners.len()));
    let parts = add_fasteners(&part_a, &part_b, &plan).map_err(at("fasteners"))?;
    run.write_mesh(&format!("{}_fastened.stl", stem(&a.a)), &parts.part_a)?;
    run.write_mesh(&format!("{}_fastened.stl", stem(&a.b)), &parts.part_b)?;
    run.say(format!(
        "interference {:.3} mm³ (bound {:.3})",
        parts.report.interference_volume, parts.report.interference_bound
    ));
    Ok(json!({ "plan": plan, "parts": parts.report }))
}

pub fn pipeline(run: &mut Run, a: &PipelineArgs) -> Result<Value, Failure> {
    let name = a.name.clone().unwrap_or_else(|| stem(&a.scan));
    run.set_report_name(format!("{name}_report.json"));
    let scan = read_mesh(&a.scan)?;
    let spec = read_spec(&a.spec)?;
    let points = read_points(&a.fiducials)?;
    let obs = FiducialObservation::new(points, ObservationSource::Manual).map_err(at("register"))?;
    let mut overrides = match &a.plan {
        Some(p) => {
            let text = read_text(p)?;
            serde_json::from_str::<PlanOverrides>(&text)
                .map_err(|e| Failure::new("input", format!("{}: {e}", p.display())))?
        }
        None => PlanOverrides::default(),
    };
    if let Some(p) = run.pitch_override() {
        overrides.pitch = Some(p);
    }
    run.progress("running pipeline");
    let out = run_pipeline(&scan, &spec, &obs, &overrides).map_err(|e| Failure::new(e.stage.to_string(), e.error))?;
    for w in &out.report.warnings {
        run.warn(w.clone());
    }
    run.write_mesh(&format!("{name}_a.stl"), &out.parts.part_a)?;
    run.write_mesh(&format!("{name}_b.stl"), &out.parts.part_b)?;
    let r = &out.report;
    run.say(format!(
        "volume conservation error {:.2e}, interference {:.3} mm³ (bound {:.3})",
        r.conservation.relative_error, r.parts.interference_volume, r.parts.interference_bound
    ));
    serde_json::to_value(&out.report).map_err(at("export"))
}
