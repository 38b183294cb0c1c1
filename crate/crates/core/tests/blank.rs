use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use shellforge::blank::{
    generate_blank, generate_blank_with, generate_bracket, BlankOptions, BlankSpec, BracketProfile, CircuitSpec,
    FlexibleLink, Keepout, WindowShape, WindowSpec, DEFAULT_FIT_CLEARANCE,
};
use shellforge::mesh::{metrics, transform, validate, Aabb};
use shellforge::voxel::{csg_apply, sdf, voxelize, CsgOp, ScalarField, DEFAULT_VOXEL_CAP};

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
fn running_example_bbox() {
    let spec = BlankSpec::new(CircuitSpec::board(38.0, 51.0, 4.0));
    let m = generate_blank(&spec).unwrap();
    let d = validate(&m).unwrap();
    assert!(d.watertight && d.manifold, "{d:?}");
    let e = metrics(&m).bbox.unwrap().extent();
    for (a, want) in [44.0, 57.0, 10.0].iter().enumerate() {
        assert!((e[a] - want).abs() <= 0.2, "{e:?}");
    }
}

#[test]
fn zero_expansion_cube() {
    let mut spec = BlankSpec::new(CircuitSpec::board(10.0, 10.0, 10.0));
    spec.expansion = 0.0;
    let v = metrics(&generate_blank(&spec).unwrap()).signed_volume;
    assert!((v - 1000.0).abs() <= 30.0, "{v}");
}

#[test]
fn bumps_add_three_hemispheres() {
    let with = mouse();
    let mut without = mouse();
    // same collar and window, no bumps
    without.fiducials = Some(Vec::new());
    let opts = BlankOptions::default();
    let mw = generate_blank_with(&with, &opts).unwrap();
    let mo = generate_blank_with(&without, &opts).unwrap();
    assert!(validate(&mw).unwrap().watertight);
    let diff = metrics(&mw).signed_volume - metrics(&mo).signed_volume;
    let oracle = 3.0 * (2.0 / 3.0) * PI;
    assert!((diff - oracle).abs() <= 0.1 * oracle, "{diff} vs {oracle}");
}

#[test]
fn window_face_is_flush() {
    let m = generate_blank(&mouse()).unwrap();
    // highest non-bump point sits on the window plane
    let spec = mouse();
    let apexes = spec.fiducial_reference_points();
    let top = m
        .vertices
        .iter()
        .filter(|v| apexes.iter().all(|a| (Vector3::new(v.x - a.x, v.y - a.y, 0.0)).norm() > 1.2))
        .map(|v| v.z)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(top.abs() <= 0.2, "{top}");
    for a in &apexes {
        let near = m.vertices.iter().filter(|v| (*v - a).norm() < 0.3).count();
        assert!(near > 0, "no surface near bump apex {a}");
    }
}

#[test]
fn links_and_keepouts_are_printed() {
    let mut spec = BlankSpec::new(CircuitSpec::board(20.0, 10.0, 2.0));
    spec.circuit.keepouts.push(Keepout {
        name: Some("battery".into()),
        min: [12.0, -3.0, 0.0],
        max: [18.0, 3.0, 3.0],
    });
    spec.circuit.flexible_links.push(FlexibleLink {
        from: [-10.0, 0.0, 1.0],
        to: [-30.0, 0.0, 1.0],
        slack_length: 25.0,
    });
    let m = generate_blank(&spec).unwrap();
    assert!(validate(&m).unwrap().watertight);
    let b = metrics(&m).bbox.unwrap();
    assert!(b.max.x >= 18.0 + 3.0 - 0.2);
    assert!(b.min.x <= -30.0 - 0.6);
    // the bowed ribbon rises above the board envelope
    assert!(b.max.z > 2.0 + 3.0 + 1.0);
}

#[test]
fn bracket_running_example() {
    let c = mouse().circuit;
    let m = generate_bracket(&c, DEFAULT_FIT_CLEARANCE).unwrap();
    assert!(validate(&m).unwrap().watertight);
    let p = BracketProfile::new(&c, DEFAULT_FIT_CLEARANCE).unwrap();
    assert!((p.channel_width() - 38.3).abs() < 1e-9);
    // long side runs along x
    let e = metrics(&m).bbox.unwrap().extent();
    assert!((e.x - 51.3).abs() < 1e-9);
}

#[test]
fn bracket_admits_board() {
    let c = mouse().circuit;
    let pitch = 0.2;
    let bracket = generate_bracket(&c, DEFAULT_FIT_CLEARANCE).unwrap();
    let bf = voxelize(&bracket, pitch, 3).unwrap();
    let board_to_k = c.board_to_bracket();
    let [l, w, h] = c.board_size;
    let board = shellforge::mesh::primitives::box_mesh(Point3::new(-l / 2.0, -w / 2.0, 0.0), Point3::new(l / 2.0, w / 2.0, h));
    let board = transform(&board, &board_to_k).unwrap();
    let kb = voxelize(&board, pitch, 3).unwrap();
    let overlap = csg_apply(&bf, &kb, CsgOp::Intersect).unwrap();
    // voxel noise: a layer of samples on the contact area
    assert!(overlap.inside_volume() <= 1.0, "{}", overlap.inside_volume());
}

#[test]
fn spec_from_json() {
    let text = r#"{
        "circuit": {
            "board_size": [38, 51, 4],
            "window": {"diameter": 14, "center_offset": [0, 15], "standoff": 8},
            "tilt_deg": 10
        }
    }"#;
    let spec: BlankSpec = serde_json::from_str(text).unwrap();
    assert_eq!(spec, mouse());
    assert!(serde_json::from_str::<BlankSpec>(r#"{"circuit":{"board_size":[1,1,1]},"bogus":1}"#).is_err());
}

fn envelope_probe(spec: &BlankSpec, pitch: f64) -> (f64, f64) {
    let m = generate_blank_with(
        spec,
        &BlankOptions {
            pitch,
            voxel_cap: DEFAULT_VOXEL_CAP,
        },
    )
    .unwrap();
    let [l, w, h] = spec.circuit.board_size;
    let half = Vector3::new(l, w, h) / 2.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in m.vertices.iter().step_by(7) {
        let d = sdf::aabox(&Point3::new(v.x, v.y, v.z - h / 2.0), &half);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn expanded_surface_keeps_its_distance(
        l in 4.0f64..20.0, w in 4.0f64..20.0, h in 1.0f64..6.0, e in 0.5f64..4.0,
    ) {
        let pitch = 0.25;
        let mut spec = BlankSpec::new(CircuitSpec::board(l, w, h));
        spec.expansion = e;
        let (lo, hi) = envelope_probe(&spec, pitch);
        prop_assert!(lo >= e - pitch && hi <= e + pitch, "{lo} {hi} vs {e}");
    }

    #[test]
    fn default_fiducials_are_scalene(d in 1.0f64..40.0) {
        let mut spec = mouse();
        spec.circuit.window.as_mut().unwrap().diameter = d;
        prop_assert!(spec.validate().is_ok());
    }
}

#[test]
fn tool_field_matches_analytic_bounds() {
    // the blank of a bare board is the rounded box the field describes
    let spec = BlankSpec::new(CircuitSpec::board(6.0, 4.0, 2.0));
    let m = generate_blank_with(&spec, &BlankOptions { pitch: 0.1, voxel_cap: DEFAULT_VOXEL_CAP }).unwrap();
    let f = ScalarField::from_fn(
        &Aabb::new(Point3::new(-6.0, -5.0, -4.0), Point3::new(6.0, 5.0, 6.0)),
        0.1,
        2,
        DEFAULT_VOXEL_CAP,
        |p| sdf::rounded_box(&Point3::new(p.x, p.y, p.z - 1.0), &Vector3::new(6.0, 5.0, 4.0), 3.0),
    )
    .unwrap();
    let v = metrics(&m).signed_volume;
    assert!((v - f.inside_volume()).abs() / v < 0.02);
}
