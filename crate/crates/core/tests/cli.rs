//! End-to-end runs of the `willmore` binary: fixtures, reports, exit codes,
//! determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_willmore"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("willmore_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn make_fixture(dir: &Path, name: &str, level: u32, file: &str) -> PathBuf {
    let out = dir.join(file);
    let status = bin()
        .args([
            "make-fixture",
            "--name",
            name,
            "--level",
            &level.to_string(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(status.status.success(), "{:?}", status);
    out
}

#[test]
fn fixture_and_energy_report() {
    let dir = workdir("energy");
    let mesh = make_fixture(&dir, "sphere", 4, "sphere4.off");

    let out = bin()
        .args(["energy", "--mesh", mesh.to_str().unwrap(), "--sigma", "0.1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let w = report["results"]["energy"]["willmore"].as_f64().unwrap();
    let total = report["results"]["energy"]["total"].as_f64().unwrap();
    let pi = std::f64::consts::PI;
    assert!((w - 4.0 * pi).abs() / (4.0 * pi) < 0.01, "W = {w}");
    assert!((total - 4.16 * pi).abs() / (4.16 * pi) < 0.01, "total = {total}");
    assert_eq!(report["command"], "energy");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn gauge_and_grad_check() {
    let dir = workdir("gauge");
    let mesh = make_fixture(&dir, "ellipsoid:1:1:2", 3, "ell.off");

    let out = bin()
        .args(["gauge", "--mesh", mesh.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["results"]["onofri"]["onofri_value"].as_f64().unwrap() > 0.0);
    assert!(report["results"]["barycenter_norm"].as_f64().unwrap() < 1e-6);

    let out = bin()
        .args([
            "grad-check",
            "--mesh",
            mesh.to_str().unwrap(),
            "--sigma",
            "0.1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["results"]["max_rel_deviation"].as_f64().unwrap() < 1e-4);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn residual_and_bubbles() {
    let dir = workdir("residual");
    let mesh = make_fixture(&dir, "sphere", 3, "sphere3.off");
    let out = bin()
        .args(["residual", "--mesh", mesh.to_str().unwrap(), "--sigma", "0.1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["results"]["willmore_el_norm"].as_f64().unwrap() < 1e-2);

    let bump = make_fixture(&dir, "bump-sphere:0.6:0.08", 4, "bump.off");
    let out = bin()
        .args([
            "bubbles",
            "--mesh",
            bump.to_str().unwrap(),
            "--epsilon",
            "3.0",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let bubbles = report["results"]["bubbles"].as_array().unwrap();
    assert_eq!(bubbles.len(), 1, "one concentration ball: {bubbles:?}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn residue_subcommand_with_loop_list() {
    let dir = workdir("residue");
    let mesh = make_fixture(&dir, "sphere", 4, "sphere4.off");
    // a valid vertex loop around the reference north region, built in-process
    let im = willmore::mesh::io::read_immersion(&mesh, None).unwrap();
    let axis = im.mesh.points()[0];
    let lp = willmore::variation::residue::EdgeLoop::cap_boundary_about(&im, axis, 0.55).unwrap();
    let loop_arg = lp
        .vertices()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let out = bin()
        .args([
            "residue",
            "--mesh",
            mesh.to_str().unwrap(),
            "--loop",
            &loop_arg,
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["results"]["willmore_residue_norm"].as_f64().unwrap() < 1e-3);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn minmax_over_path_directory() {
    let dir = workdir("minmax");
    // build a 5-frame path around the unit sphere with a bumped middle
    let mesh = willmore::mesh::build_icosphere(2).unwrap();
    let sphere = willmore::mesh::Immersion::reference_sphere(mesh).unwrap();
    let frames: Vec<_> = (0..5)
        .map(|i| {
            let t = i as f64 / 4.0;
            let bump = 0.2 * (std::f64::consts::PI * t).sin();
            sphere.map_positions(|p| p * (1.0 + bump * p.x * p.x)).unwrap()
        })
        .collect();
    let path = willmore::minmax::init_path(
        frames[0].clone(),
        frames[4].clone(),
        willmore::minmax::PathInterior::Frames(frames[1..4].to_vec()),
    )
    .unwrap();
    let pdir = dir.join("path");
    willmore::minmax::path_io::save_path(&pdir, &path).unwrap();

    let out = bin()
        .args([
            "minmax",
            "--path",
            pdir.to_str().unwrap(),
            "--schedule",
            "0.1,0.05",
            "--inner-steps",
            "5",
            "--max-sweeps",
            "3",
            "--struwe-tol",
            "50",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let trace = report["results"]["report"]["beta_trace"].as_array().unwrap();
    assert_eq!(trace.len(), 2);
    assert!(report["results"]["everting"] == false);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn reports_are_deterministic_modulo_timing() {
    let dir = workdir("det");
    let mesh = make_fixture(&dir, "sphere", 3, "s.off");
    let run = || -> serde_json::Value {
        let out = bin()
            .args([
                "energy",
                "--mesh",
                mesh.to_str().unwrap(),
                "--sigma",
                "0.1",
                "--seed",
                "42",
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v.as_object_mut().unwrap().remove("timing_ms");
        v
    };
    assert_eq!(run(), run(), "reports must be identical up to timing");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_file_with_flag_override() {
    let dir = workdir("cfg");
    let mesh = make_fixture(&dir, "sphere", 2, "s.off");
    let cfg = dir.join("job.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"mesh": "{}", "sigma": 0.3}}"#,
            mesh.to_str().unwrap().replace('\\', "/")
        ),
    )
    .unwrap();
    let out = bin()
        .args([
            "energy",
            "--config",
            cfg.to_str().unwrap(),
            "--sigma",
            "0.1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["results"]["energy"]["sigma"].as_f64().unwrap(), 0.1);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes() {
    // missing mesh file -> I/O error, exit 2
    let out = bin()
        .args(["energy", "--mesh", "/nonexistent/mesh.off", "--sigma", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");

    // bad sigma -> parameter error, exit 5
    let dir = workdir("codes");
    let mesh = make_fixture(&dir, "sphere", 1, "s.off");
    let out = bin()
        .args(["energy", "--mesh", mesh.to_str().unwrap(), "--sigma", "1.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5), "{out:?}");

    // non-edge loop -> parameter error, exit 5
    let out = bin()
        .args([
            "residue",
            "--mesh",
            mesh.to_str().unwrap(),
            "--loop",
            "0,3,0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5), "{out:?}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn mesh_roundtrip_preserves_positions() {
    let dir = workdir("roundtrip");
    let mesh = make_fixture(&dir, "ellipsoid:1.3:0.8:1.1", 2, "e.obj");
    let im = willmore::mesh::io::read_immersion(&mesh, None).unwrap();
    let out2 = dir.join("copy.obj");
    willmore::mesh::io::write_immersion(&out2, &im).unwrap();
    let im2 = willmore::mesh::io::read_immersion(&out2, None).unwrap();
    assert_eq!(im.positions(), im2.positions(), "bit-exact roundtrip");
    std::fs::remove_dir_all(&dir).ok();
}
