//! End-to-end runs of the `vsl` binary with a schema check of every file it
//! writes.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use vsl_core::io::{read_table, Table};

const SMALL: &str = r#"
L_km = 4.0
n = 2
delta_s = 30.0
T = 4
epsilon = 50.0
beta = 0.95
gamma = [40, 80, 120]

[[segments]]
f_bar = 3.1e4
rho_bar = 1050
u_bar = 140

[[segments]]
f_bar = 3.1e4
rho_bar = 1050
u_bar = 140
f_U = 2.7e4
rho_U = 1050

[generator]
n_samples = 2
seed = 11
rho0 = [150, 300]
omega = [[2e4, 2.4e4], [-1500, 2500]]

[validation]
T_val = 8
n_val = 40
"#;

fn vsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vsl"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_small(dir: &Path) -> String {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p.display().to_string()
}

/// Header as expected, a seed in the preamble, and every non-speed column
/// numeric.
fn check(path: &Path, header: &[&str], rows: usize) -> Table {
    let t = read_table(path).unwrap();
    assert_eq!(t.header, header, "{}", path.display());
    assert!(t.preamble.get("seed").is_some(), "{}", path.display());
    assert_eq!(t.rows.len(), rows, "{}", path.display());
    for (c, name) in header.iter().enumerate() {
        for r in &t.rows {
            let cell = &r[c];
            let ok = match *name {
                "u_kmh" => cell.split(' ').all(|v| v.parse::<f64>().is_ok()),
                "status" | "termination" => !cell.is_empty(),
                "guarantee_holds" | "eta_at_bound" => cell == "true" || cell == "false",
                _ => cell.parse::<f64>().is_ok(),
            };
            assert!(ok, "{}: column {name} has `{cell}`", path.display());
        }
    }
    t
}

#[test]
fn every_subcommand_emits_well_formed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_small(dir.path());
    let out = |name: &str| dir.path().join(name).display().to_string();

    let o = vsl(&["simulate", "--scenario", &sc, "--u", "80,80", "--out", &out("sim")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = check(
        &dir.path().join("sim/trajectories.csv"),
        &["sample", "edge", "t", "time_min", "density_veh_km"],
        2 * 2 * 4,
    );
    assert_eq!(t.preamble.get("seed"), Some("11"));

    let o = vsl(&["simulate", "--scenario", &sc, "--model", "ctm", "--horizon", "8", "--out", &out("ctm")]);
    assert!(o.status.success());
    let t = check(
        &dir.path().join("ctm/trajectories.csv"),
        &["sample", "edge", "t", "time_min", "density_veh_km"],
        2 * 2 * 8,
    );
    assert!(t.floats("density_veh_km").unwrap().iter().all(|&d| (0.0..=1050.0).contains(&d)));

    let o = vsl(&["certify", "--scenario", &sc, "--u", "120,80", "--out", &out("cert")]);
    assert!(o.status.success());
    check(
        &dir.path().join("cert/certificate.csv"),
        &["u_kmh", "epsilon", "j_hat", "lambda_star", "status", "sample_mean_h"],
        1,
    );
    let bp = read_table(&dir.path().join("cert/breakpoints.csv")).unwrap();
    assert_eq!(bp.header, ["lambda", "f_lambda"]);
    assert!(!bp.rows.is_empty());

    let o = vsl(&["solve", "--scenario", &sc, "--gap", "0", "--out", &out("solve")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let res = check(
        &dir.path().join("solve/result.csv"),
        &["edge", "speed_kmh", "grid_index", "critical_density_veh_km"],
        2,
    );
    assert!(res.floats("speed_kmh").unwrap().iter().all(|v| [40.0, 80.0, 120.0].contains(v)));
    let log = read_table(&dir.path().join("solve/log.csv")).unwrap();
    let log = check(
        &dir.path().join("solve/log.csv"),
        &["k", "u_kmh", "ubp_bound", "ub", "obj", "lb", "milp_nodes", "wall_s", "eta_at_bound"],
        log.rows.len(),
    );
    let ub = log.floats("ub").unwrap();
    assert!(ub.windows(2).all(|w| w[1] <= w[0]));
    let summary = check(
        &dir.path().join("solve/summary.csv"),
        &[
            "u_kmh", "j_hat", "ub", "lb", "rel_gap", "termination", "iterations", "discarded", "elapsed_s", "ubp_rows",
            "ubp_cols", "ubp_binaries", "ubp_nonzeros",
        ],
        1,
    );
    let j_solve = summary.floats("j_hat").unwrap()[0];
    assert!(dir.path().join("solve/samples/omega.csv").exists());

    let o = vsl(&["brute-force", "--scenario", &sc, "--out", &out("bf")]);
    assert!(o.status.success());
    let bf = check(&dir.path().join("bf/brute_force.csv"), &["u_kmh", "j_star", "evaluated", "invalid"], 1);
    let j_star = bf.floats("j_star").unwrap()[0];
    assert!((j_solve - j_star).abs() <= 1e-6 * j_star.abs().max(1.0));

    // the solver's saved samples feed validation through --samples
    let samples = out("solve/samples");
    let o = vsl(&["validate", "--scenario", &sc, "--samples", &samples, "--u", "120,80", "--nval", "30", "--out", &out("val")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = check(
        &dir.path().join("val/validation_summary.csv"),
        &["u_kmh", "n_val", "t_val", "j_hat", "mean_h", "guarantee_holds", "max_conservation_error"],
        1,
    );
    // training samples came from a file; the validation stream still derives
    // from the scenario seed
    assert_eq!(s.preamble.get("seed"), Some("none"));
    let expected = 11u64.wrapping_add(0x5EED_0000_0001).to_string();
    assert_eq!(s.preamble.get("validation_seed"), Some(expected.as_str()));
    check(&dir.path().join("val/validation_h.csv"), &["sample", "h"], 30);
    check(
        &dir.path().join("val/validation_density.csv"),
        &["edge", "t", "time_min", "mean_density_veh_km", "max_density_veh_km", "critical_density_veh_km"],
        2 * 8,
    );
}

#[test]
fn full_scale_simulation_has_one_row_per_sample_edge_and_step() {
    let dir = tempfile::tempdir().unwrap();
    let sc = common::scenario_path("incident_highway.toml").display().to_string();
    let a = dir.path().join("a").display().to_string();
    let b = dir.path().join("b").display().to_string();
    assert!(vsl(&["simulate", "--scenario", &sc, "--out", &a]).status.success());
    assert!(vsl(&["simulate", "--scenario", &sc, "--out", &b]).status.success());
    check(
        &dir.path().join("a/trajectories.csv"),
        &["sample", "edge", "t", "time_min", "density_veh_km"],
        3 * 5 * 20,
    );
    let fa = std::fs::read(dir.path().join("a/trajectories.csv")).unwrap();
    let fb = std::fs::read(dir.path().join("b/trajectories.csv")).unwrap();
    assert_eq!(fa, fb);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_small(dir.path());
    let out = dir.path().join("o").display().to_string();

    let missing = dir.path().join("none.toml").display().to_string();
    assert_eq!(vsl(&["certify", "--scenario", &missing, "--u", "80,80", "--out", &out]).status.code(), Some(2));
    // 120 km/h is outside the incident edge's band
    assert_eq!(vsl(&["certify", "--scenario", &sc, "--u", "80,120", "--out", &out]).status.code(), Some(2));
    assert_eq!(vsl(&["solve", "--scenario", &sc, "--gap", "-1", "--out", &out]).status.code(), Some(2));
    assert_eq!(vsl(&["frobnicate"]).status.code(), Some(2));

    // an incident capacity no grid speed can respect
    let jammed = SMALL.replace("f_U = 2.7e4", "f_U = 1.0e3");
    let p = dir.path().join("jammed.toml");
    std::fs::write(&p, jammed).unwrap();
    let p = p.display().to_string();
    assert_eq!(vsl(&["certify", "--scenario", &p, "--u", "80,80", "--out", &out]).status.code(), Some(3));

    // no profile is certifiable with a zero radius and jammed initial densities
    let tight = SMALL.replace("epsilon = 50.0", "epsilon = 0.0").replace("rho0 = [150, 300]", "rho0 = [900, 1000]");
    let p = dir.path().join("tight.toml");
    std::fs::write(&p, tight).unwrap();
    let p = p.display().to_string();
    assert_eq!(vsl(&["solve", "--scenario", &p, "--out", &out]).status.code(), Some(3));
    assert_eq!(vsl(&["brute-force", "--scenario", &p, "--out", &out]).status.code(), Some(3));
}
