use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use eulerfem::diagnostics::TimeSeries;
use eulerfem::elements::Family;
use eulerfem::harness_io::{
    operator_suite, read_csv, run_operator_check, run_shear_layer, run_taylor_green, write_csv, write_vtk_to,
    Experiment, SimulationConfig, CSV_HEADER,
};
use eulerfem::mesh::Mesh;
use eulerfem::spaces::{build_space, interpolate, interpolate_scalar};

const GOLDEN_VTK: &str = include_str!("golden/constant_n2.vtk");

#[test]
fn csv_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    let mut s = TimeSeries::default();
    s.push(0.0, 34.26397572133, 80.616461, 6.2e-13, 0).unwrap();
    s.push(0.04, 1.0 / 3.0, f64::MIN_POSITIVE, 0.0, 4).unwrap();
    s.push(0.08, std::f64::consts::PI, 1e300, 5e-324, 17).unwrap();
    write_csv(&s, &path).unwrap();
    assert_eq!(read_csv(&path).unwrap(), s);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
}

#[test]
fn empty_series_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    write_csv(&TimeSeries::default(), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "t,energy,enstrophy,div_norm,newton_iters\n");
    assert!(read_csv(&path).unwrap().is_empty());
}

#[test]
fn csv_with_wrong_header_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "time,energy\n0,1\n").unwrap();
    assert!(read_csv(&path).is_err());
}

#[test]
fn vtk_of_constant_fields_matches_golden_file() {
    let m = Arc::new(Mesh::structured(2, false).unwrap());
    let dg = build_space(&m, Family::DG, 0).unwrap();
    let rt = build_space(&m, Family::RT, 0).unwrap();
    let w = interpolate_scalar(&dg, |_| 2.5);
    let u = interpolate(&rt, |_| [1.0, -0.5]);
    let mut buf = Vec::new();
    write_vtk_to(&mut buf, "constant fields", &[("vorticity", &w), ("velocity", &u)]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), GOLDEN_VTK);
}

#[test]
fn vtk_rejects_bad_field_names_and_empty_input() {
    let m = Arc::new(Mesh::structured(2, false).unwrap());
    let dg = build_space(&m, Family::DG, 0).unwrap();
    let w = interpolate_scalar(&dg, |_| 1.0);
    let mut buf = Vec::new();
    assert!(write_vtk_to(&mut buf, "x", &[]).is_err());
    assert!(write_vtk_to(&mut buf, "x", &[("two words", &w)]).is_err());
}

#[test]
fn corrupted_orientation_fails_normal_continuity() {
    let m = Arc::new(Mesh::structured(4, true).unwrap());
    let good = build_space(&m, Family::BDM, 1).unwrap();
    let report = operator_suite(&good, 3, 42).unwrap();
    assert!(report.iter().all(|o| o.passed), "{report:?}");

    let bad = Arc::new(good.with_flipped_sign(5, 0));
    let report = operator_suite(&bad, 3, 42).unwrap();
    let continuity = report.iter().find(|o| o.name.ends_with("normal continuity")).unwrap();
    assert!(!continuity.passed);
    assert!(continuity.to_string().starts_with("[FAIL]"));
}

#[test]
fn operator_check_passes_at_small_scale() {
    let cfg = SimulationConfig {
        resolutions: vec![3],
        trials: 3,
        ..SimulationConfig::defaults(Experiment::OperatorCheck)
    };
    let report = run_operator_check(&cfg).unwrap();
    assert!(report.all_passed(), "{report}");
    assert!(report.outcomes.iter().any(|o| o.name.contains("kelvin")));
}

#[test]
fn experiments_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let tg = SimulationConfig {
        resolutions: vec![3, 4],
        family: Family::RT,
        order: 0,
        dt: 0.1,
        t_end: 0.2,
        out: Some(dir.path().to_path_buf()),
        ..SimulationConfig::defaults(Experiment::TaylorGreen)
    };
    let report = run_taylor_green(&tg).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.orders.len(), 1);
    for row in &report.rows {
        let series = read_csv(row.csv.as_ref().unwrap()).unwrap();
        assert_eq!(series.len(), 3);
    }
    assert!(dir.path().join("taylor_green_RT0_upwind_errors.csv").exists());

    let shear = SimulationConfig {
        resolutions: vec![4],
        dt: 0.1,
        t_end: 0.4,
        out: Some(dir.path().to_path_buf()),
        ..SimulationConfig::defaults(Experiment::ShearLayer)
    };
    let reports = run_shear_layer(&shear).unwrap();
    let r = &reports[0];
    assert_eq!(r.snapshots.iter().map(|s| s.step).collect::<Vec<_>>(), vec![0, 2, 4]);
    assert!(r.snapshots.iter().all(|s| s.vtk.as_ref().is_some_and(|p| p.exists())));
    assert!(r.max_relative_energy_drift() < 1e-9);
    assert!(tg_run_is_reproducible(&tg, &report.errors()));
}

fn tg_run_is_reproducible(cfg: &SimulationConfig, errors: &[f64]) -> bool {
    let again = SimulationConfig { out: None, ..cfg.clone() };
    run_taylor_green(&again).unwrap().errors() == errors
}

fn cli(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_eulerfem"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout) = cli(&["operator-check", "--n", "3", "--trials", "2"], dir.path());
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("[PASS]"));

    let (code, stdout) = cli(&["shear-layer", "--n", "3", "--dt", "0.1", "--t-end", "0.2", "--out", "res"], dir.path());
    assert_eq!(code, 0, "{stdout}");
    assert!(dir.path().join("res/shear_layer_BDM1_upwind_n3.csv").exists());

    for bad in [
        vec!["taylor-green", "--n", "1"],
        vec!["taylor-green", "--family", "DG"],
        vec!["shear-layer", "--dt", "0.03"],
        vec!["operator-check", "--mode", "sideways"],
    ] {
        assert_eq!(cli(&bad, dir.path()).0, 2, "{bad:?}");
    }

    std::fs::write(dir.path().join("bad.toml"), "colour = 1\n").unwrap();
    assert_eq!(cli(&["taylor-green", "--config", "bad.toml"], dir.path()).0, 2);
    std::fs::write(dir.path().join("tg.toml"), "experiment = \"taylor_green\"\n").unwrap();
    assert_eq!(cli(&["shear-layer", "--config", "tg.toml"], dir.path()).0, 2);

    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let args = ["shear-layer", "--n", "3", "--dt", "0.1", "--t-end", "0.1", "--out", "blocker/sub"];
    assert_eq!(cli(&args, dir.path()).0, 1);
}
