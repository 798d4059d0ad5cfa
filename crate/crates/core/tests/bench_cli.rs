use std::path::Path;
use std::process::Command;

use dfn_core::bench::{run, ReferenceMode, RowStatus, RunConfig, TestCase, CSV_HEADER, TEST1_DELTAS};
use dfn_core::solver::Variant;
use dfn_core::DfnError;

fn dfn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dfn"))
}

fn quick(test: TestCase, variant: Variant) -> RunConfig {
    let mut cfg = RunConfig::new(test, variant);
    cfg.deltas = vec![0.22, 0.1];
    cfg.weights = vec![1.0, 0.1];
    cfg.compute_cond = false;
    cfg
}

#[test]
fn full_test1_sweep_has_one_row_per_point() {
    let mut total = 0;
    for variant in [Variant::Natural, Variant::MeshDep] {
        let mut cfg = RunConfig::new(TestCase::Test1, variant);
        cfg.compute_cond = false;
        let report = run(&cfg).unwrap();
        assert_eq!(report.rows.len(), 25);
        assert!(report.all_ok(), "{:?}", report.rows.iter().find(|r| r.status == RowStatus::Failed));
        assert_eq!(report.rates.len(), 5);
        for (k, row) in report.rows.iter().enumerate() {
            assert_eq!(row.delta, TEST1_DELTAS[k / 5]);
            let r = row.report.as_ref().unwrap();
            assert!(r.err_l2.is_finite() && r.err_h1.is_finite() && r.err_1delta >= r.err_h1);
        }
        total += report.rows.len();
    }
    assert_eq!(total, 2 * 5 * 5);
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut cfg = quick(TestCase::Test1, Variant::Natural);
    cfg.deltas.clear();
    assert!(matches!(run(&cfg), Err(DfnError::Config(_))));
    let mut cfg = quick(TestCase::Test1, Variant::Natural);
    cfg.deltas = vec![0.1, 0.22];
    assert!(matches!(run(&cfg), Err(DfnError::Config(_))));
    let mut cfg = quick(TestCase::Test1, Variant::Natural);
    cfg.weights = vec![0.1, -1.0];
    assert!(matches!(run(&cfg), Err(DfnError::Config(_))));
    let mut cfg = quick(TestCase::Test1, Variant::Natural);
    cfg.reference = Some(ReferenceMode::FineMesh { factor: 2.0 });
    assert!(matches!(run(&cfg), Err(DfnError::Config(_))));
}

#[test]
fn reports_are_reproducible_byte_for_byte() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let mut cfg = quick(TestCase::Test2B, Variant::MeshDep);
        cfg.compute_cond = true;
        cfg.out_dir = Some(dir.path().to_path_buf());
        run(&cfg).unwrap();
    }
    let read = |d: &Path| std::fs::read(d.join("test2B_meshdep.csv")).unwrap();
    let (a, b) = (read(dirs[0].path()), read(dirs[1].path()));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(dirs[0].path().join("test2B_meshdep.json").exists());
}

#[test]
fn fine_mesh_reference_tracks_the_analytic_one() {
    let mut analytic = quick(TestCase::Test2A, Variant::Natural);
    analytic.weights = vec![0.1];
    let mut fine = analytic.clone();
    fine.reference = Some(ReferenceMode::FineMesh { factor: 4.0 });
    let (a, f) = (run(&analytic).unwrap(), run(&fine).unwrap());
    assert_eq!(f.reference, ReferenceMode::FineMesh { factor: 4.0 });
    for (ra, rf) in a.rows.iter().zip(&f.rows) {
        let (ea, ef) = (ra.report.as_ref().unwrap().err_h1, rf.report.as_ref().unwrap().err_h1);
        assert!((ea - ef).abs() < 0.3 * ea, "analytic {ea} vs fine {ef}");
    }
}

#[test]
fn cli_writes_reports_and_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfn()
        .args(["run", "--test", "test2A", "--variant", "natural", "--deltas", "0.22,0.1", "--weights", "0.1"])
        .args(["--no-cond", "--dump-meshes", "--dump-matrix", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("test2A / natural"));
    let csv = std::fs::read_to_string(dir.path().join("test2A_natural.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let names: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert!(names.iter().any(|n| n.starts_with("mesh_f1_")));
    assert!(names.iter().any(|n| n.ends_with(".mtx")));
}

#[test]
fn cli_configuration_errors_exit_with_one() {
    let cases: [&[&str]; 5] = [
        &["run", "--deltas", ""],
        &["run", "--variant", "banana"],
        &["run", "--test", "test3"],
        &["run", "--reference", "fine:2"],
        &["run", "--unknown-flag"],
    ];
    for args in cases {
        let out = dfn().args(args).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(dfn().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn cli_runs_a_custom_network_with_a_known_solution() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("patch.json");
    // two perpendicular squares sharing the head 1 + 2y along x = 0
    std::fs::write(
        &net,
        r#"{
          "fractures": [
            { "id": 1, "origin": [0, 0, 0], "axes": [[1, 0, 0], [0, 1, 0]],
              "vertices": [[-1, 0], [1, 0], [1, 1], [-1, 1]],
              "dirichlet": [
                { "edge": 0, "value": "1 + 0.5 * x + 2.0 * y" }, { "edge": 1, "value": "1 + 0.5 * x + 2.0 * y" },
                { "edge": 2, "value": "1 + 0.5 * x + 2.0 * y" }, { "edge": 3, "value": "1 + 0.5 * x + 2.0 * y" }
              ],
              "exact": { "value": "1 + 0.5 * x + 2.0 * y", "gradient": ["0.5", "2.0"] } },
            { "id": 2, "origin": [0, 0, 0], "axes": [[0, 0, 1], [0, 1, 0]],
              "vertices": [[-1, 0], [1, 0], [1, 1], [-1, 1]],
              "dirichlet": [
                { "edge": 0, "value": "1 - 0.7 * x + 2.0 * y" }, { "edge": 1, "value": "1 - 0.7 * x + 2.0 * y" },
                { "edge": 2, "value": "1 - 0.7 * x + 2.0 * y" }, { "edge": 3, "value": "1 - 0.7 * x + 2.0 * y" }
              ],
              "exact": { "value": "1 - 0.7 * x + 2.0 * y", "gradient": ["-0.7", "2.0"] } }
          ]
        }"#,
    )
    .unwrap();
    let out = dfn()
        .args(["run", "--variant", "meshdep", "--deltas", "0.3,0.2", "--weights", "1", "--no-cond", "--network"])
        .arg(&net)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("patch_meshdep.csv")).unwrap();
    let header: Vec<&str> = CSV_HEADER.split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[col("status")], "ok");
        assert!(f[col("errH1")].parse::<f64>().unwrap() < 1e-9, "{line}");
    }
}

#[test]
fn failed_points_are_reported_with_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("broken.json");
    // the forcing is NaN everywhere, so every solve is rejected
    std::fs::write(
        &net,
        r#"{ "fractures": [
            { "id": 1, "origin": [0, 0, 0], "axes": [[1, 0, 0], [0, 1, 0]],
              "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]],
              "dirichlet": [{ "edge": 0, "value": "0" }], "forcing": "math::sqrt(x - 5)",
              "exact": { "value": "0", "gradient": ["0", "0"] } } ] }"#,
    )
    .unwrap();
    let out = dfn()
        .args(["run", "--variant", "natural", "--deltas", "0.3,0.2", "--weights", "1", "--no-cond", "--network"])
        .arg(&net)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("failed"));

    let mut cfg = RunConfig::new(TestCase::Custom(net.clone()), Variant::Natural);
    cfg.deltas = vec![0.3, 0.2];
    cfg.weights = vec![1.0];
    cfg.compute_cond = false;
    let report = run(&cfg).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert!(report.rows.iter().all(|r| r.status == RowStatus::Failed && r.message.is_some() && r.report.is_none()));
}

#[test]
fn missing_analytic_solution_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("plain.json");
    std::fs::write(
        &net,
        r#"{ "fractures": [
            { "id": 1, "origin": [0, 0, 0], "axes": [[1, 0, 0], [0, 1, 0]],
              "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]],
              "dirichlet": [{ "edge": 0, "value": "x" }] } ] }"#,
    )
    .unwrap();
    let out = dfn()
        .args(["run", "--deltas", "0.3", "--weights", "1", "--reference", "analytic", "--network"])
        .arg(&net)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // without an explicit reference a fine-mesh solve stands in
    let mut cfg = RunConfig::new(TestCase::Custom(net), Variant::Natural);
    cfg.deltas = vec![0.3];
    cfg.weights = vec![1.0];
    cfg.compute_cond = false;
    let report = run(&cfg).unwrap();
    assert_eq!(report.reference, ReferenceMode::FineMesh { factor: 4.0 });
    assert!(report.all_ok());
}
