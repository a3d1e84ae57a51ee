use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples/scenarios")
        .join(format!("{name}.scenario"))
}

fn dads(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dads"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_csv_starting_at_initial_output_norm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dads(&[
        "simulate",
        s(&scenario("fig1_dads")),
        "--t-end",
        "0.05",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("fig1_dads.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "Ynorm").unwrap();
    let first = rdr.records().next().unwrap().unwrap();
    let y0: f64 = first[col].parse().unwrap();
    assert!((y0 - 1.25f64.sqrt()).abs() < 1e-12);
    assert!((y0 - 1.11803).abs() < 1e-5);
    assert!(String::from_utf8_lossy(&out.stdout).contains("control_energy"));
}

#[test]
fn persistent_disturbance_scenario_runs_to_the_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dads(&[
        "simulate",
        s(&scenario("fig4_dads")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("fig4_dads.csv")).unwrap();
    let last = rdr.records().last().unwrap().unwrap();
    let t: f64 = last[0].parse().unwrap();
    assert_eq!(t, 10.0);
}

#[test]
fn malformed_file_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scenario");
    fs::write(&bad, "name = \"x\"\n[system\nbuiltin = \"wingrock\"\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = dads(&["simulate", s(&bad), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert!(!out_dir.exists());
}

#[test]
fn parameter_constraints_are_enforced_at_load() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("ineq34"))
        .unwrap()
        .replace("K = 14.0", "K = 13.0");
    let p = dir.path().join("weak.scenario");
    fs::write(&p, text).unwrap();
    assert_eq!(code(&dads(&["verify", s(&p), "--out", s(dir.path())])), 2);
}

#[test]
fn unknown_subcommand_or_flag_exits_2() {
    assert_eq!(code(&dads(&["frobnicate"])), 2);
    assert_eq!(
        code(&dads(&["simulate", s(&scenario("fig1_dads")), "--bogus"])),
        2
    );
}

#[test]
fn explicit_integrator_divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("fig1_dads"))
        .unwrap()
        .replace("integrator = \"radau-iia\"", "integrator = \"rk4\"");
    let p = dir.path().join("stiff.scenario");
    fs::write(&p, text).unwrap();
    let out = dads(&[
        "simulate",
        s(&p),
        "--dt",
        "1e-2",
        "--t-end",
        "1",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synthesize_reports_stage_bookkeeping() {
    let dir = tempfile::tempdir().unwrap();
    let out = dads(&[
        "synthesize",
        s(&scenario("wingrock_synth")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.path().join("wingrock_synth_synthesis.txt")).unwrap();
    for (j, (c, a)) in [("2", "0.5"), ("1", "1"), ("0.5", "2")].iter().enumerate() {
        assert!(
            report.contains(&format!(
                "stage {}: dim={} rate_c={c} gain_a={a}",
                j + 1,
                j + 1
            )),
            "{report}"
        );
    }
    assert!(report.contains("PASS dissipation-synthesized"));
    assert!(dir.path().join("wingrock_synth_checks.csv").exists());
}

#[test]
fn bad_majorant_exits_4_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let out = dads(&[
        "synthesize",
        s(&scenario("bad_majorant")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 4);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("level 3") && err.contains("fails at ["),
        "{err}"
    );
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for (name, expected) in [("ineq34", 0), ("ineq38", 0), ("mutation", 5)] {
        let out = dads(&["verify", s(&scenario(name)), "--out", s(dir.path())]);
        assert_eq!(
            code(&out),
            expected,
            "{name}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
        let csv = fs::read_to_string(dir.path().join(format!("{name}_checks.csv"))).unwrap();
        assert!(csv.starts_with("name,passed,worst_margin,tolerance,n_samples,witness"));
    }
}

#[test]
fn verify_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let d = dir.path().join(sub);
        assert_eq!(
            code(&dads(&[
                "verify",
                s(&scenario("ineq34")),
                "--seed",
                seed,
                "--out",
                s(&d)
            ])),
            0
        );
        fs::read_to_string(d.join("ineq34_checks.csv")).unwrap()
    };
    assert_eq!(run("11", "a"), run("11", "b"));
    assert_ne!(run("11", "a"), run("12", "c"));
}

#[test]
fn compare_preconditions() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&dads(&[
            "compare",
            s(&scenario("fig1_dads")),
            "--out",
            s(dir.path())
        ])),
        2
    );

    let text = fs::read_to_string(scenario("fig1_sigma04"))
        .unwrap()
        .replace("t_end = 10.0", "t_end = 5.0");
    let p = dir.path().join("short.scenario");
    fs::write(&p, text).unwrap();
    let out = dads(&[
        "compare",
        s(&scenario("fig1_dads")),
        s(&p),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));
}

#[test]
fn compare_disturbance_free_triple() {
    let dir = tempfile::tempdir().unwrap();
    let out = dads(&[
        "compare",
        s(&scenario("fig1_dads")),
        s(&scenario("fig1_sigma04")),
        s(&scenario("fig1_sigma0")),
        "--t-end",
        "2",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("compare.csv")).unwrap();
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let sup_gain: f64 = rows[0][3].parse().unwrap();
    assert!(sup_gain.is_finite() && sup_gain > 1.0);
    assert!(rows.iter().all(|r| &r[7] == "false"));
}

#[test]
fn compare_persistent_triple_flags_drift() {
    let dir = tempfile::tempdir().unwrap();
    let out = dads(&[
        "compare",
        s(&scenario("fig4_dads")),
        s(&scenario("fig4_sigma04")),
        s(&scenario("fig4_sigma0")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let drift_line = stdout
        .lines()
        .find(|l| l.starts_with("fig4_sigma0 "))
        .unwrap();
    assert!(drift_line.trim_end().ends_with("drift"), "{stdout}");
    assert!(stdout.contains("PASS drift-contrast"));
    // The DADS law spends less control energy than either baseline.
    let mut rdr = csv::Reader::from_path(dir.path().join("compare.csv")).unwrap();
    let energy: Vec<f64> = rdr
        .records()
        .map(|r| r.unwrap()[5].parse().unwrap())
        .collect();
    assert!(energy[0] < energy[1] && energy[0] < energy[2]);
}
