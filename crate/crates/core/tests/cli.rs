use std::process::{Command, Output};

use serde_json::Value;

fn qcurv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcurv")).args(args).env("QCURV_THREADS", "1").output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report on stdout")
}

#[test]
fn constants_csv_has_one_row_per_dimension() {
    let out = qcurv(&["constants", "--n", "5..8", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("n,Q_sphere,omega_n,Y4,Theta4"));
    for (i, line) in lines[1..].iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], (5 + i).to_string());
        for res in &cells[5..] {
            assert!(res.parse::<f64>().unwrap() < 1e-12, "{line}");
        }
    }
    assert!(lines[1].starts_with("5,105/8,"));
}

#[test]
fn constants_latex_matches_csv_values() {
    let csv = String::from_utf8(qcurv(&["constants", "--n", "6", "--format", "csv"]).stdout).unwrap();
    let tex = String::from_utf8(qcurv(&["constants", "--n", "6", "--format", "latex"]).stdout).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let tex_row = tex.lines().find(|l| l.starts_with("6 &")).unwrap();
    let cells: Vec<&str> = tex_row.trim_end_matches(" \\\\").split(" & ").collect();
    assert_eq!(cells.join(","), row);
    assert!(tex.contains("\\begin{tabular}"));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["constants", "--n", "8..5"][..],
        &["constants", "--n", "3..6"],
        &["constants", "--n", "five"],
        &["verify", "nope"],
        &["verify", "sphere", "--trials", "0"],
        &["asymptotics", "--case", "n9", "--n", "10"],
        &["asymptotics", "--case", "flat", "--n", "5", "--lambdas", "0.1,0.05,0.1,0.01"],
        &["spectral", "--n", "5", "--damping", "1.5"],
        &["parametrix", "--n", "9", "--seed", "1", "--flat"],
        &["frobnicate"],
    ] {
        let out = qcurv(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn parametrix_n9_matches_closed_form() {
    let out = qcurv(&["parametrix", "--n", "9", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["schema"], "qcurv-report/1");
    assert_eq!(r["data"]["psi4_matches_closed_form"], true);
    assert_eq!(r["data"]["psi4_matches_n9_form"], true);
}

#[test]
fn parametrix_n8_reports_log_coefficient() {
    let out = qcurv(&["parametrix", "--n", "8", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let c = r["checks"].as_array().unwrap().iter().find(|c| c["id"] == "parametrix.n8_log_coefficient").unwrap();
    assert_eq!(c["pass"], true);
    assert_eq!(c["expected"], c["computed"]);
    assert_eq!(c["source"], "closed_form");
}

#[test]
fn parametrix_flat_is_bare_power() {
    let out = qcurv(&["parametrix", "--n", "7", "--flat", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("0,0,"));
}

#[test]
fn parametrix_accepts_a_jet_file() {
    let dir = std::env::temp_dir().join(format!("qcurv-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let jet = qcurv::tensor::Jet::random(9, 3);
    let path = dir.join("jet.json");
    std::fs::write(&path, jet.to_json().to_string()).unwrap();
    let out = qcurv(&["parametrix", "--n", "9", "--jet", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&out)["data"]["psi4_matches_closed_form"], true);

    std::fs::write(&path, "{\"n\": 9}").unwrap();
    assert_eq!(qcurv(&["parametrix", "--n", "9", "--jet", path.to_str().unwrap()]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn verify_weyl_passes() {
    let out = qcurv(&["verify", "weyl", "--n", "6", "--trials", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["pass"], true);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn verify_spectral_reports_duality_and_invariance() {
    let out = qcurv(&["verify", "spectral", "--n", "5", "--L", "64"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let ids: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert!(ids.iter().any(|i| i.ends_with("y4_theta4_duality")));
    assert!(ids.iter().any(|i| i.ends_with("mobius_theta4_invariance")));
}

#[test]
fn report_file_is_written_and_timings_are_opt_in() {
    let dir = std::env::temp_dir().join(format!("qcurv-report-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("r.json");
    let out = qcurv(&["--report", path.to_str().unwrap(), "verify", "bubble", "--n", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains("wall_time_ms"));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["command"], "verify bubble");

    let timed = qcurv(&["--timings", "verify", "bubble", "--n", "5"]);
    assert!(String::from_utf8(timed.stdout).unwrap().contains("wall_time_ms"));

    let missing = dir.join("no/such/dir/r.json");
    assert_eq!(qcurv(&["--report", missing.to_str().unwrap(), "verify", "bubble", "--n", "5"]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn spectral_command_runs_from_both_starts() {
    for init in ["constant", "perturbed"] {
        let out = qcurv(&["spectral", "--n", "6", "--L", "64", "--iters", "50", "--init", init]);
        assert_eq!(out.status.code(), Some(0), "{init}");
        let r = report(&out);
        assert_eq!(r["data"]["values"].as_array().unwrap().len(), 51);
    }
}

#[test]
fn under_resolved_invariance_is_a_check_failure() {
    // the t = 4 pull-back of a constant carries modes beyond degree 16
    let out = qcurv(&["spectral", "--n", "6", "--L", "16", "--iters", "5"]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["pass"], false);
    assert!(r["checks"].as_array().unwrap().iter().any(|c| c["id"] == "spectral.mobius_theta4_invariance" && c["pass"] == false));
}

#[test]
fn asymptotics_high_case_fits() {
    let out = qcurv(&["asymptotics", "--case", "high", "--n", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["pass"], true);
}

#[test]
fn thread_count_does_not_change_reports() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_qcurv"))
            .args(["verify", "spectral", "--n", "6"])
            .env("QCURV_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("3"));
}
