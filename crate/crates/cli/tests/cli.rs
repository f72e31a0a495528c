use std::fs;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reusealloc"))
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn gap_instance_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.json");
    ok(&bin().args(["gen", "--gap", "8", "-o"]).arg(&path).output().unwrap());

    let s: serde_json::Value =
        serde_json::from_str(&ok(&bin().arg("solve-lp").arg(&path).arg("--check-dual").output().unwrap())).unwrap();
    assert!((s["lambda"].as_f64().unwrap() - 0.75).abs() < 1e-9);
    assert!((s["explicit_dual_objective"].as_f64().unwrap() - 0.75).abs() < 1e-9);
    assert!(s["duality_gap"].as_f64().unwrap() <= 1e-9);
    assert!(s["duals"]["reward[0]"].is_number());

    let lp_path = dir.path().join("gap_e.lp");
    let e: serde_json::Value = serde_json::from_str(&ok(&bin()
        .arg("solve-lp")
        .arg(&path)
        .args(["--program", "e", "--horizon", "4", "--dump"])
        .arg(&lp_path)
        .output()
        .unwrap()))
    .unwrap();
    assert!((e["lambda"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(fs::read_to_string(&lp_path).unwrap().starts_with("sense max\n"));
}

#[test]
fn expectation_program_needs_a_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.json");
    ok(&bin().args(["gen", "--gap", "4", "-o"]).arg(&path).output().unwrap());
    let out = bin().arg("solve-lp").arg(&path).args(["--program", "e"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "horizon = 0\n[instance]\nsource = \"synthetic\"\n[policy]\nname = \"null\"\n").unwrap();
    assert_eq!(bin().arg("run").arg(&cfg).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("run").arg(dir.path().join("missing.toml")).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["gen", "--gap", "3", "-o", "x.json"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn run_honours_output_dir_override() {
    let dir = tempfile::tempdir().unwrap();
    let redirected = dir.path().join("elsewhere");
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "horizon = 200\nseeds = [0, 1]\noutput_dir = \"never-created\"\n\
         [instance]\nsource = \"synthetic\"\nn_products = 4\nn_customers = 5\nmax_assortment = 2\nxi = 0.25\n\
         [policy]\nname = \"imwu\"\n",
    )
    .unwrap();
    let out = ok(&bin()
        .arg("run")
        .arg(&cfg)
        .current_dir(dir.path())
        .env("REUSEALLOC_OUTPUT_DIR", &redirected)
        .output()
        .unwrap());
    assert!(out.contains("policy imwu"));
    assert!(!dir.path().join("never-created").exists());
    for f in ["imwu_seed0_metrics.csv", "imwu_seed1_metrics.csv", "imwu_summary.json"] {
        assert!(redirected.join(f).is_file(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(redirected.join("imwu_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["violations"], 0);
    assert_eq!(summary["normalized_reward_mean"].as_array().unwrap().len(), 200);
}

#[test]
fn synthetic_instance_solves_by_column_generation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("syn.json");
    ok(&bin().args(["gen", "--customers", "20", "-o"]).arg(&path).output().unwrap());
    let s: serde_json::Value = serde_json::from_str(&ok(&bin().arg("solve-lp").arg(&path).output().unwrap())).unwrap();
    assert!((s["lambda"].as_f64().unwrap() - 0.294847520).abs() < 1e-8);
}
