use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cop_lqr::io::read_solution_csv;
use cop_lqr::{last_period_policy, solve_backward, ExecState, GammaSchedule, ModelParams};
use serde_json::{json, Value};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_cop-lqr");

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn shipped_json() -> Value {
    serde_json::from_str(&fs::read_to_string(shipped("example.json")).unwrap()).unwrap()
}

fn write_config(dir: &TempDir, cfg: &Value) -> PathBuf {
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    run_env(args, config, out, None)
}

fn run_env(args: &[&str], config: &Path, out: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(&args[..1])
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(&args[1..])
        .env_remove("COP_LQR_THREADS");
    if let Some(t) = threads {
        cmd.env("COP_LQR_THREADS", t);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_shipped_config_writes_six_positive_definite_rows() {
    let dir = TempDir::new().unwrap();
    let o = run(&["solve"], &shipped("example.json"), dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("policy.csv")).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(!text.contains('\r'));
    let summary = read_json(dir.path().join("summary.json"));
    assert_eq!(summary["positive_definite"], json!(vec![true; 6]));
    assert_eq!(summary["all_positive_definite"], json!(true));
    assert_eq!(
        read_json(dir.path().join("policy.json"))
            .as_array()
            .unwrap()
            .len(),
        6
    );

    let params = ModelParams::uniform(
        6,
        0.1,
        &GammaSchedule::Linear {
            start: 0.1,
            end: 0.6,
        },
        100.0,
        0.5,
    )
    .unwrap();
    let solved = solve_backward(&params).unwrap();
    let back = read_solution_csv(text.as_bytes(), 100.0).unwrap();
    for &(q, l) in &[(5.0, 5.0), (-3.0, 0.5), (12.0, 9.0)] {
        let x = ExecState::new(q, l);
        for n in 0..6 {
            assert!((back.values[n].value_at(x) - solved.values[n].value_at(x)).abs() <= 1e-12);
            assert!((back.policies[n].action(x) - solved.policies[n].action(x)).abs() <= 1e-12);
        }
    }
}

#[test]
fn one_step_config_matches_last_period_formula() {
    let dir = TempDir::new().unwrap();
    let mut cfg = shipped_json();
    cfg["model"]["n_steps"] = json!(1);
    let o = run(
        &["solve", "--format", "csv"],
        &write_config(&dir, &cfg),
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(!dir.path().join("policy.json").exists());
    let text = fs::read_to_string(dir.path().join("policy.csv")).unwrap();
    let table = read_solution_csv(text.as_bytes(), 100.0).unwrap();
    let lp = last_period_policy(
        &ModelParams::uniform(1, 0.1, &GammaSchedule::Constant(0.1), 100.0, 0.5).unwrap(),
    );
    assert_eq!(table.policies.len(), 1);
    let p = table.policies[0];
    assert!((p.alpha - lp.alpha).abs() <= 1e-12 && (p.beta_q - lp.beta_q).abs() <= 1e-12);
    assert!((p.beta_lambda - lp.beta_lambda).abs() <= 1e-12);
}

#[test]
fn invalid_configs_exit_2_with_line() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(shipped("example.json")).unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, text.replace("\"dt\": 0.1", "\"dt\": 2.0")).unwrap();
    let o = run(&["solve"], &bad, dir.path());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("eta*dt < 1") && err.contains("line 5"),
        "{err}"
    );

    fs::write(
        &bad,
        text.replace("\"seed\": 42,", "\"seed\": 42,\n    \"sede\": 1,"),
    )
    .unwrap();
    let o = run(&["simulate"], &bad, dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sede"));

    let o = run(&["solve"], &dir.path().join("missing.json"), dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn verify_passes_on_shipped_config() {
    let dir = TempDir::new().unwrap();
    let o = run(&["verify"], &shipped("example.json"), dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report = read_json(dir.path().join("verify.json"));
    assert_eq!(report["passed"], json!(true));
    for c in report["checks"].as_array().unwrap() {
        if c["name"] == "bellman_fixed_point" {
            assert!(c["max_residual"].as_f64().unwrap() <= 1e-6);
        }
    }
}

#[test]
fn corrupted_table_fails_verification() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&run(&["solve"], &shipped("example.json"), dir.path())),
        0
    );
    let text = fs::read_to_string(dir.path().join("policy.csv")).unwrap();
    let corrupted: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let mut cells: Vec<String> = line.split(',').map(String::from).collect();
            if i == 2 {
                let p11: f64 = cells[4].parse().unwrap();
                cells[4] = (3.0 * p11).to_string();
            }
            cells.join(",")
        })
        .collect();
    let table = dir.path().join("corrupt.csv");
    fs::write(&table, corrupted.join("\n") + "\n").unwrap();
    let o = run(
        &["verify", "--tables", table.to_str().unwrap()],
        &shipped("example.json"),
        dir.path(),
    );
    assert_eq!(code(&o), 4);
    let report = read_json(dir.path().join("verify.json"));
    assert_eq!(report["passed"], json!(false));
    let argmin = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "argmin_agreement")
        .unwrap();
    assert_eq!(argmin["passed"], json!(false));
}

#[test]
fn grid_config_reports_gap_within_tolerance() {
    let dir = TempDir::new().unwrap();
    let o = run(&["verify"], &shipped("grid.json"), dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report = read_json(dir.path().join("verify.json"));
    let grid = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "grid_dp")
        .unwrap();
    assert!(grid["max_residual"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn simulate_reports_and_logs_paths() {
    let dir = TempDir::new().unwrap();
    let mut cfg = shipped_json();
    cfg["simulation"]["n_paths"] = json!(2000);
    let config = write_config(&dir, &cfg);
    let paths = dir.path().join("paths.csv");
    let o = run(
        &["simulate", "--paths-out", paths.to_str().unwrap()],
        &config,
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("|mean - V_0| / stderr"));
    let report = read_json(dir.path().join("report.json"));
    assert_eq!(report["n_paths"], json!(2000));
    assert!(report["z_score"].as_f64().unwrap() <= 4.0);
    let log = fs::read_to_string(&paths).unwrap();
    assert_eq!(
        log.lines().next().unwrap(),
        "path,n,q,lambda,u,W,stage_cost"
    );
    assert_eq!(log.lines().count(), 1 + 2000 * 7);
}

#[test]
fn noiseless_single_path_costs_v0() {
    let dir = TempDir::new().unwrap();
    let mut cfg = shipped_json();
    cfg["model"]["eta"] = json!(0.0);
    cfg["simulation"]["n_paths"] = json!(1);
    cfg["simulation"]["initial_state"]["lambda"] = json!(0.0);
    let o = run(&["simulate"], &write_config(&dir, &cfg), dir.path());
    assert_eq!(code(&o), 0);
    let report = read_json(dir.path().join("report.json"));
    assert_eq!(report["stderr"], Value::Null);
    let (cost, v0) = (
        report["mean_cost"].as_f64().unwrap(),
        report["model_value"].as_f64().unwrap(),
    );
    assert!((cost - v0).abs() <= 1e-12 * v0.abs(), "{cost} vs {v0}");
}

#[test]
fn overlay_is_labelled_and_abort_breach_exits_5() {
    let dir = TempDir::new().unwrap();
    let mut cfg = shipped_json();
    cfg["simulation"]["n_paths"] = json!(1000);
    cfg["simulation"]["mode"] = json!("overlay");
    let o = run(&["simulate"], &write_config(&dir, &cfg), dir.path());
    assert_eq!(code(&o), 0);
    let report = read_json(dir.path().join("report.json"));
    assert_eq!(report["label"], json!("model-inconsistent overlay"));

    cfg["simulation"]["mode"] = json!("raw");
    cfg["simulation"]["initial_state"] = json!({ "q": 20.0, "lambda": 1.0 });
    let o = run(&["simulate"], &write_config(&dir, &cfg), dir.path());
    assert_eq!(code(&o), 5);
}

#[test]
fn reports_are_bit_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let mut cfg = shipped_json();
    cfg["simulation"]["n_paths"] = json!(5000);
    let config = write_config(&dir, &cfg);
    let mut reports = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}"));
        assert_eq!(
            code(&run_env(
                &["simulate", "--seed", "99"],
                &config,
                &out,
                Some(threads)
            )),
            0
        );
        reports.push(fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let out = dir.path().join("other-seed");
    assert_eq!(code(&run(&["simulate", "--seed", "100"], &config, &out)), 0);
    assert_ne!(fs::read(out.join("report.json")).unwrap(), reports[0]);
}

#[test]
fn bad_thread_count_exits_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&run_env(
            &["solve"],
            &shipped("example.json"),
            dir.path(),
            Some("0")
        )),
        2
    );
}

#[test]
fn single_point_sweep_composes_solve_and_simulate() {
    let dir = TempDir::new().unwrap();
    let mut cfg = shipped_json();
    cfg["simulation"]["n_paths"] = json!(3000);
    let config = write_config(&dir, &cfg);
    assert_eq!(code(&run(&["solve"], &config, dir.path())), 0);
    assert_eq!(code(&run(&["simulate"], &config, dir.path())), 0);
    let o = run(
        &[
            "sweep",
            "--axis",
            "eta",
            "--range",
            "0.5:0.5:1",
            "--format",
            "json",
        ],
        &config,
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let row = &read_json(dir.path().join("sweep.json"))[0];
    let summary = read_json(dir.path().join("summary.json"));
    let report = read_json(dir.path().join("report.json"));
    assert_eq!(row["status"], json!("ok"));
    assert_eq!(row["initial_value"], summary["initial_value"]);
    assert_eq!(row["initial_action"], summary["initial_action"]);
    assert_eq!(row["mean_cost"], report["mean_cost"]);
    assert_eq!(row["snipe_share"], report["snipe_share"]);
    assert_eq!(
        row["mean_completion_shortfall"],
        report["mean_completion_shortfall"]
    );
}

fn sweep_actions(dir: &TempDir, config: &Path, range: &str) -> Vec<f64> {
    let o = run(
        &[
            "sweep", "--axis", "eta", "--range", range, "--format", "json",
        ],
        config,
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    read_json(dir.path().join("sweep.json"))
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["initial_action"].as_f64().unwrap())
        .collect()
}

#[test]
fn eta_sweep_action_is_continuous() {
    let dir = TempDir::new().unwrap();
    let mut cfg = shipped_json();
    cfg["simulation"]["n_paths"] = json!(10);
    let config = write_config(&dir, &cfg);
    let max_jump = |u: &[f64]| {
        u.windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max)
    };
    let coarse = max_jump(&sweep_actions(&dir, &config, "0:9:41"));
    let fine = max_jump(&sweep_actions(&dir, &config, "0:9:81"));
    assert!(fine <= 0.6 * coarse, "{fine} vs {coarse}");
}

#[test]
fn sweep_marks_failed_points_and_continues() {
    let dir = TempDir::new().unwrap();
    let mut cfg = shipped_json();
    cfg["simulation"]["n_paths"] = json!(100);
    let o = run(
        &[
            "sweep", "--axis", "eta", "--range", "0:12:4", "--format", "csv",
        ],
        &write_config(&dir, &cfg),
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let statuses: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(statuses[0], "ok");
    assert_eq!(statuses[3], "invalid");
    assert!(text
        .lines()
        .next()
        .unwrap()
        .starts_with("eta,status,V_0,u_0"));
}
