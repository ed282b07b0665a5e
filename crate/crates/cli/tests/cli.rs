use std::process::{Command, Output};

fn saltlib(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saltlib"))
        .args(args)
        .env_remove("SALTLIB_THREADS")
        .output()
        .expect("run saltlib")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn simulate_writes_trajectory_and_event_tables() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let events = dir.path().join("events.csv");
    let o = saltlib(&[
        "simulate",
        "--model",
        "bouncing-ball",
        "--e",
        "0.8",
        "--t",
        "0.7",
        "--out",
        traj.to_str().unwrap(),
        "--events",
        events.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = std::fs::read_to_string(traj).unwrap();
    assert!(traj.starts_with("t,mode,x0,x1\n0,0,1,0\n"));
    let events = std::fs::read_to_string(events).unwrap();
    let rows: Vec<&str> = events.lines().collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], "t_event,transition,name,from,to,guard_residual,transversality");
    let t: f64 = rows[1].split(',').next().unwrap().parse().unwrap();
    assert!((t - (2.0 / 9.81_f64).sqrt()).abs() < 1e-9);
}

#[test]
fn zeno_execution_exits_2() {
    let o = saltlib(&["simulate", "--model", "bouncing-ball", "--e", "0.1", "--t", "2", "--max-events", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Zeno"));
}

#[test]
fn bad_affine_model_exits_5_with_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"format": "saltlib-affine-v1", "modes": [{"name": "a", "a": [[0, 1]], "c": [1]}], "transitions": []}"#,
    )
    .unwrap();
    let o = saltlib(&["simulate", "--affine", path.to_str().unwrap(), "--t", "1"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains("/modes/0/a"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(saltlib(&["simulate", "--t", "1"]).status.code(), Some(64));
    assert_eq!(saltlib(&["frobnicate"]).status.code(), Some(64));
    let o = saltlib(&["simulate", "--model", "constant-flow", "--e", "0.5", "--t", "1"]);
    assert_eq!(o.status.code(), Some(64));
    let o = saltlib(&["simulate", "--model", "bouncing-ball", "--x0", "1,2,3", "--t", "1"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn saltation_reports_structure_and_oracle() {
    let o = saltlib(&["saltation", "--model", "ball-drop", "--t", "1", "--closed-form", "--oracle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["event"]["name"], "(U,S)");
    assert_eq!(doc["structure"]["equal_diagonal_blocks"], true);
    assert_eq!(doc["expected"]["identity_reset"], false);
    assert!(doc["closed_form"]["max_abs_diff"].as_f64().unwrap() < 1e-9);
    assert_eq!(doc["oracle"]["pass"], true);
}

#[test]
fn monodromy_of_elastic_ball_is_marginal() {
    let o = saltlib(&["monodromy", "--model", "bouncing-ball"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["verdict"], "marginal");
    // Impact, then the apex transition back into the falling mode.
    assert_eq!(doc["events"], 2);
}

#[test]
fn monodromy_of_open_trajectory_exits_9() {
    let o = saltlib(&["monodromy", "--model", "bouncing-ball", "--period", "0.3"]);
    assert_eq!(o.status.code(), Some(9));
}

#[test]
fn covariance_csv_has_one_row_per_sample() {
    let o = saltlib(&["covariance", "--model", "bouncing-ball", "--e", "0.5", "--t", "0.5", "--sigma0", "1e-4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("t,mode,var0,var1,eig0,eig1\n0,0,0.0001,0.0001,"));
    // 500 grid samples, the event time twice, and the initial row.
    assert_eq!(text.lines().count(), 1 + 501 + 2);
}

#[test]
fn lqr_reports_one_gain_per_step() {
    let o = saltlib(&["lqr", "--model", "affine-bounce", "--t", "2.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["gains"].as_array().unwrap().len(), 250);
    assert_eq!(doc["values"].as_array().unwrap().len(), 251);
    assert_eq!(doc["events"].as_array().unwrap().len(), 1);
}

#[test]
fn output_file_is_replaced_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("phi.json");
    std::fs::write(&out, "stale").unwrap();
    let o = saltlib(&["monodromy", "--model", "bouncing-ball", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with('{') && text.ends_with("}\n"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn verify_is_reproducible_across_thread_counts() {
    let run = |threads: &str| {
        let o = saltlib(&["--threads", threads, "verify", "--seed", "3", "--samples", "2000"]);
        // A small sample may fail the Monte Carlo tolerance; the report must
        // still be identical.
        assert!(matches!(o.status.code(), Some(0) | Some(6)), "{}", stderr(&o));
        o.stdout
    };
    let a = run("1");
    let b = run("2");
    assert!(!a.is_empty());
    assert_eq!(a, b);
}
