//! Black-box tests of the command-line interface: exit codes, output
//! shape, and byte-level reproducibility of every command from its own
//! emitted config. Each test drives the compiled binary exactly as a
//! shell user would.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ctxrobust")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("failed to spawn ctxrobust")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout was not UTF-8")
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr was not UTF-8")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "expected exit {code}\nstdout:\n{}\nstderr:\n{}",
        stdout_str(out),
        stderr_str(out)
    );
}

/// Fresh per-test scratch directory.
fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("ctxrobust-cli-tests").join(tag);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).expect("create scratch dir");
    dir
}

fn read_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&read_bytes(path))
        .unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) {
    std::fs::write(path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("scratch paths are UTF-8")
}

// ---------------------------------------------------------------- gen

#[test]
fn gen_is_deterministic_and_documents_itself() {
    let dir = scratch("gen-determinism");
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    let out = run(&["gen", "--name", "stock", "--n", "60", "--seed", "3", "--out", path_str(&a)]);
    assert_exit(&out, 0);
    let out = run(&["gen", "--name", "stock", "--n", "60", "--seed", "3", "--out", path_str(&b)]);
    assert_exit(&out, 0);
    assert_eq!(read_bytes(&a), read_bytes(&b), "same invocation produced different bytes");

    let csv = String::from_utf8(read_bytes(&a)).unwrap();
    assert!(csv.starts_with("context,x1,y\n"), "unexpected header: {}", csv.lines().next().unwrap());
    assert_eq!(csv.lines().count(), 61, "header plus one row per sample");

    let meta = read_json(&dir.join("a.csv.meta.json"));
    assert_eq!(meta["metadata"]["scenario"], "stock");
    assert_eq!(meta["metadata"]["n"], 60);
    assert!(meta["metadata"]["algorithm"].is_string());
    assert!(meta["coefficients"].is_array());
    assert_eq!(meta["config"]["seed"], 3);

    // The sidecar is the same on both runs, so it identifies the dataset,
    // not the output location.
    assert_eq!(read_bytes(&dir.join("a.csv.meta.json")), read_bytes(&dir.join("b.csv.meta.json")));
}

#[test]
fn gen_reproduces_from_its_emitted_config() {
    let dir = scratch("gen-config");
    let first = dir.join("first.csv");
    let out =
        run(&["gen", "--name", "classify", "--n", "40", "--seed", "9", "--out", path_str(&first)]);
    assert_exit(&out, 0);

    let meta = read_json(&dir.join("first.csv.meta.json"));
    let cfg_path = dir.join("gen.json");
    write_json(&cfg_path, &meta["config"]);

    let again = dir.join("again.csv");
    let out = run(&["gen", "--config", path_str(&cfg_path), "--out", path_str(&again)]);
    assert_exit(&out, 0);
    assert_eq!(read_bytes(&first), read_bytes(&again));
    assert_eq!(
        read_bytes(&dir.join("first.csv.meta.json")),
        read_bytes(&dir.join("again.csv.meta.json"))
    );
}

#[test]
fn gen_rejects_a_sample_size_for_the_fixed_count_desk() {
    let dir = scratch("gen-desk-n");
    let out =
        run(&["gen", "--name", "desk", "--n", "50", "--out", path_str(&dir.join("d.csv"))]);
    assert_exit(&out, 2);
    assert!(
        stderr_str(&out).contains("desk"),
        "error should name the scenario: {}",
        stderr_str(&out)
    );
}

// ---------------------------------------------------------------- fit

fn gen_desk_csv(dir: &Path) -> PathBuf {
    let data = dir.join("desk.csv");
    let out = run(&["gen", "--name", "desk", "--seed", "11", "--out", path_str(&data)]);
    assert_exit(&out, 0);
    data
}

#[test]
fn fit_emits_a_resolved_config_that_reproduces_it() {
    let dir = scratch("fit-roundtrip");
    let data = gen_desk_csv(&dir);

    let first = dir.join("fit1.json");
    let out = run(&[
        "fit",
        "--data",
        path_str(&data),
        "--loss",
        "newsvendor",
        "--method",
        "robust",
        "--beta",
        "0.99",
        "--out",
        path_str(&first),
    ]);
    assert_exit(&out, 0);
    // The file holds exactly what was printed.
    assert_eq!(stdout_str(&out).as_bytes(), read_bytes(&first).as_slice());

    let doc = read_json(&first);
    assert_eq!(doc["method"], "robust");
    assert_eq!(doc["regime"], "interior");
    assert!(doc["theta"].is_array());
    assert!(doc["p_star"].is_array());
    assert!(doc["p_hat"].is_array());
    // On the boundary, the tilted distribution uses the whole radius.
    let eps = doc["eps_bits"].as_f64().unwrap();
    let kl = doc["kl_bits"].as_f64().unwrap();
    assert!((eps - kl).abs() <= 1e-8, "eps {eps} vs attained kl {kl}");

    let cfg_path = dir.join("fit.json");
    write_json(&cfg_path, &doc["config"]);
    let second = dir.join("fit2.json");
    let out = run(&["fit", "--config", path_str(&cfg_path), "--out", path_str(&second)]);
    assert_exit(&out, 0);
    assert_eq!(read_bytes(&first), read_bytes(&second));
}

#[test]
fn fit_maps_input_problems_to_exit_2() {
    let dir = scratch("fit-errors");

    // Missing data file.
    let out = run(&["fit", "--data", path_str(&dir.join("absent.csv")), "--loss", "newsvendor"]);
    assert_exit(&out, 2);

    // Malformed row: wrong arity on line 3.
    let bad = dir.join("bad.csv");
    std::fs::write(&bad, "context,x1,y\n1,0.5,2.0\n1,0.5\n").unwrap();
    let out = run(&["fit", "--data", path_str(&bad), "--loss", "newsvendor"]);
    assert_exit(&out, 2);
    assert!(stderr_str(&out).contains("line 3"), "should cite the line: {}", stderr_str(&out));

    // Confidence level outside (0, 1].
    let data = gen_desk_csv(&dir);
    let out = run(&[
        "fit", "--data", path_str(&data), "--loss", "newsvendor", "--method", "robust",
        "--beta", "1.5",
    ]);
    assert_exit(&out, 2);

    // Logistic labels must be 0/1; desk demand values are not.
    let out = run(&["fit", "--data", path_str(&data), "--loss", "logistic"]);
    assert_exit(&out, 2);
}

// ---------------------------------------------------------- solve-inner

#[test]
fn solve_inner_resolves_the_radius_with_flag_precedence() {
    let dir = scratch("inner-radius");
    let profile = dir.join("profile.json");
    write_json(
        &profile,
        &serde_json::json!({"p_hat": [0.7, 0.3], "deltas": [0.2, 0.9], "eps_bits": 0.05}),
    );

    // Explicit --eps wins over the profile's stored radius.
    let out = run(&["solve-inner", "--profile", path_str(&profile), "--eps", "0.25"]);
    assert_exit(&out, 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(doc["eps_bits"].as_f64().unwrap(), 0.25);

    // --beta needs the sample size and context count that produced the
    // profile; a partial triple is an input error.
    let out = run(&["solve-inner", "--profile", path_str(&profile), "--beta", "0.99"]);
    assert_exit(&out, 2);

    let out = run(&[
        "solve-inner", "--profile", path_str(&profile), "--beta", "0.99", "--n", "100",
        "--contexts", "2",
    ]);
    assert_exit(&out, 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let expected = ctxrobust::confidence::epsilon_bits(100, 2, 0.99).unwrap();
    assert!((doc["eps_bits"].as_f64().unwrap() - expected).abs() <= 1e-15);

    // Stored radius applies when no flag says otherwise; without any
    // radius at all the command cannot proceed.
    let out = run(&["solve-inner", "--profile", path_str(&profile)]);
    assert_exit(&out, 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(doc["eps_bits"].as_f64().unwrap(), 0.05);

    let bare = dir.join("bare.json");
    write_json(&bare, &serde_json::json!({"p_hat": [0.7, 0.3], "deltas": [0.2, 0.9]}));
    let out = run(&["solve-inner", "--profile", path_str(&bare)]);
    assert_exit(&out, 2);
}

#[test]
fn solve_inner_reproduces_from_its_emitted_profile() {
    let dir = scratch("inner-roundtrip");
    let profile = dir.join("profile.json");
    write_json(
        &profile,
        &serde_json::json!({"p_hat": [0.6, 0.3, 0.1], "deltas": [0.1, 0.4, 0.8]}),
    );

    let first = dir.join("out1.json");
    let out = run(&[
        "solve-inner", "--profile", path_str(&profile), "--eps", "0.3", "--out",
        path_str(&first),
    ]);
    assert_exit(&out, 0);

    let doc = read_json(&first);
    let resolved = dir.join("resolved.json");
    write_json(&resolved, &doc["config"]["profile"]);
    let second = dir.join("out2.json");
    let out =
        run(&["solve-inner", "--profile", path_str(&resolved), "--out", path_str(&second)]);
    assert_exit(&out, 0);
    assert_eq!(read_bytes(&first), read_bytes(&second));
}

// ------------------------------------------------------------ coverage

#[test]
fn coverage_reproduces_from_its_emitted_config() {
    let dir = scratch("coverage-roundtrip");
    let first = dir.join("cov1.json");
    let out = run(&[
        "coverage", "--p", "0.9,0.1", "--n", "20", "--beta", "0.9", "--trials", "200",
        "--seed", "4", "--out", path_str(&first),
    ]);
    assert_exit(&out, 0);

    let doc = read_json(&first);
    let cov = doc["coverage"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&cov), "coverage {cov} outside [0, 1]");
    assert_eq!(doc["trials"], 200);

    let cfg = dir.join("cov.json");
    write_json(&cfg, &doc["config"]);
    let second = dir.join("cov2.json");
    let out = run(&["coverage", "--config", path_str(&cfg), "--out", path_str(&second)]);
    assert_exit(&out, 0);
    assert_eq!(read_bytes(&first), read_bytes(&second));

    // A context distribution that does not sum to one is an input error.
    let out = run(&["coverage", "--p", "0.9,0.3", "--n", "20"]);
    assert_exit(&out, 2);
}

// ---------------------------------------------------------- experiment

#[test]
fn experiment_writes_the_row_contract_and_reproduces_from_its_config() {
    let dir = scratch("experiment-roundtrip");
    let out_a = dir.join("a");
    let out = run(&[
        "experiment", "--name", "stock", "--runs", "2", "--train-n", "60", "--eval-m", "300",
        "--seed", "9", "--out", path_str(&out_a),
    ]);
    assert_exit(&out, 0);
    let stdout_a = stdout_str(&out);

    let runs_csv = String::from_utf8(read_bytes(&out_a.join("runs.csv"))).unwrap();
    assert_eq!(runs_csv.lines().next().unwrap(), "run,method,scenario,excess");
    // 2 runs x 3 methods x 2 scenarios.
    assert_eq!(runs_csv.lines().count(), 13);

    let summary = read_json(&out_a.join("summary.json"));
    assert_eq!(summary["runs_succeeded"], 2);
    assert_eq!(summary["methods"].as_array().unwrap().len(), 3);

    let out_b = dir.join("b");
    let out = run(&[
        "experiment", "--config", path_str(&out_a.join("config.json")), "--out",
        path_str(&out_b),
    ]);
    assert_exit(&out, 0);
    assert_eq!(stdout_a, stdout_str(&out), "summary printout changed on replay");
    for file in ["runs.csv", "summary.json", "config.json"] {
        assert_eq!(
            read_bytes(&out_a.join(file)),
            read_bytes(&out_b.join(file)),
            "{file} differs between original and config replay"
        );
    }
}

#[test]
fn experiment_rejects_a_bad_optimizer_config_up_front() {
    let dir = scratch("experiment-bad-opts");
    let cfg = dir.join("exp.json");
    write_json(
        &cfg,
        &serde_json::json!({
            "name": "stock",
            "runs": 2,
            "train_n": 60,
            "eval_m": 100,
            "optimizer": {"step_size": 0.0}
        }),
    );
    let out = run(&["experiment", "--config", path_str(&cfg), "--out", path_str(&dir.join("o"))]);
    assert_exit(&out, 2);
    assert!(
        stderr_str(&out).contains("step_size"),
        "error should name the offending field: {}",
        stderr_str(&out)
    );
}

// ------------------------------------------------------------- parsing

#[test]
fn unknown_flags_exit_2() {
    let out = run(&["fit", "--definitely-not-a-flag"]);
    assert_exit(&out, 2);

    let out = run(&["no-such-command"]);
    assert_exit(&out, 2);
}
