use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_radiomap");

fn radiomap(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("RADIOMAP_SEED").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_spec(dir: &Path, body: &str) -> String {
    let p = dir.join("spec.json");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const NOISELESS_PATH_LOSS: &str = r#"{"regions":5,"sensors":12,"samples":500,"noise_var":0,"queries_per_region":3,
  "mean_model":{"kind":"path_loss","ref_power":-40,"exponent":3,"shadowing":0},"seed":2}"#;

/// Generates a bundle into `dir/data` and returns that path.
fn bundle(dir: &Path, spec: &str) -> String {
    let spec = write_spec(dir, spec);
    let data = dir.join("data");
    let out = radiomap(&["generate", "--spec", &spec, "--out", data.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    data.to_str().unwrap().to_string()
}

#[test]
fn generate_writes_the_bundle_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), r#"{"regions":2,"sensors":4,"samples":60,"seed":9}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert_eq!(code(&radiomap(&["generate", "--spec", &spec, "--out", out.to_str().unwrap()])), 0);
    }
    let files = ["measurements.csv", "sensors.json", "regions.json", "graph.json", "truth.json", "spec.json"];
    for f in files {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert!(!a.join("queries.csv").exists());

    let csv = fs::read_to_string(a.join("measurements.csv")).unwrap();
    assert!(csv.starts_with("t,s1,s2,s3,s4\n1,"));
    assert_eq!(csv.lines().count(), 61);
    let graph = json(&a.join("graph.json"));
    assert_eq!(graph["K"], 2);
    assert_eq!(graph["edges"], serde_json::json!([[1, 2]]));
    let truth = json(&a.join("truth.json"));
    assert_eq!(truth["boundaries"], serde_json::json!([30]));
    assert_eq!(truth["route"], serde_json::json!([1, 2]));
    for f in ["sensors.json", "regions.json", "graph.json", "truth.json", "spec.json"] {
        let v = json(&a.join(f));
        assert_eq!(v["schema_version"], 1, "{f}");
        assert_eq!(v["config_hash"].as_str().unwrap().len(), 64, "{f}");
    }
}

#[test]
fn seed_environment_variable_overrides_the_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), r#"{"regions":2,"sensors":4,"samples":60,"seed":9}"#);
    let out = dir.path().join("o");
    let run = Command::new(BIN)
        .args(["generate", "--spec", &spec, "--out", out.to_str().unwrap()])
        .env("RADIOMAP_SEED", "123")
        .output()
        .unwrap();
    assert_eq!(code(&run), 0);
    assert_eq!(json(&out.join("spec.json"))["spec"]["seed"], 123);

    let bad = Command::new(BIN)
        .args(["generate", "--spec", &spec, "--out", out.to_str().unwrap()])
        .env("RADIOMAP_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn invalid_specs_exit_with_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let spec = write_spec(dir.path(), r#"{"regions":2,"samples":60}"#);
    let run = radiomap(&["generate", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("sensors"), "{}", stderr(&run));

    let spec = write_spec(dir.path(), r#"{"regions":5,"sensors":3,"samples":500,"dims":1}"#);
    let run = radiomap(&["generate", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&run), 2);
    assert!(stderr(&run).contains("linearly independent"));

    let spec = write_spec(dir.path(), r#"{"regions":2,"sensors":3,"samples":60,"colour":1}"#);
    assert_eq!(code(&radiomap(&["generate", "--spec", &spec, "--out", out.to_str().unwrap()])), 2);
    assert_eq!(code(&radiomap(&["generate", "--spec", "/nonexistent/spec.json", "--out", "x"])), 2);
}

#[test]
fn noiseless_pipeline_is_perfect_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = bundle(dir.path(), NOISELESS_PATH_LOSS);
    let data = Path::new(&data);
    let build = radiomap(&["build", "--data", data.to_str().unwrap(), "--d0", "--beta", "0.001"]);
    assert_eq!(code(&build), 0, "{}", stderr(&build));
    let map = json(&data.join("radiomap.json"));
    assert_eq!(map["boundaries"], json(&data.join("truth.json"))["boundaries"]);
    assert_eq!(map["route"]["feasible"], true);
    assert_eq!(map["region_ids"], serde_json::json!([1, 2, 3, 4, 5]));
    let trace = fs::read_to_string(data.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,cost,merge,split,boundaries,e_eps\n"));

    let assignments = dir.path().join("a.csv");
    let loc = radiomap(&[
        "localize",
        "--map",
        data.join("radiomap.json").to_str().unwrap(),
        "--queries",
        data.join("queries.csv").to_str().unwrap(),
        "--out",
        assignments.to_str().unwrap(),
    ]);
    assert_eq!(code(&loc), 0, "{}", stderr(&loc));
    let truth = json(&data.join("truth.json"));
    let regions: Vec<u64> = fs::read_to_string(&assignments)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let expected: Vec<u64> = truth["query_regions"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(regions, expected);

    let report_path = dir.path().join("report.json");
    let eval = radiomap(&[
        "evaluate",
        "--data",
        data.to_str().unwrap(),
        "--assignments",
        assignments.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&eval), 0, "{}", stderr(&eval));
    let report = json(&report_path);
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["clustering"]["acc"], 1.0);
    assert_eq!(report["segmentation_error"], 0.0);
    assert_eq!(report["matching_error"], 0.0);
    assert_eq!(report["localization"]["proposed"], 0.0);
    assert_eq!(report["notices"], serde_json::json!([]));
}

#[test]
fn mean_only_flag_matches_the_default_segmenter_on_flat_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = bundle(dir.path(), r#"{"regions":4,"sensors":10,"samples":400,"noise_var":0.5,"seed":4}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&radiomap(&["build", "--data", &data, "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&radiomap(&["build", "--data", &data, "--d0", "--out", b.to_str().unwrap()])), 0);
    assert_eq!(json(&a.join("radiomap.json"))["boundaries"], json(&b.join("radiomap.json"))["boundaries"]);
}

#[test]
fn build_without_an_eligible_route_writes_a_partial_map() {
    let dir = tempfile::tempdir().unwrap();
    let data = bundle(dir.path(), r#"{"regions":3,"sensors":6,"samples":90,"seed":1}"#);
    let graph_path = Path::new(&data).join("graph.json");
    let mut graph = json(&graph_path);
    graph["edges"] = serde_json::json!([]);
    fs::write(&graph_path, graph.to_string()).unwrap();
    let run = radiomap(&["build", "--data", &data]);
    assert_eq!(code(&run), 4);
    let map = json(&Path::new(&data).join("radiomap.json"));
    assert_eq!(map["region_ids"], Value::Null);
    assert_eq!(map["route"]["feasible"], false);
}

#[test]
fn build_rejects_bad_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let data = bundle(dir.path(), r#"{"regions":3,"sensors":6,"samples":90,"seed":1}"#);
    assert_eq!(code(&radiomap(&["build", "--data", &data, "--segmenter", "nope"])), 2);
    assert_eq!(code(&radiomap(&["build", "--data", &data, "--beta", "-1"])), 2);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"matcher":"brute-force","window":{"beta":0.5,"mode":"smooth"}}"#).unwrap();
    let printed =
        radiomap(&["build", "--data", &data, "--config", cfg.to_str().unwrap(), "--beta", "0.25", "--print-config"]);
    assert_eq!(code(&printed), 0);
    let v: Value = serde_json::from_slice(&printed.stdout).unwrap();
    assert_eq!(v["matcher"], "brute-force");
    assert_eq!(v["window"]["beta"], 0.25);
    assert_eq!(v["segmenter"], "alternating");
}

#[test]
fn localize_contract() {
    let dir = tempfile::tempdir().unwrap();
    let data = bundle(dir.path(), r#"{"regions":3,"sensors":4,"samples":90,"seed":1}"#);
    assert_eq!(code(&radiomap(&["build", "--data", &data])), 0);
    let map = Path::new(&data).join("radiomap.json");
    let map = map.to_str().unwrap();
    let q = dir.path().join("q.csv");
    let out = dir.path().join("a.csv");
    let localize = |body: &str| {
        fs::write(&q, body).unwrap();
        radiomap(&["localize", "--map", map, "--queries", q.to_str().unwrap(), "--out", out.to_str().unwrap()])
    };

    assert_eq!(code(&localize("")), 0);
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 1);

    assert_eq!(code(&localize("s1,s2,s3\n1,2,3\n")), 2);

    let run = localize("s1,s2,s3,s4\n0,0,0,0\n1,NaN,0,0\n");
    assert_eq!(code(&run), 3);
    let rows: Vec<String> = fs::read_to_string(&out).unwrap().lines().map(String::from).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("1,") && rows[1].ends_with(','));
    assert_eq!(rows[2], "2,,,,,,,,non_finite");

    assert_eq!(code(&localize("s1,s2,s3,s4\n0,zero,0,0\n")), 2);
}

#[test]
fn evaluate_without_truth_reports_notices() {
    let dir = tempfile::tempdir().unwrap();
    let data = bundle(dir.path(), r#"{"regions":3,"sensors":6,"samples":90,"seed":1}"#);
    assert_eq!(code(&radiomap(&["build", "--data", &data])), 0);
    fs::remove_file(Path::new(&data).join("truth.json")).unwrap();
    let run = radiomap(&["evaluate", "--data", &data]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let report = json(&Path::new(&data).join("report.json"));
    assert_eq!(report["clustering"], Value::Null);
    assert_eq!(report["notices"].as_array().unwrap().len(), 1);
}

#[test]
fn theory_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let run = radiomap(&["theory", "hardening", "--seeds", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("verdict: PASS"));
    let report = json(&out);
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["check"], "hardening");
    assert_eq!(report["pass"], true);

    let unknown = radiomap(&["theory", "nope"]);
    assert_eq!(code(&unknown), 2);
    assert!(stderr(&unknown).contains("hardening"));

    let list = radiomap(&["theory", "--list"]);
    assert_eq!(code(&list), 0);
    assert_eq!(String::from_utf8(list.stdout).unwrap().lines().count(), 10);
}

#[test]
fn global_flags() {
    let printed = radiomap(&["--print-config"]);
    assert_eq!(code(&printed), 0);
    let v: Value = serde_json::from_slice(&printed.stdout).unwrap();
    assert_eq!(v["build"]["segmenter"], "alternating");
    assert_eq!(v["evaluate"]["epsilon"], 0.003);
    assert_eq!(code(&radiomap(&["--jobs", "0", "theory", "--list"])), 2);
    assert_eq!(code(&radiomap(&["--jobs", "2", "theory", "--list"])), 0);
    assert_eq!(code(&radiomap(&[])), 2);
    assert_eq!(code(&radiomap(&["frobnicate"])), 2);
    assert_eq!(code(&radiomap(&["--help"])), 0);
}
