use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const FAST: [&str; 14] = [
    "--n-dirs",
    "32",
    "--mc-samples",
    "200",
    "--exact-cap",
    "12",
    "--starts",
    "3",
    "--steps",
    "8",
    "--sandwich-dirs",
    "16",
    "--defect-tests",
    "6",
];

fn minksym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minksym"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn with_fast<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend_from_slice(&FAST);
    v
}

fn csv_body(path: &Path) -> (String, Vec<csv::StringRecord>, csv::StringRecord) {
    let text = std::fs::read_to_string(path).unwrap();
    let (first, rest) = text.split_once('\n').unwrap();
    let mut r = csv::Reader::from_reader(rest.as_bytes());
    let header = r.headers().unwrap().clone();
    let rows = r.records().map(|r| r.unwrap()).collect();
    (first.to_string(), rows, header)
}

#[test]
fn decay_writes_one_row_per_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = minksym(&with_fast(&[
        "decay",
        "--ns",
        "8,16",
        "--schedule",
        "random6",
        "--seeds",
        "1,2",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (first, rows, header) = csv_body(&out);
    assert!(first.starts_with(&format!("# minksym {} config={{", minksym::VERSION)));
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["n", "seed", "stage", "reflections", "mean_width", "ci", "circumradius_lb", "sandwich_ratio", "defect", "seconds"]
    );
    assert_eq!(rows.len(), 2 * 2 * 6);
    assert!(rows.iter().all(|r| r[9].is_empty()));
}

#[test]
fn decay_without_dimensions_is_a_config_error() {
    let o = minksym(&["decay", "--seeds", "1"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--ns") && err.contains("Usage"), "{err}");
}

#[test]
fn decay_both_formats_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    let o = minksym(&with_fast(&[
        "decay",
        "--ns",
        "8",
        "--seeds",
        "4",
        "--scope",
        "relevant",
        "--format",
        "both",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("d.json")).unwrap()).unwrap();
    let (_, rows, _) = csv_body(&out);
    assert_eq!(rows.len(), 2);
    let row = &json["result"]["rows"][0];
    // Shortest round-trip formatting: the CSV parses back to the same bits.
    let radius: f64 = rows[0][6].parse().unwrap();
    assert_eq!(radius.to_bits(), row["radius_q"].as_f64().unwrap().to_bits());
    let kt: f64 = rows[1][6].parse().unwrap();
    assert_eq!(kt.to_bits(), row["radius_kt"].as_f64().unwrap().to_bits());
    assert_eq!(json["config"]["scope"], "relevant");
    assert_eq!(json["version"], minksym::VERSION);
}

#[test]
fn pipeline_on_ball_is_a_fixed_point() {
    let o = minksym(&["pipeline", "--body", "ball", "--n", "16", "--schedule", "walsh5", "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json = stdout_json(&o);
    let stages = json["result"][0]["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 6);
    for s in stages {
        let ratio = s["sandwich"]["ratio"].as_f64().unwrap();
        assert!((ratio - 1.0).abs() <= 1e-9, "{ratio}");
    }
}

#[test]
fn pipeline_is_deterministic() {
    let args = with_fast(&["pipeline", "--body", "cross", "--n", "4", "--schedule", "random6", "--seed", "7"]);
    let a = minksym(&args);
    let b = minksym(&args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn pipeline_rejects_bad_bodies() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("verts.json");
    std::fs::write(&bad, "[[1.0, 0.0], [0.0,").unwrap();
    let sel = format!("hull:{}", bad.display());
    let o = minksym(&["pipeline", "--body", &sel, "--seed", "1"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 1"), "{err}");

    let o = minksym(&["pipeline", "--body", "sphere", "--n", "4", "--seed", "1"]);
    assert_eq!(code(&o), 2);
    let o = minksym(&["pipeline", "--body", "kt:9", "--n", "4", "--seed", "1"]);
    assert_eq!(code(&o), 2, "t above sqrt(n) is rejected");
}

#[test]
fn pipeline_accepts_hull_files() {
    let dir = tempfile::tempdir().unwrap();
    let verts = dir.path().join("verts.json");
    std::fs::write(&verts, "[[1,0,0],[-1,0,0],[0,2,0],[0,-2,0],[0,0,1],[0,0,-1]]").unwrap();
    let sel = format!("hull:{}", verts.display());
    let o = minksym(&with_fast(&["pipeline", "--body", &sel, "--seed", "2", "--schedule", "walsh5"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout_json(&o)["config"]["n"], 3);
}

#[test]
fn missing_seed_is_rejected() {
    let o = minksym(&["pipeline", "--body", "ball", "--n", "4"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn probe_product_sum_mean() {
    let o = minksym(&["probe", "product-sum", "--n", "64", "--trials", "100000", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let json = stdout_json(&o);
    let sums = json["result"][0]["summaries"].as_array().unwrap();
    let mean = sums.iter().find(|s| s["name"] == "sum").unwrap()["mean"].as_f64().unwrap();
    assert!((mean - 1.0 / 64.0).abs() < 0.05 / 64.0, "{mean}");
}

#[test]
fn probe_basis_overlap_clamps() {
    let o = minksym(&["probe", "basis-overlap", "--n", "8", "--c1", "5", "--trials", "40", "--seed", "1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["result"][0]["success_rate"], 1.0);
}

#[test]
fn probe_unknown_name_lists_probes() {
    let o = minksym(&["probe", "nosuch"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("basis-overlap") && err.contains("rearranged-moment"), "{err}");
}

#[test]
fn probe_csv_has_one_row_per_statistic() {
    let o = minksym(&["probe", "rearranged-moment", "--n", "32", "--k", "4", "--dist", "gaussian", "--trials", "50", "--seed", "5", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# minksym"));
    assert!(lines.next().unwrap().starts_with("probe,n,trials,seed,statistic"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn norm_check_sweeps_hold() {
    let o = minksym(&["norm-check", "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = &stdout_json(&o)["result"];
    assert!(r["report"]["max_ratio"].as_f64().unwrap() <= 2f64.sqrt());
    assert!(r["report"]["max_inverse_ratio"].as_f64().unwrap() <= 2f64.sqrt());
    assert_eq!(r["report"]["checks"], 3 * 4 * 10_000);

    let o = minksym(&["norm-check", "--seed", "1", "--adversarial", "--vectors", "100"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["result"]["holds"], true);
}

#[test]
fn norm_check_single_vector() {
    let o = minksym(&["norm-check", "--x", "1,0,0", "--k", "2"]);
    assert_eq!(code(&o), 0);
    let r = &stdout_json(&o)["result"]["report"];
    assert_eq!(r["max_ratio"], 1.0);
    assert_eq!(r["max_inverse_ratio"], 1.0);
    assert_eq!(code(&minksym(&["norm-check", "--x", "1,0", "--k", "-1"])), 2);
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"command": "probe", "probe": "unbiased-directions", "n": 12, "trials": 30, "seeds": [9]}"#,
    )
    .unwrap();
    let from_file = minksym(&["--config", cfg.to_str().unwrap()]);
    let from_flags = minksym(&["probe", "unbiased-directions", "--n", "12", "--trials", "30", "--seed", "9"]);
    assert_eq!(code(&from_file), 0, "{}", String::from_utf8_lossy(&from_file.stderr));
    let a = stdout_json(&from_file);
    let b = stdout_json(&from_flags);
    assert_eq!(a["result"], b["result"]);
    // Flags override the file.
    let o = minksym(&["--config", cfg.to_str().unwrap(), "probe", "--trials", "10"]);
    assert_eq!(stdout_json(&o)["result"][0]["trials"], 10);

    std::fs::write(&cfg, r#"{"command": "probe", "bogus": 1}"#).unwrap();
    assert_eq!(code(&minksym(&["--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let o = minksym(&["norm-check", "--x", "1,2", "--k", "1", "--out", "/nonexistent-dir/x.json"]);
    assert_eq!(code(&o), 3);
}
