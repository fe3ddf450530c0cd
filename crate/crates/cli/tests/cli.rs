use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sclqg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sclqg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--out", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    sclqg(&all)
}

#[test]
fn help_exits_zero() {
    let o = sclqg(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("markov-test"));
    assert_eq!(sclqg(&["maps", "--help"]).status.code(), Some(0));
}

#[test]
fn unknown_command_is_a_usage_error() {
    let o = sclqg(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn missing_parameters_name_both_keys() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["cascade", "--runs", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("`c_l`") && e.contains("`q`"), "{e}");
}

#[test]
fn conflicting_and_unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"c_l": 13, "q": 2}"#).unwrap();
    let o = run_in(dir.path(), &["--config", cfg.to_str().unwrap(), "cascade"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mutually exclusive"));

    std::fs::write(&cfg, r#"{"c_l": 13, "generations": 4}"#).unwrap();
    let o = run_in(dir.path(), &["--config", cfg.to_str().unwrap(), "cascade"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("generations"), "{}", stderr(&o));

    let o = run_in(dir.path(), &["cascade", "--c-l", "30"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("c_l"));
}

#[test]
fn same_seed_same_summary() {
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    let args = [
        "cascade",
        "--c-l",
        "13",
        "--runs",
        "50",
        "--max-gen",
        "4",
        "--law",
        "dirichlet",
    ];
    let with_seed = |dir: &Path, seed: &str| {
        let mut v = vec!["--seed", seed];
        v.extend_from_slice(&args);
        assert_eq!(run_in(dir, &v).status.code(), Some(0));
        std::fs::read(dir.join("summary.json")).unwrap()
    };
    let (x, y, z) = (
        with_seed(a.path(), "7"),
        with_seed(b.path(), "7"),
        with_seed(c.path(), "8"),
    );
    assert_eq!(x, y);
    assert_ne!(x, z);
    let (ma, mb) = (
        json(&a.path().join("manifest.json")),
        json(&b.path().join("manifest.json")),
    );
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["seed"], 7);
    assert_eq!(ma["status"], "ok");
    for key in [
        "artifact",
        "version",
        "command",
        "rng_algorithm",
        "config",
        "wall_time_seconds",
        "outputs",
    ] {
        assert!(ma.get(key).is_some(), "manifest lacks {key}");
    }
}

#[test]
fn threads_do_not_change_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "cascade",
        "--c-l",
        "7",
        "--runs",
        "40",
        "--law",
        "stable",
        "--max-gen",
        "3",
    ];
    let mut one = vec!["--threads", "1"];
    one.extend_from_slice(&args);
    let mut four = vec!["--threads", "4"];
    four.extend_from_slice(&args);
    assert_eq!(run_in(a.path(), &one).status.code(), Some(0));
    assert_eq!(run_in(b.path(), &four).status.code(), Some(0));
    assert_eq!(
        std::fs::read(a.path().join("summary.json")).unwrap(),
        std::fs::read(b.path().join("summary.json")).unwrap()
    );
}

#[test]
fn runs_use_isolated_substreams() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let base = [
        "cascade",
        "--c-l",
        "13",
        "--law",
        "dirichlet",
        "--max-gen",
        "4",
    ];
    let mut short = base.to_vec();
    short.extend_from_slice(&["--runs", "5"]);
    let mut long = base.to_vec();
    long.extend_from_slice(&["--runs", "12"]);
    assert_eq!(run_in(a.path(), &short).status.code(), Some(0));
    assert_eq!(run_in(b.path(), &long).status.code(), Some(0));
    for i in 0..5 {
        let name = format!("runs/run_{i:05}.csv");
        assert_eq!(
            std::fs::read(a.path().join(&name)).unwrap(),
            std::fs::read(b.path().join(&name)).unwrap()
        );
    }
}

#[test]
fn cap_truncation_exits_three_and_keeps_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &[
            "cascade",
            "--c-l",
            "13",
            "--runs",
            "5",
            "--node-cap",
            "3",
            "--max-gen",
            "6",
        ],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["status"], "truncated");
    assert!(dir.path().join("generations.csv").exists());
    assert!(dir.path().join("runs/run_00000.csv").exists());
    assert_eq!(json(&dir.path().join("summary.json"))["truncated_runs"], 5);
}

#[test]
fn field_csv_dialect() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["--seed", "3", "sample-gff", "--n", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("vertex_id,x,y,value"));
    let domain = json(&dir.path().join("domain.json"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), domain["vertices"].as_array().unwrap().len());
    for (i, row) in rows.iter().enumerate() {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[0], i.to_string());
        for x in &f[1..] {
            let mantissa = x.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(
                mantissa.chars().filter(char::is_ascii_digit).count(),
                17,
                "{x}"
            );
        }
    }
}

#[test]
fn measure_boundary_reads_a_written_field() {
    let dir = tempfile::tempdir().unwrap();
    let disk = dir.path().join("disk");
    let o = run_in(&disk, &["sample-disk", "--c-l", "13", "--n", "33"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let field = disk.join("field.csv");
    let m = dir.path().join("m");
    let o = run_in(
        &m,
        &[
            "measure-boundary",
            "--field",
            field.to_str().unwrap(),
            "--n",
            "33",
            "--c-l",
            "13",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let total = json(&m.join("summary.json"))["total"].as_f64().unwrap();
    assert!(total.is_finite() && total > 0.0);
    let o = run_in(
        &m,
        &[
            "measure-boundary",
            "--field",
            field.to_str().unwrap(),
            "--n",
            "17",
            "--c-l",
            "13",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`n`"));
}

#[test]
fn maps_enumerate_agrees_with_the_weight_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &["maps", "enumerate", "--k", "2", "--max-faces", "4"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["enumerators_agree"], true);
    assert_eq!(s["round_trip_failures"], 0);
    assert!(dir.path().join("maps.json").exists());
}

#[test]
fn maps_sample_takes_beta_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"beta": 2.0, "k": 2, "max_faces": 4, "samples": 200}"#,
    )
    .unwrap();
    let o = run_in(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "maps", "sample"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["beta"], 2.0);
    assert!(s["tv_to_boltzmann"].as_f64().unwrap() < 0.2);
}
