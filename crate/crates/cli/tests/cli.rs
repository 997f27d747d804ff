use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use twohop_cli::report::{run_instance, Algorithm, RunOptions};
use twohop_cli::scenario_file::render_scenario;
use twohop_cli::sweep::{generate, SweepSpec};

const GOLDEN: &str = r#"
deadline_s = 2000.0
slot_len_s = 100.0
arena_radius_m = 1.0
budget = 0.7
resolution = 1

[[technologies]]
id = "radio"
beacon_cost = 0.0

[[classes]]
population = 1
ttl_slots = 20
tx_cost = 1.0
technology = "radio"
contact_rate = 2.1e-4

[[classes]]
population = 2
ttl_slots = 20
tx_cost = 1.0
technology = "radio"
contact_rate = 2.0e-4
"#;

fn twohop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twohop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn solve_json_report() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "golden.toml", GOLDEN);
    let o = twohop(&[
        "solve",
        "--scenario",
        sc.to_str().unwrap(),
        "--algorithm",
        "grid",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let report = &v[0];
    assert_eq!(report["row"]["algorithm"], "grid");
    assert_eq!(report["row"]["status"], "ok");
    let energy = report["detail"]["energy"].as_f64().unwrap();
    assert!((energy - 0.7).abs() < 1e-6);
    assert_eq!(
        report["detail"]["policy"]["thresholds"]
            .as_array()
            .unwrap()
            .len(),
        2
    );
    assert!(report["row"]["ratio"].as_f64().unwrap() <= 1.0);
}

#[test]
fn solve_csv_several_algorithms() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "golden.toml", GOLDEN);
    let out = dir.path().join("rows.csv");
    let o = twohop(&[
        "solve",
        "--scenario",
        sc.to_str().unwrap(),
        "--algorithm",
        "grid",
        "greedy1",
        "combined",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("golden,combined,ok,"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let beacon = GOLDEN.replace("beacon_cost = 0.0", "beacon_cost = 0.001");
    let sc = write(dir.path(), "beacon.toml", &beacon);
    let o = twohop(&[
        "solve",
        "--scenario",
        sc.to_str().unwrap(),
        "--algorithm",
        "greedy2",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("greedy2 requires beacon_cost = 0"));

    let bad = write(
        dir.path(),
        "bad.toml",
        &GOLDEN.replace("population = 2", "population = -2"),
    );
    let o = twohop(&[
        "solve",
        "--scenario",
        bad.to_str().unwrap(),
        "--algorithm",
        "grid",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("population"), "{}", stderr(&o));

    let o = twohop(&[
        "solve",
        "--scenario",
        "/nonexistent.toml",
        "--algorithm",
        "grid",
    ]);
    assert_eq!(o.status.code(), Some(1));

    let o = twohop(&["solve", "--algorithm", "grid"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_single_trial_is_not_flagged() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "golden.toml", GOLDEN);
    let o = twohop(&[
        "simulate",
        "--scenario",
        sc.to_str().unwrap(),
        "--algorithm",
        "grid",
        "--trials",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("quantity,analytic,empirical,ci95,gap,flagged")
    );
    for l in lines {
        assert!(l.ends_with(",inf,") || l.contains("inf"), "{l}");
        assert!(l.ends_with("false"), "{l}");
    }
}

#[test]
fn simulate_policy_file() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "golden.toml", GOLDEN);
    let good = write(dir.path(), "p.json", r#"{"thresholds": [3.5, 4.0]}"#);
    let o = twohop(&[
        "simulate",
        "--scenario",
        sc.to_str().unwrap(),
        "--policy",
        good.to_str().unwrap(),
        "--trials",
        "20000",
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["energy_flag"], false);
    assert_eq!(v["empirical"]["trials"], 20000);

    let short = write(
        dir.path(),
        "short.json",
        r#"{"vectors": [[1.0, 0.0], [1.0, 0.0]]}"#,
    );
    let o = twohop(&[
        "simulate",
        "--scenario",
        sc.to_str().unwrap(),
        "--policy",
        short.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("vector length 2, expected 20"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn bound_subcommand() {
    let o = twohop(&["bound", "--slots", "2", "--resolution", "10"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert_eq!(v, 1.0 - 2f64.powi(-10));
    let o = twohop(&[
        "bound",
        "--slots",
        "2",
        "--resolution",
        "1",
        "--classes",
        "2",
    ]);
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(
        twohop(&["bound", "--slots", "0", "--resolution", "1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn validate_enum_random_and_file() {
    let o = twohop(&["validate-enum", "--count", "10", "--seed", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o).lines().filter(|l| l.ends_with("match")).count(),
        10
    );

    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "golden.toml", GOLDEN);
    let o = twohop(&["validate-enum", "--scenario", sc.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let big = write(
        dir.path(),
        "big.toml",
        &GOLDEN.replace("resolution = 1", "resolution = 10"),
    );
    let o = twohop(&["validate-enum", "--scenario", big.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

const SWEEP: &str = r#"
mode = "random"
count = 6
classes = [1, 2, 3]
seed = 11
resolution = 2
omit_timing = true
algorithms = ["grid", "greedy1", "arrival", "uniform"]
"#;

#[test]
fn sweep_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "spec.toml", SWEEP);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = twohop(&[
            "sweep",
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    assert_eq!(
        String::from_utf8(a.clone()).unwrap().lines().count(),
        1 + 6 * 4
    );

    let o = twohop(&["sweep", "--spec", spec.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(o.stdout, a);

    let empty = write(
        dir.path(),
        "empty.toml",
        &SWEEP.replace("classes = [1, 2, 3]", "classes = []"),
    );
    let o = twohop(&["sweep", "--spec", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("classes: empty range"));
}

#[test]
fn single_cell_sweep_matches_solve() {
    let spec: SweepSpec = toml::from_str(&SWEEP.replace("count = 6", "count = 1")).unwrap();
    let inst = generate(&spec).unwrap().remove(0);
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "r0000.toml", &render_scenario(&inst.scenario));

    let algs: Vec<&str> = spec.algorithms.iter().map(|a| a.name()).collect();
    let mut args = vec![
        "solve",
        "--scenario",
        sc.to_str().unwrap(),
        "--format",
        "csv",
        "--algorithm",
    ];
    args.extend(&algs);
    let o = twohop(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    let sweep = dir.path().join("sweep.csv");
    let spec_path = write(
        dir.path(),
        "one.toml",
        &SWEEP.replace("count = 6", "count = 1"),
    );
    let s = twohop(&[
        "sweep",
        "--spec",
        spec_path.to_str().unwrap(),
        "--out",
        sweep.to_str().unwrap(),
    ]);
    assert!(s.status.success());
    let strip_time = |text: &str| -> Vec<Vec<String>> {
        text.lines()
            .map(|l| {
                let mut f: Vec<String> = l.split(',').map(str::to_string).collect();
                f[7].clear();
                f
            })
            .collect()
    };
    assert_eq!(
        strip_time(&stdout(&o)),
        strip_time(&std::fs::read_to_string(sweep).unwrap())
    );

    // and the library path agrees with both
    let lib = run_instance(
        "r0000",
        &inst.scenario,
        &[Algorithm::Grid],
        3,
        &RunOptions::default(),
    )
    .unwrap();
    let first = stdout(&o)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(3)
        .unwrap()
        .to_string();
    assert_eq!(first.parse::<f64>().unwrap(), lib[0].row.objective.unwrap());
}
