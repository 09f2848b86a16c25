use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ddae_hinf::{catalog, io, levelset};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddae-hinf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_descriptor_closed_loop() {
    let out = run(&["validate", path_str(&data("c3_closed_loop.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let s = text(&out.stdout);
    assert!(s.contains("nu                1"), "{s}");
    assert!(s.contains("nonsingular"));
}

#[test]
fn validate_reports_parse_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\n  \"n\": 1,\n  \"delays\": [1.0,,]\n}").unwrap();
    let out = run(&["validate", path_str(&p)]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn validate_names_singular_algebraic_block() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("index2.json");
    std::fs::write(
        &p,
        r#"{"n": 2, "delays": [], "E": [[1, 0], [0, 0]], "A": [[[-1, 1], [1, 0]]], "B": [[0], [1]], "C": [[1, 0]]}"#,
    )
    .unwrap();
    let out = run(&["validate", path_str(&p)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("U^T A_0 V"));
}

#[test]
fn norm_of_neutral_loop_is_asymptotic() {
    let out = run(&["norm", path_str(&data("eq10.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let s = text(&out.stdout);
    assert!(s.contains("strong H-infinity norm  4.000000"), "{s}");
    assert!(s.contains("branch                  asymptotic"));
}

#[test]
fn norm_of_second_loop_peaks_in_frequency() {
    let out = run(&["norm", path_str(&data("eq21.json")), "--N", "20", "--tol", "1e-3", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let value = v["result"]["value"].as_f64().unwrap();
    let omega = v["result"]["omega_hat"].as_f64().unwrap();
    assert!((value - 2.3859).abs() < 1e-3);
    assert!((omega - 1.7721).abs() < 1e-3);
    assert_eq!(v["result"]["branch"], "frequency");
    assert_eq!(v["options"]["order"], 20);
}

#[test]
fn unstable_system_exits_three() {
    for cmd in ["norm", "stability"] {
        let out = run(&[cmd, path_str(&data("unstable.json"))]);
        assert_eq!(out.status.code(), Some(3), "{cmd}");
    }
}

#[test]
fn ta_norm_command() {
    let out = run(&["ta-norm", path_str(&data("eq10_tau099.json"))]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("asymptotic strong norm  4.000000"));
}

#[test]
fn plain_norm_flag() {
    let out = run(&["norm", path_str(&data("eq10.json")), "--plain"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("plain H-infinity norm  2.5787"));
}

#[test]
fn sweep_finds_the_high_frequency_peak() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = run(&[
        "sweep",
        path_str(&data("eq10_tau099.json")),
        "--wmin",
        "1",
        "--wmax",
        "1000",
        "--points",
        "20000",
        "--log",
        "-o",
        path_str(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let body = std::fs::read_to_string(&csv).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("omega,sigma1"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (w, s) = l.split_once(',').unwrap();
            (w.parse().unwrap(), s.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 20000);
    let best = rows.iter().copied().fold((0.0, 0.0), |b, r| if r.1 > b.1 { r } else { b });
    assert!((best.0 - 158.66).abs() < 0.05, "{best:?}");
    assert!((best.1 - 3.9993).abs() < 5e-3, "{best:?}");
}

#[test]
fn sweep_single_point_and_bad_range() {
    let out = run(&["sweep", path_str(&data("eq10.json")), "--wmin", "2", "--wmax", "3", "--points", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(text(&out.stdout).lines().count(), 2);

    let out = run(&["sweep", path_str(&data("eq10.json")), "--wmin", "3", "--wmax", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
}

#[test]
fn assemble_round_trip_matches_in_process_norm() {
    let dir = tempfile::tempdir().unwrap();
    let cl = dir.path().join("cl.json");
    let out = run(&[
        "assemble",
        path_str(&data("two_gain_plant.json")),
        path_str(&data("two_gain_template.json")),
        "-o",
        path_str(&cl),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(run(&["validate", path_str(&cl)]).status.code(), Some(0));

    let out = run(&["norm", path_str(&cl), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let from_file = v["result"]["value"].as_f64().unwrap();

    let (plant, tpl) = catalog::second_example_loop(1.0, 2.0);
    let pcl = ddae_hinf::interconnect::assemble(&plant, &tpl).unwrap();
    let sys = ddae_hinf::interconnect::instantiate(&pcl, &tpl.initial_parameters()).unwrap();
    let direct = levelset::strong_hinf_norm(&sys, &Default::default()).unwrap().value;
    assert!((from_file - direct).abs() <= 1e-9 * direct);
}

#[test]
fn synthesize_scalar_loop() {
    let dir = tempfile::tempdir().unwrap();
    let (plant, tpl) = catalog::scalar_loop(-7.4);
    let pp = dir.path().join("plant.json");
    let tp = dir.path().join("template.json");
    let rp = dir.path().join("result.json");
    std::fs::write(&pp, io::plant_to_json(&plant)).unwrap();
    std::fs::write(&tp, io::template_to_json(&tpl)).unwrap();
    let out = run(&["synthesize", path_str(&pp), path_str(&tp), "--seed", "3", "-o", path_str(&rp)]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rp).unwrap()).unwrap();
    let k = v["result"]["params"][0].as_f64().unwrap();
    assert!((k + 0.8813).abs() < 0.05);
    assert!(v["result"]["xi"].as_f64().unwrap() <= 0.2237);
    assert!(!v["result"]["trace"].as_array().unwrap().is_empty());
    assert_eq!(v["options"]["seed"], 3);
}

#[test]
fn bench_prints_achieved_and_published() {
    let out = run(&["bench", "c6_robust"]);
    assert_eq!(out.status.code(), Some(0));
    let s = text(&out.stdout);
    assert!(s.contains("strong norm 3.3145  published 3.3145  match"), "{s}");

    let out = run(&["bench", "c8_bfg_ex2", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let open = v["result"][0]["computed"].as_f64().unwrap();
    assert!((open - 1.3907).abs() < 1e-2);
}

#[test]
fn bench_discloses_heat_transfer_variant() {
    let out = run(&["bench", "c7_heat11", "--heat-a66", "-1", "--heat-input", "11"]);
    let err = text(&out.stderr);
    assert!(err.contains("this instance uses -1"), "{err}");
    assert!(err.contains("state 11"));
    assert!(matches!(out.status.code(), Some(0) | Some(3)));
}

#[test]
fn thread_cap_is_honoured() {
    let out = Command::new(env!("CARGO_BIN_EXE_ddae-hinf"))
        .args(["norm", path_str(&data("eq21.json"))])
        .env("DDAE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("2.385464"));
}
