use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use safety_evidence::planner::{frame_requirement, CampaignAssumptions, CostMode};
use serde_json::Value;

fn evidence(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evidence"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = evidence(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .display()
        .to_string()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

#[test]
fn kofn_example() {
    let v = ok_json(&["kofn", "--p-sub", "0.25", "--n", "5", "--k", "4"]);
    let r = v["theoretical"]["rows"][0]["reliability"].as_f64().unwrap();
    assert!((r - 0.6328).abs() < 5e-5, "{r}");
    let all = ok_json(&["kofn", "--p-sub", "0.25", "--n", "5"]);
    assert_eq!(all["theoretical"]["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn plan_from_config() {
    let v = ok_json(&["plan", "--config", &config("table1_lower.cfg")]);
    let frames = v["requirement"]["frames_final"].as_f64().unwrap();
    assert!(close(frames, 1.5e12, 0.01), "{frames}");
    assert_eq!(v["requirement"]["cost_mode"], "exact");
    let published = ok_json(&[
        "--paper-mode",
        "plan",
        "--config",
        &config("table1_lower.cfg"),
    ]);
    assert_eq!(published["requirement"]["cost_mode"], "published");
    assert_eq!(published["requirement"]["cost_per_frame"].as_f64(), Some(0.775));
}

#[test]
fn flags_override_config() {
    let v = ok_json(&[
        "plan",
        "--config",
        &config("table1_lower.cfg"),
        "--alpha",
        "1e-4",
        "--hourly-wage",
        "12",
    ]);
    assert_eq!(v["assumptions"]["alpha"].as_f64(), Some(1e-4));
    assert_eq!(v["assumptions"]["hourly_wage"].as_f64(), Some(12.0));
    assert_eq!(v["assumptions"]["meters_per_frame"].as_f64(), Some(10.0));
    let factor = v["requirement"]["statistical_factor"].as_f64().unwrap();
    assert!((factor - 9.2103).abs() < 1e-4);

    let missing = evidence(&["plan", "--alpha", "0.05"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("meters_per_fatality"));
}

#[test]
fn exit_codes() {
    let out = evidence(&["analyze", "--indicators", "missing.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
    assert!(out.stdout.is_empty());

    assert_eq!(
        evidence(&["kofn", "--p-sub", "0.25", "--n", "5", "--bogus"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(evidence(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(evidence(&["test"]).status.code(), Some(1));
    assert_eq!(
        evidence(&["--format", "xml", "kofn"]).status.code(),
        Some(1)
    );
    assert_eq!(evidence(&["test", "--p-tol", "1.5"]).status.code(), Some(2));
    assert_eq!(
        evidence(&[
            "redundancy",
            "--p-tol",
            "1e-4",
            "--p-sub",
            "1e-3",
            "--rho",
            "-0.5"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(evidence(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "sample_id,m0\na,3\n").unwrap();
    let out = evidence(&["analyze", "--indicators", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:2:"));
}

#[test]
fn json_numbers_survive_a_generic_parser() {
    let v = ok_json(&[
        "--paper-mode",
        "plan",
        "--config",
        &config("table1_upper.cfg"),
    ]);
    let direct = frame_requirement(&CampaignAssumptions::TABLE_UPPER, CostMode::Published).unwrap();
    for (key, want) in [
        ("frames_final", direct.frames_final),
        ("total_cost", direct.total_cost),
        ("statistical_factor", direct.statistical_factor),
    ] {
        let got = v["requirement"][key].as_f64().unwrap();
        assert!(close(got, want, 1e-15), "{key}: {got} vs {want}");
    }
}

#[test]
fn text_format_is_aligned() {
    let out = evidence(&[
        "--format",
        "text",
        "corr-ci",
        "--rho",
        "0.6",
        "--samples",
        "30",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let starts: Vec<usize> = text
        .lines()
        .map(|l| {
            l.find("  ").unwrap() + l[l.find("  ").unwrap()..].find(|c: char| c != ' ').unwrap()
        })
        .collect();
    assert!(starts.windows(2).all(|w| w[0] == w[1]), "{text}");
    assert!(text.contains("rho_lo"));
}

fn tmp(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn seeded_commands_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<String>> = vec![
        vec![
            "simulate",
            "--p-sub",
            "0.1",
            "--rho",
            "0.3",
            "--n",
            "4",
            "--samples",
            "150000",
            "--seed",
            "9",
        ],
        vec![
            "simulate",
            "--p-sub",
            "0.2",
            "--p2",
            "0.1",
            "--rho",
            "-0.05",
            "--samples",
            "1000",
            "--seed",
            "2",
        ],
        vec![
            "train",
            "--n",
            "3",
            "--epochs",
            "4",
            "--samples",
            "600",
            "--seed",
            "5",
            "--lambda",
            "1",
        ],
        vec![
            "sweep",
            "--n",
            "2",
            "--epochs",
            "3",
            "--samples",
            "400",
            "--grid",
            "0,1",
            "--reps",
            "2",
            "--seed",
            "4",
        ],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    for args in runs {
        let mut outputs = Vec::new();
        for jobs in ["1", "3", "3"] {
            let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
            if full[0] != "train" {
                full.extend(["--jobs", jobs]);
            }
            let out = evidence(&full);
            assert_eq!(out.status.code(), Some(0), "{full:?}");
            outputs.push(out.stdout);
        }
        assert_eq!(outputs[0], outputs[1], "{args:?}");
        assert_eq!(outputs[1], outputs[2], "{args:?}");
    }

    let a = tmp(&dir, "a.csv");
    let b = tmp(&dir, "b.csv");
    for path in [&a, &b] {
        let p = path.to_str().unwrap();
        ok_json(&[
            "simulate",
            "--p-sub",
            "0.05",
            "--rho",
            "0.2",
            "--n",
            "3",
            "--samples",
            "70000",
            "--seed",
            "1",
            "--indicators",
            p,
            "--jobs",
            "2",
        ]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn train_outputs_feed_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let ind = tmp(&dir, "ind.csv");
    let soft = tmp(&dir, "soft.csv");
    let run = ok_json(&[
        "train",
        "--n",
        "3",
        "--epochs",
        "6",
        "--samples",
        "1000",
        "--seed",
        "2",
        "--lambda",
        "0.5",
        "--views",
        "distinct",
        "--observed-dims",
        "6",
        "--indicators",
        ind.to_str().unwrap(),
        "--softmax",
        soft.to_str().unwrap(),
    ]);
    let from_ind = ok_json(&["analyze", "--indicators", ind.to_str().unwrap()]);
    let from_soft = ok_json(&[
        "analyze",
        "--softmax",
        soft.to_str().unwrap(),
        "--bins",
        "2",
    ]);
    let avg = run["final"]["avg_accuracy"].as_f64().unwrap();
    assert_eq!(from_ind["report"]["avg_accuracy"].as_f64(), Some(avg));
    assert_eq!(from_soft["report"], from_ind["report"]);
    assert_eq!(from_ind["report"]["n_samples"].as_u64(), Some(200));
    assert_eq!(
        from_soft["committee_accuracy"],
        run["final"]["committee_accuracy"]
    );
    assert_eq!(
        from_soft["entropy_bins"]["bins"].as_array().unwrap().len(),
        2
    );
    let kofn = ok_json(&["kofn", "--indicators", ind.to_str().unwrap()]);
    assert_eq!(kofn["empirical"]["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn sweep_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let csv = tmp(&dir, "sweep.csv");
    let report = ok_json(&[
        "sweep",
        "--n",
        "3",
        "--epochs",
        "2",
        "--samples",
        "300",
        "--grid",
        "0,10",
        "--reps",
        "2",
        "--jobs",
        "2",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "lambda,repetition,mean_rho,avg_acc,joint_acc,k1,k2,k3"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[3].starts_with("10,0,"));
    assert_eq!(report["cells"].as_array().unwrap().len(), 4);
    assert_eq!(report["summary"][1]["completed"].as_u64(), Some(2));
}
