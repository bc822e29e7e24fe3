use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn regcube(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regcube")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn plan_thirteen_three() {
    let out = regcube(&["plan", "13", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let plan: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let steps: Vec<&str> = plan["steps"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["step"].as_str().unwrap())
        .collect();
    assert_eq!(steps, ["base", "double", "double"]);
    assert_eq!(plan["steps"][0]["s"], 2);
    assert_eq!(plan["steps"][0]["t"], 3);
}

#[test]
fn simulate_hamming_exactly() {
    let out = regcube(&["simulate", "7", "1", "--plan", "-", "--exact"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("probability 7/8"), "{}", stdout(&out));
    let out = regcube(&["--json", "simulate", "7", "1", "--plan", "-", "--exact"]);
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(record["probability"], "7/8");
    assert_eq!(record["wins"], 112);
    assert_eq!(record["total"], 128);
    assert_eq!(record["mode"], "exact");
}

#[test]
fn search_reports_the_screen() {
    let out = regcube(&["search", "5", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "NotPerfect: 2k+1 > n");
    let out = regcube(&["search", "27", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).starts_with("Unknown"));
}

#[test]
fn exit_codes() {
    assert_eq!(regcube(&["plan", "5", "3"]).status.code(), Some(1));
    assert_eq!(regcube(&["plan", "3", "7"]).status.code(), Some(2));
    assert_eq!(regcube(&["plan", "three", "1"]).status.code(), Some(2));
    assert_eq!(regcube(&["verify"]).status.code(), Some(2));
    assert_eq!(regcube(&["simulate", "7", "1", "--plan", "-"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"steps\": 3}").unwrap();
    assert_eq!(regcube(&["build", path(&bad), "--out-dir", path(dir.path())]).status.code(), Some(1));

    let set = dir.path().join("single.set");
    fs::write(&set, "{\"n\":3,\"size\":1,\"role\":\"V2\"}\n01\n").unwrap();
    let out = regcube(&["verify", "--set", path(&set), "--d1", "1", "--d2", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).starts_with("Invalid"));
}

#[test]
fn build_then_verify_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for (n, k) in [(3, 1), (6, 2), (7, 1), (13, 3), (14, 2)] {
        let sub = dir.path().join(format!("{n}_{k}"));
        let plan = dir.path().join(format!("{n}_{k}.json"));
        assert!(regcube(&["plan", &n.to_string(), &k.to_string(), "--out", path(&plan)]).status.success());
        assert!(regcube(&["build", path(&plan), "--out-dir", path(&sub)]).status.success());
        let out = regcube(&["verify", "--plan", path(&sub.join("plan.json"))]);
        assert!(out.status.success(), "{}", stdout(&out));
        let (d1, d2) = (k.to_string(), n.to_string());
        let out = regcube(&["verify", "--set", path(&sub.join("v2.set")), "--d1", &d1, "--d2", &d2]);
        assert!(out.status.success(), "{}", stdout(&out));
        let out = regcube(&[
            "simulate", &n.to_string(), &k.to_string(), "--set", path(&sub.join("v2.set")), "--exact",
        ]);
        assert!(stdout(&out).contains(&format!("probability {}/{}", n / gcd(n, n + k), (n + k) / gcd(n, n + k))));
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[test]
fn recorded_plans_parse_back_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("p.json");
    assert!(regcube(&["plan", "59", "5", "--out", path(&plan)]).status.success());
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    assert!(regcube(&["build", path(&plan), "--out-dir", path(&first)]).status.success());
    assert!(regcube(&["build", path(&first.join("plan.json")), "--out-dir", path(&second)]).status.success());
    assert_eq!(
        fs::read(first.join("plan.json")).unwrap(),
        fs::read(second.join("plan.json")).unwrap()
    );
    assert!(!first.join("v2.set").exists());
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, tag: &str| {
        let d = dir.path().join(tag);
        fs::create_dir_all(&d).unwrap();
        let plan = d.join("plan.json");
        let table = d.join("table.csv");
        let certs = d.join("certs");
        assert!(regcube(&["--threads", threads, "plan", "13", "3", "--out", path(&plan)]).status.success());
        assert!(regcube(&["--threads", threads, "build", path(&plan), "--out-dir", path(&d.join("b"))]).status.success());
        let mc = regcube(&["--threads", threads, "--json", "simulate", "13", "3", "--plan", "-", "--mc", "20000", "--seed", "3"]);
        let verify = regcube(&["--threads", threads, "--json", "verify", "--plan", path(&plan), "--sampled", "3000", "--seed", "9"]);
        let search = regcube(&["--threads", threads, "--json", "search", "4", "2"]);
        assert!(regcube(&[
            "--threads", threads, "table", "2", "--from", "2", "--to", "6", "--max-seconds", "30",
            "--out", path(&table), "--certificates", path(&certs),
        ])
        .status
        .success());
        (mc.stdout, verify.stdout, search.stdout, d)
    };
    let (mc1, v1, s1, d1) = run("1", "one");
    let (mc2, v2, s2, d2) = run("2", "two");
    assert_eq!(mc1, mc2);
    assert_eq!(v1, v2);
    assert_eq!(s1, s2);
    for file in ["plan.json", "b/plan.json", "b/v2.set"] {
        assert_eq!(fs::read(d1.join(file)).unwrap(), fs::read(d2.join(file)).unwrap(), "{file}");
    }
    let t1 = fs::read_to_string(d1.join("table.csv")).unwrap();
    let t2 = fs::read_to_string(d2.join("table.csv")).unwrap();
    assert_eq!(t1.replace(path(&d1), ""), t2.replace(path(&d2), ""));
}
