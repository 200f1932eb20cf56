//! Command-line behavior: subcommands, output formats and exit codes.

mod common;

use std::path::Path;

use bt_grounding::io::{parse_bt, ResultsFile};
use common::*;

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ground(name: &str, out: &Path, extra: &[&str]) -> (i32, String) {
    let tasks = tasks_path(name);
    let mut args = vec!["ground", path(&tasks), "-o", path(out)];
    args.extend_from_slice(extra);
    let (code, _, err) = cli(&args);
    (code, err)
}

#[test]
fn naive_grounding_of_drawer_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("naive.json");
    let (code, err) = ground("drawer", &out, &["--algo", "naive"]);
    assert_eq!(code, 0, "{err}");
    assert!(err.starts_with("complete: 3/3 tasks solved"));
    let r = ResultsFile::load(&out).unwrap();
    assert!(r.report.complete);
    assert_eq!(r.config.algorithm, "naive");
    assert_eq!(r.report.feedback_cycles, 0);
    assert!(r.report.tasks.iter().all(|t| t.solved && t.tree.is_some()));
    assert_eq!(ResultsFile::parse(&r.to_json()).unwrap(), r);
}

#[test]
fn incomplete_grounding_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let (code, err) = ground("blocks", &out, &["--proposer", "random", "--max-cycles", "0"]);
    assert_eq!(code, 1, "{err}");
    assert!(!ResultsFile::load(&out).unwrap().report.complete);
}

#[test]
fn input_errors_exit_two_with_a_location() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = cli(&["ground", path(&dir.path().join("missing.tasks"))]);
    assert_eq!(code, 2);
    assert!(err.contains("missing.tasks"), "{err}");

    let bad = dir.path().join("bad.domain");
    std::fs::write(&bad, "domain bad\n\npropositions:\n  Holding(apple\n").unwrap();
    let (code, _, err) = cli(&["enumerate", path(&bad)]);
    assert_eq!(code, 2);
    assert!(err.contains("bad.domain:4:"), "{err}");

    let tasks = dir.path().join("t.tasks");
    let domain = std::fs::read_to_string(domains_dir().join("drawer.domain")).unwrap();
    std::fs::write(dir.path().join("drawer.domain"), domain).unwrap();
    std::fs::write(&tasks, "tasks t\ndomain: drawer.domain\n\ntask x:\n  init: Flying(apple)\n  goal:\n").unwrap();
    let (code, _, err) = cli(&["ground", path(&tasks)]);
    assert_eq!(code, 2);
    assert!(err.contains("t.tasks:5:"), "{err}");

    let (code, _, _) = cli(&["ground", path(&tasks_path("drawer")), "--nmax", "0"]);
    assert_eq!(code, 2);
    let (code, _, _) = cli(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn resource_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = ground("drawer", &dir.path().join("r.json"), &["--algo", "naive", "--naive-cap", "5"]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("resource"));
}

#[test]
fn redact_refuses_runs_that_read_hidden_transitions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let (code, _) = ground("drawer", &out, &["--proposer", "oracle", "--redact"]);
    assert_eq!(code, 2);
    let (code, _) = ground("drawer", &out, &["--proposer", "heuristic", "--redact"]);
    assert_eq!(code, 0);
}

#[test]
fn plan_and_run_follow_a_grounding() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(ground("drawer", &out, &["--proposer", "oracle"]).0, 0);
    let tasks = tasks_path("drawer");
    let (code, tree, _) = cli(&["plan", path(&tasks), "--task", "stow_held", "--results", path(&out)]);
    assert_eq!(code, 0);
    assert_eq!(
        tree,
        "?\n  {In(apple,drawer)}\n  ->\n    {IsOpen(drawer), Holding(apple)}\n    put_apple_in_drawer\n"
    );
    let ws = workspace("drawer");
    parse_bt(&tree, &ws.domain.universe).unwrap();

    let (code, dot, _) = cli(&["plan", path(&tasks), "--task", "stow_held", "--results", path(&out), "--dot"]);
    assert_eq!(code, 0);
    assert!(dot.starts_with("digraph"));

    // run a tree given as a file
    let bt = dir.path().join("tree.bt");
    std::fs::write(&bt, &tree).unwrap();
    let (code, trace, _) = cli(&["run", path(&tasks), "--task", "stow_held", "--results", path(&out), "--bt", path(&bt)]);
    assert_eq!(code, 0);
    let last = trace.lines().last().unwrap();
    assert!(last.starts_with("outcome: success; goal reached"), "{last}");
    assert!(last.contains("In(apple,drawer)"));
}

#[test]
fn plan_without_results_uses_declared_models() {
    let tasks = tasks_path("putin_missing_open");
    let (code, tree, _) = cli(&["plan", path(&tasks), "--task", "stow_open"]);
    assert_eq!(code, 0);
    assert!(tree.contains("put_in"));
    let (code, out, _) = cli(&["plan", path(&tasks_path("drawer")), "--task", "stow_held"]);
    assert_eq!(code, 1);
    assert!(out.contains("frontier"));
}

#[test]
fn a_wrong_tree_ends_in_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(ground("drawer", &out, &["--proposer", "oracle"]).0, 0);
    let bt = dir.path().join("tree.bt");
    std::fs::write(&bt, "->\n  {HandEmpty}\n  open_drawer\n").unwrap();
    let tasks = tasks_path("drawer");
    let (code, trace, _) = cli(&["run", path(&tasks), "--task", "stow_held", "--results", path(&out), "--bt", path(&bt)]);
    assert_eq!(code, 1);
    assert!(trace.contains("goal not reached"), "{trace}");
}

#[test]
fn metrics_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for seed in 0..3 {
        for ablate in [false, true] {
            let out = dir.path().join(format!("cover-{seed}-{ablate}.json"));
            let mut extra = vec!["--seed".to_string(), seed.to_string()];
            if ablate {
                extra.push("--ablate-planning-contexts".into());
            }
            let extra: Vec<&str> = extra.iter().map(String::as_str).collect();
            ground("cover", &out, &extra);
            files.push(out);
        }
    }
    let mut args = vec!["metrics"];
    args.extend(files.iter().map(|f| path(f)));
    let (code, table, _) = cli(&args);
    assert_eq!(code, 0);
    let mut lines = table.lines();
    let header = lines.next().unwrap();
    for col in ["domain", "algo", "proposer", "runs", "ASR(w/o → w)", "CSR(w/o → w)", "FC"] {
        assert!(header.contains(col), "{header}");
    }
    let row = lines.next().unwrap();
    assert!(row.starts_with("cover") && row.contains("heuristic") && row.contains('→'), "{row}");

    let mut args = vec!["metrics", "--json"];
    args.extend(files.iter().map(|f| path(f)));
    let (code, json, _) = cli(&args);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["runs"], 6);
    assert!(v["csr"].as_f64().unwrap() <= v["asr"].as_f64().unwrap());

    let (code, _, _) = cli(&["metrics"]);
    assert_eq!(code, 2);
}

/// Valid triples of a domain by direct bitmask enumeration.
fn brute_force_count(n: usize, groups: &[u64]) -> u64 {
    let mutex_ok = |s: u64| groups.iter().all(|g| (s & g).count_ones() <= 1);
    let mut count = 0;
    for pre in 0..1u64 << n {
        for add in 0..1u64 << n {
            for del in 0..1u64 << n {
                let outcome = (pre & !del) | add;
                let ok = add & del == 0
                    && add & pre == 0
                    && del & !pre == 0
                    && mutex_ok(pre)
                    && mutex_ok(add)
                    && mutex_ok(outcome);
                count += u64::from(ok);
            }
        }
    }
    count
}

#[test]
fn enumerate_matches_brute_force() {
    for n in 1..=3usize {
        let (code, out, _) = cli(&["enumerate", "--synthetic", &n.to_string()]);
        assert_eq!(code, 0);
        assert_eq!(out.trim().parse::<u64>().unwrap(), brute_force_count(n, &[]));
        let (code, out, _) = cli(&["enumerate", "--synthetic", &n.to_string(), "--mandatory-only"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim().parse::<u64>().unwrap(), 6u64.pow(n as u32));
    }
    for name in ["drawer", "putin_missing_open", "pick_unverified_reach"] {
        let ws = workspace(name);
        let groups: Vec<u64> = ws.domain.rules.mutex_groups.iter().map(|g| g.as_bits()).collect();
        let (code, out, _) = cli(&["enumerate", path(&ws.domain_path)]);
        assert_eq!(code, 0);
        assert_eq!(out.trim().parse::<u64>().unwrap(), brute_force_count(ws.domain.universe.len(), &groups), "{name}");
    }
    let (code, out, _) = cli(&["enumerate", "--synthetic", "2", "--list"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count() as u64, brute_force_count(2, &[]) + 1);
}

#[test]
fn binary_reports_exit_codes() {
    let status = std::process::Command::new(btg())
        .args(["enumerate", "--synthetic", "1"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    let status = std::process::Command::new(btg()).arg("plan").output().unwrap();
    assert_eq!(status.status.code(), Some(2));
}
