mod common;

use common::{auv_c2, fixture, records, run_log, sim_events};

#[test]
fn repeated_runs_are_byte_identical() {
    let a = run_log("trial.json", "all").unwrap();
    let b = run_log("trial.json", "all").unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn log_timestamps_never_decrease() {
    let log = run_log("golden.json", "all").unwrap();
    let ts: Vec<u64> = records(&log).iter().map(|r| r["t_ms"].as_u64().unwrap()).collect();
    assert!(ts.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn split_processes_reproduce_the_simulation() {
    let all = run_log("trial.json", "all").unwrap();
    let dist = run_log("trial.json", "dist").unwrap();
    assert_eq!(sim_events(&all), sim_events(&dist));
}

#[test]
fn seed_override_changes_the_channel_draws() {
    let path = fixture("golden.json");
    let p = path.to_str().unwrap();
    let a = auv_c2(&["run", "--scenario", p, "--seed", "1"]);
    let b = auv_c2(&["run", "--scenario", p, "--seed", "2"]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn out_of_range_command_is_reported_undelivered() {
    let log = run_log("out_of_range.json", "all").unwrap();
    let recs = records(&log);
    let failed: Vec<_> =
        recs.iter().filter(|r| r["kind"] == "notification" && r["notification"]["kind"] == "command_failed").collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0]["notification"]["text"].as_str().unwrap().contains("command undelivered"));
    assert!(recs.iter().any(|r| r["kind"] == "drop" && r["cause"] == "range"));
}

#[test]
fn transcript_matches_golden_replies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("replies.txt");
    let res = auv_c2(&[
        "transcript",
        "--scenario",
        fixture("golden.json").to_str().unwrap(),
        "--utterances",
        fixture("golden_utterances.jsonl").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let got = std::fs::read_to_string(&out).unwrap();
    let want = std::fs::read_to_string(fixture("golden_replies.txt")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn empty_utterance_file_gives_empty_replies() {
    let dir = tempfile::tempdir().unwrap();
    let utts = dir.path().join("empty.jsonl");
    let out = dir.path().join("replies.txt");
    std::fs::write(&utts, "").unwrap();
    let res = auv_c2(&[
        "transcript",
        "--scenario",
        fixture("trial.json").to_str().unwrap(),
        "--utterances",
        utts.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
}

#[test]
fn utterance_beyond_duration_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let utts = dir.path().join("late.jsonl");
    std::fs::write(&utts, "{\"t_s\": 5, \"text\": \"hello\"}\n{\"t_s\": 99999, \"text\": \"too late\"}\n").unwrap();
    let res = auv_c2(&[
        "transcript",
        "--scenario",
        fixture("trial.json").to_str().unwrap(),
        "--utterances",
        utts.to_str().unwrap(),
        "--out",
        dir.path().join("r.txt").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 2"));
}
