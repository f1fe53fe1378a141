#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn auv_c2(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_auv-c2")).args(args).output().expect("spawn auv-c2")
}

/// Runs a scenario through the binary and returns the raw event log.
pub fn run_log(scenario: &str, mode: &str) -> Result<String, String> {
    let path = fixture(scenario);
    let out = auv_c2(&["run", "--scenario", path.to_str().unwrap(), "--mode", mode]);
    if !out.status.success() {
        return Err(format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

pub fn records(log: &str) -> Vec<Value> {
    log.lines().map(|l| serde_json::from_str(l).expect("log line is JSON")).collect()
}

pub fn of_kind<'a>(recs: &'a [Value], kind: &str) -> Vec<&'a Value> {
    recs.iter().filter(|r| r["kind"] == kind).collect()
}

/// (t_ms, event, vehicle, objective) for every simulation event.
pub fn sim_events(log: &str) -> Vec<(u64, String, u64, Value)> {
    records(log)
        .iter()
        .filter(|r| r["kind"] == "sim_event")
        .map(|r| {
            (
                r["t_ms"].as_u64().unwrap(),
                r["event"].as_str().unwrap().to_string(),
                r["vehicle_id"].as_u64().unwrap(),
                r["objective_id"].clone(),
            )
        })
        .collect()
}
