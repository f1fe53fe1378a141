//! Split-process runs: this executable is started twice, once as `relay`
//! and once as `c2`, and the two logs are merged afterwards.

use std::path::{Path, PathBuf};
use std::process::Stdio;

use anyhow::{bail, Context, Result};
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::process::Command;

use crate::eventlog::EventLog;
use crate::runner::{Announce, RunOptions};

fn common_args(scenario: &Path, seed: Option<u64>) -> Vec<String> {
    let mut args = vec!["--scenario".to_string(), scenario.display().to_string()];
    if let Some(s) = seed {
        args.extend(["--seed".to_string(), s.to_string()]);
    }
    args
}

fn scratch(tag: &str) -> PathBuf {
    std::env::temp_dir().join(format!("auv-c2-{}-{tag}.jsonl", std::process::id()))
}

/// Runs `exe relay` and `exe c2` against each other and returns the merged
/// log, sea-side records first on equal timestamps.
pub async fn run_distributed(exe: &Path, scenario: &Path, seed: Option<u64>, opts: RunOptions) -> Result<EventLog> {
    let (sea_out, c2_out) = (scratch("sea"), scratch("c2"));
    let mut relay_args = common_args(scenario, seed);
    relay_args.extend([
        "--listen".into(),
        "127.0.0.1:0".into(),
        "--control".into(),
        "127.0.0.1:0".into(),
        "--out".into(),
        sea_out.display().to_string(),
        "--realtime-factor".into(),
        opts.realtime_factor.to_string(),
    ]);
    if opts.run_to_duration {
        relay_args.push("--run-to-duration".into());
    }
    let mut relay = Command::new(exe)
        .arg("relay")
        .args(&relay_args)
        .stdout(Stdio::piped())
        .kill_on_drop(true)
        .spawn()
        .context("cannot start relay process")?;
    let mut lines = BufReader::new(relay.stdout.take().expect("piped")).lines();
    let first = lines.next_line().await?.context("relay process exited before announcing its ports")?;
    let announce: Announce = serde_json::from_str(&first).with_context(|| format!("bad announce line {first:?}"))?;

    let mut c2_args = common_args(scenario, seed);
    c2_args.extend([
        "--relay".into(),
        announce.relay.to_string(),
        "--control".into(),
        announce.control.to_string(),
        "--out".into(),
        c2_out.display().to_string(),
    ]);
    let mut c2 =
        Command::new(exe).arg("c2").args(&c2_args).kill_on_drop(true).spawn().context("cannot start c2 process")?;

    let (c2_status, relay_status) = tokio::join!(c2.wait(), relay.wait());
    let (c2_status, relay_status) = (c2_status?, relay_status?);
    if !relay_status.success() || !c2_status.success() {
        bail!("split run failed: relay {relay_status}, c2 {c2_status}");
    }
    let read = |p: &Path| -> Result<EventLog> {
        let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
        let _ = std::fs::remove_file(p);
        EventLog::parse(&text).map_err(anyhow::Error::msg)
    };
    let sea = read(&sea_out)?;
    let shore = read(&c2_out)?;
    Ok(sea.merge(&shore))
}
