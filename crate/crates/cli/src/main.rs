use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use auv_c2::dist::run_distributed;
use auv_c2::eventlog::EventLog;
use auv_c2::runner::{run_all_in_one, run_c2_process, run_relay_process, Announce, HttpOptions, RunOptions};
use auv_c2::scenario::{load_scenario, Scenario};
use auv_c2::transcript::{parse_utterances, render_replies};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "auv-c2",
    version,
    about = "Simulated AUV command and control: scenario runs, transcripts and the C2 service"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    All,
    Dist,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write the event log.
    Run {
        #[command(flatten)]
        common: Common,
        /// Event log path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        realtime_factor: f64,
        #[arg(long, value_enum, default_value_t = Mode::All)]
        mode: Mode,
        #[arg(long)]
        run_to_duration: bool,
    },
    /// Run a scenario while injecting timed utterances into one chat session.
    Transcript {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        utterances: PathBuf,
        /// Reply file, one reply per line.
        #[arg(long)]
        out: PathBuf,
        /// Also write the event log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Sea side of a split run: simulation, channel and TCP relay.
    Relay {
        #[command(flatten)]
        common: Common,
        /// Relay TCP address; defaults to the scenario's.
        #[arg(long)]
        listen: Option<SocketAddr>,
        /// Lockstep control address the C2 process connects to.
        #[arg(long, default_value = "127.0.0.1:0")]
        control: SocketAddr,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        realtime_factor: f64,
        #[arg(long)]
        run_to_duration: bool,
    },
    /// Shore side of a split run: the C2 service behind a relay client.
    C2 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        relay: SocketAddr,
        #[arg(long)]
        control: SocketAddr,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also serve the HTTP API here.
        #[arg(long)]
        http: Option<SocketAddr>,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
    /// Run a scenario in real time and serve the C2 API and console assets.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        realtime_factor: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Invalid(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn scenario(c: &Common) -> Result<Scenario, Failure> {
    let mut s = load_scenario(&c.scenario).map_err(|e| Failure::Invalid(format!("{}:\n{e}", c.scenario.display())))?;
    if let Some(seed) = c.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn check_factor(f: f64) -> Result<RunOptions, Failure> {
    if !(f >= 0.0 && f.is_finite()) {
        return Err(Failure::Invalid(format!("--realtime-factor must be a non-negative number, got {f}")));
    }
    Ok(RunOptions { realtime_factor: f, run_to_duration: false })
}

fn write_log(log: &EventLog, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            log.write_to(BufWriter::new(f))?;
        }
        None => log.write_to(io::stdout().lock())?,
    }
    Ok(())
}

async fn bind_http(addr: SocketAddr, static_dir: Option<PathBuf>) -> Result<HttpOptions, Failure> {
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("cannot bind {addr}"))?;
    Ok(HttpOptions { listener, static_dir })
}

async fn execute(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Run { common, out, realtime_factor, mode, run_to_duration } => {
            let scn = scenario(&common)?;
            let opts = RunOptions { run_to_duration, ..check_factor(realtime_factor)? };
            let log = match mode {
                Mode::All => run_all_in_one(&scn, opts, Vec::new(), None).await?.0.log,
                Mode::Dist => {
                    let exe = std::env::current_exe().context("cannot locate own executable")?;
                    run_distributed(&exe, &common.scenario, common.seed, opts).await?
                }
            };
            write_log(&log, out.as_deref())
        }
        Cmd::Transcript { common, utterances, out, log } => {
            let scn = scenario(&common)?;
            let text = std::fs::read_to_string(&utterances)
                .map_err(|e| Failure::Invalid(format!("{}: {e}", utterances.display())))?;
            let utts = parse_utterances(&text, scn.duration_s)
                .map_err(|e| Failure::Invalid(format!("{}: {e}", utterances.display())))?;
            let (run, _) = run_all_in_one(&scn, RunOptions::default(), utts, None).await?;
            std::fs::write(&out, render_replies(&run.replies))
                .with_context(|| format!("cannot write {}", out.display()))?;
            if let Some(p) = log {
                write_log(&run.log, Some(&p))?;
            }
            Ok(())
        }
        Cmd::Relay { common, listen, control, out, realtime_factor, run_to_duration } => {
            let scn = scenario(&common)?;
            let opts = RunOptions { run_to_duration, ..check_factor(realtime_factor)? };
            let listen = match listen {
                Some(a) => a,
                None => scn.relay.listen.parse().expect("validated with the scenario"),
            };
            let announce = |a: Announce| {
                let mut stdout = io::stdout().lock();
                let _ = writeln!(stdout, "{}", serde_json::to_string(&a).expect("serializable"));
                let _ = stdout.flush();
            };
            let log = run_relay_process(&scn, listen, control, opts, announce).await?;
            if let Some(p) = out {
                write_log(&log, Some(&p))?;
            }
            Ok(())
        }
        Cmd::C2 { common, relay, control, out, http, static_dir } => {
            let scn = scenario(&common)?;
            let http = match http {
                Some(a) => Some(bind_http(a, static_dir).await?),
                None => None,
            };
            let (run, _) = run_c2_process(&scn, Announce { relay, control }, Vec::new(), http).await?;
            if let Some(p) = out {
                write_log(&run.log, Some(&p))?;
            }
            Ok(())
        }
        Cmd::Serve { common, listen, static_dir, realtime_factor, out } => {
            let scn = scenario(&common)?;
            let opts = check_factor(realtime_factor)?;
            let http = bind_http(listen, static_dir).await?;
            tracing::info!("serving C2 API on http://{listen}");
            let (run, _c2) = run_all_in_one(&scn, opts, Vec::new(), Some(http)).await?;
            if let Some(p) = out {
                write_log(&run.log, Some(&p))?;
            }
            tracing::info!("scenario finished at t={} ms; still serving, Ctrl-C to stop", run.end_ms);
            tokio::signal::ctrl_c().await?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    match rt.block_on(execute(cli.cmd)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
