//! Lockstep execution of a scenario.
//!
//! The sea side owns the world, the acoustic channel and the relay server.
//! The shore side owns the C2 service and talks to the relay only through a
//! TCP relay client. One logical clock drives both: at every tick the shore
//! consumes what the relay fanned out, then hands its outbound frames to the
//! relay, then the sea side advances the world by one tick.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use auv_c2_core::acoustic::{decode_frame, encode_frame, Channel};
use auv_c2_core::c2::{serve, C2Service, MissionDb, SharedC2, C2_ADDRESS};
use auv_c2_core::domain::EnuPoint;
use auv_c2_core::relay::{make_envelope, parse_envelope, RelayClient, RelayHandle, RelayServer, TransmitRequest};
use auv_c2_core::sim::{Mode, World, WorldOptions};
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc::UnboundedReceiver;
use tokio::time::timeout;

use crate::eventlog::{EventLog, Record};
use crate::scenario::{OperatorCommand, Scenario};

/// How long either side waits for the other before giving up.
const IO_TIMEOUT: Duration = Duration::from_secs(10);
const COUNTER_PERIOD_MS: u64 = 60_000;
/// Upper bound on the wind-down after the mission ends.
const DRAIN_LIMIT_MS: u64 = 60_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Simulated seconds per wall-clock second; 0 disables pacing.
    pub realtime_factor: f64,
    pub run_to_duration: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { realtime_factor: 0.0, run_to_duration: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub t_ms: u64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub log: EventLog,
    pub replies: Vec<String>,
    pub end_ms: u64,
}

pub fn world_for(scn: &Scenario) -> Result<World> {
    let options = WorldOptions { drain_multiplier: scn.drain_multiplier, rf_range_m: scn.relay.rf_range_m };
    World::new(scn.plan.clone(), scn.vehicles.clone(), scn.fault_schedule.clone(), scn.seed, options)
        .map_err(|e| anyhow!("cannot build world: {e}"))
}

/// The C2 database as it stands before the first frame arrives: fleet and
/// plan loaded, initial allocation decisions recorded.
pub fn initial_db(scn: &Scenario) -> Result<MissionDb> {
    let world = world_for(scn)?;
    let mut db = MissionDb::new(C2_ADDRESS);
    db.load_mission(scn.plan.clone(), &scn.fleet(), world.allocations().to_vec());
    Ok(db)
}

pub struct Sea {
    world: World,
    channel: Channel,
    relay: RelayHandle,
    requests: UnboundedReceiver<TransmitRequest>,
    relay_vehicle: Option<u8>,
    relay_modem: u8,
    auvs: Vec<u8>,
    tick_ms: u64,
    clock: u64,
    next_counters_ms: u64,
    log: EventLog,
}

impl Sea {
    pub async fn start(scn: &Scenario, listen: SocketAddr) -> Result<Sea> {
        let (relay, requests) =
            RelayServer::spawn(listen).await.with_context(|| format!("cannot bind relay on {listen}"))?;
        let world = world_for(scn)?;
        let mut channel = Channel::new(scn.channel, scn.seed);
        let auvs = scn.auv_ids();
        for &id in &auvs {
            channel.register(id, world.vehicle(id).expect("scenario vehicle").state.pos)?;
        }
        let relay_vehicle = scn.relay_vehicle();
        let mut sea = Sea {
            world,
            channel,
            relay,
            requests,
            relay_vehicle,
            relay_modem: scn.relay.modem_id,
            auvs,
            tick_ms: scn.tick_ms,
            clock: 0,
            next_counters_ms: COUNTER_PERIOD_MS,
            log: EventLog::new(),
        };
        let pos = sea.relay_position();
        sea.channel.register(sea.relay_modem, pos)?;
        Ok(sea)
    }

    pub fn relay(&self) -> &RelayHandle {
        &self.relay
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    fn relay_position(&self) -> EnuPoint {
        self.relay_vehicle
            .and_then(|id| self.world.vehicle(id))
            .map(|v| v.state.pos)
            .unwrap_or_else(|| self.world.shore_enu())
    }

    fn transmit(&mut self, bytes: &[u8], src: u8) -> Result<()> {
        let report = self.channel.transmit(bytes, src, self.clock)?;
        let frame = decode_frame(bytes).map_err(|e| anyhow!("refusing to transmit a bad frame: {e:?}"))?;
        self.log.push(
            self.clock,
            &Record::Tx {
                tx_id: report.tx_id,
                src,
                dst: frame.dst,
                msg_type: frame.msg_type,
                seq: frame.seq,
                len: bytes.len(),
                tx_start_ms: report.tx_start_ms,
                tx_end_ms: report.tx_end_ms,
            },
        );
        for (endpoint, d) in report.out_of_range {
            self.log.push(
                self.clock,
                &Record::Drop {
                    tx_id: report.tx_id,
                    src,
                    endpoint,
                    distance_m: d,
                    cause: auv_c2_core::acoustic::DropCause::Range,
                },
            );
        }
        Ok(())
    }

    /// Sends the `m` frames the shore just submitted through the relay.
    pub async fn relay_transmit(&mut self, m: usize) -> Result<()> {
        for _ in 0..m {
            let req = timeout(IO_TIMEOUT, self.requests.recv())
                .await
                .context("timed out waiting for the relay to accept a frame")?
                .ok_or_else(|| anyhow!("relay stopped"))?;
            self.transmit(&req.frame, self.relay_modem)?;
        }
        Ok(())
    }

    /// Advances one tick and returns how many envelopes the relay fanned out.
    pub async fn advance(&mut self, step_world: bool) -> Result<usize> {
        self.clock += self.tick_ms;
        self.relay.set_clock(self.clock);
        if step_world {
            let out = self.world.step(self.tick_ms)?;
            for e in &out.events {
                self.log.push(self.clock, &Record::from_sim(e));
            }
            for f in &out.frames {
                self.transmit(&encode_frame(f).expect("world frames encode"), f.src)?;
            }
        }
        for &id in &self.auvs {
            self.channel.set_position(id, self.world.vehicle(id).expect("known").state.pos)?;
        }
        let pos = self.relay_position();
        self.channel.set_position(self.relay_modem, pos)?;

        let mut fanout = 0;
        for r in self.channel.poll_deliveries(self.clock) {
            let record = match r.dropped {
                Some(cause) => {
                    Record::Drop { tx_id: r.tx_id, src: r.src, endpoint: r.endpoint, distance_m: r.distance_m, cause }
                }
                None => Record::Delivery {
                    tx_id: r.tx_id,
                    src: r.src,
                    endpoint: r.endpoint,
                    distance_m: r.distance_m,
                    arrival_end_ms: r.arrival_end_ms,
                },
            };
            self.log.push(self.clock, &record);
            if !r.delivered() {
                continue;
            }
            if r.endpoint == self.relay_modem {
                fanout += self.relay.acoustic_rx(r.frame, self.clock).await;
            } else if let Ok(frame) = decode_frame(&r.frame) {
                let out = self.world.receive_frame(r.endpoint, &frame)?;
                for e in &out.events {
                    self.log.push(self.clock, &Record::from_sim(e));
                }
                for f in &out.frames {
                    self.transmit(&encode_frame(f).expect("world frames encode"), f.src)?;
                }
            }
        }
        if self.clock >= self.next_counters_ms {
            self.next_counters_ms += COUNTER_PERIOD_MS;
            self.log_counters().await;
        }
        Ok(fanout)
    }

    async fn log_counters(&mut self) {
        let c = self.relay.counters().await;
        self.log.push(self.clock, &Record::RelayCounters(c));
    }

    /// Every objective done and every AUV back at recovery.
    pub fn mission_done(&self) -> bool {
        self.world.mission_complete()
            && self.auvs.iter().all(|id| self.world.vehicle(*id).is_some_and(|v| v.state.mode == Mode::Recovered))
    }

    pub async fn wait_for_clients(&self, n: usize) -> Result<()> {
        let wait = async {
            while self.relay.client_count().await < n {
                tokio::time::sleep(Duration::from_millis(2)).await;
            }
        };
        timeout(IO_TIMEOUT, wait).await.context("relay client never connected")
    }

    pub async fn finish(mut self) -> EventLog {
        self.log_counters().await;
        self.relay.shutdown().await;
        self.log
    }
}

pub struct Shore {
    c2: SharedC2,
    client: RelayClient,
    commands: VecDeque<OperatorCommand>,
    utterances: VecDeque<Utterance>,
    session: String,
    replies: Vec<String>,
    log: EventLog,
}

impl Shore {
    pub async fn connect(
        c2: SharedC2,
        relay: SocketAddr,
        commands: Vec<OperatorCommand>,
        utterances: Vec<Utterance>,
    ) -> Result<Shore> {
        let client = RelayClient::connect(relay).await.with_context(|| format!("cannot reach relay at {relay}"))?;
        Ok(Shore {
            c2,
            client,
            commands: commands.into(),
            utterances: utterances.into(),
            session: "transcript".into(),
            replies: Vec::new(),
            log: EventLog::new(),
        })
    }

    pub fn replies(&self) -> &[String] {
        &self.replies
    }

    pub fn into_parts(self) -> (EventLog, Vec<String>) {
        (self.log, self.replies)
    }

    fn idle(&self) -> bool {
        self.commands.is_empty() && self.utterances.is_empty()
    }

    fn flush_journal(&mut self, c2: &mut C2Service, t_ms: u64) {
        for e in c2.take_journal() {
            if let Some(r) = Record::from_stream(e) {
                self.log.push(t_ms, &r);
            }
        }
    }

    /// Runs the shore at `clock`: reads `fanout` relayed envelopes, applies
    /// scheduled operator input, runs timers, then submits outbound frames.
    /// Returns the number submitted and whether scheduled input remains.
    pub async fn phase(&mut self, clock: u64, fanout: usize) -> Result<(usize, bool)> {
        let mut inbound = Vec::with_capacity(fanout);
        for _ in 0..fanout {
            let text = timeout(IO_TIMEOUT, self.client.recv())
                .await
                .context("timed out waiting for a relayed envelope")??
                .ok_or_else(|| anyhow!("relay closed the connection"))?;
            let (bytes, _) = parse_envelope(&text).map_err(|e| anyhow!("relay sent a bad envelope: {e:?}"))?;
            inbound.push(bytes);
        }

        let c2 = self.c2.clone();
        let outbound = {
            let mut c2 = c2.lock().expect("c2 lock");
            for bytes in &inbound {
                c2.ingest(bytes, clock);
            }
            // Timers first so operator input sees this tick's clock and states.
            c2.tick(clock);
            self.flush_journal(&mut c2, clock);
            while self.commands.front().is_some_and(|c| (c.t_s * 1000.0).round() as u64 <= clock) {
                let c = self.commands.pop_front().expect("peeked");
                let cmd_seq = c2.command(c.vehicle_id, c.cmd).ok();
                self.log.push(clock, &Record::Command { vehicle_id: c.vehicle_id, cmd: c.cmd, cmd_seq });
            }
            while self.utterances.front().is_some_and(|u| u.t_ms <= clock) {
                let u = self.utterances.pop_front().expect("peeked");
                let reply = c2.chat(&self.session, &u.text);
                self.replies.push(reply.text);
            }
            self.flush_journal(&mut c2, clock);
            c2.take_outbox()
        };
        for f in &outbound {
            let bytes = encode_frame(f).expect("c2 frames encode");
            self.client.send(&make_envelope(&bytes, 0)).await?;
        }
        Ok((outbound.len(), self.idle()))
    }
}

/// The sea side's view of the shore.
pub(crate) trait ShoreLink {
    async fn phase(&mut self, clock: u64, fanout: usize) -> Result<(usize, bool)>;
    async fn finish(&mut self, clock: u64) -> Result<()>;
}

impl ShoreLink for Shore {
    async fn phase(&mut self, clock: u64, fanout: usize) -> Result<(usize, bool)> {
        Shore::phase(self, clock, fanout).await
    }

    async fn finish(&mut self, _clock: u64) -> Result<()> {
        Ok(())
    }
}

/// Runs the lockstep loop until the duration elapses or the mission ends and
/// the channel falls quiet. Returns the final clock.
pub(crate) async fn drive(
    sea: &mut Sea,
    shore: &mut impl ShoreLink,
    duration_ms: u64,
    opts: RunOptions,
) -> Result<u64> {
    let pace = (opts.realtime_factor > 0.0)
        .then(|| Duration::from_secs_f64(sea.tick_ms as f64 / 1000.0 / opts.realtime_factor));
    let mut fanout = 0;
    let mut drain_until: Option<u64> = None;
    loop {
        let (sent, idle) = shore.phase(sea.clock, fanout).await?;
        sea.relay_transmit(sent).await?;
        if sea.clock >= duration_ms {
            break;
        }
        match drain_until {
            None if !opts.run_to_duration && idle && sea.mission_done() => {
                drain_until = Some((sea.clock + DRAIN_LIMIT_MS).min(duration_ms));
            }
            Some(limit) if sea.clock >= limit || (fanout == 0 && sea.channel.is_idle()) => break,
            _ => {}
        }
        if let Some(p) = pace {
            tokio::time::sleep(p).await;
        }
        fanout = sea.advance(drain_until.is_none()).await?;
    }
    shore.finish(sea.clock).await?;
    Ok(sea.clock)
}

/// Optional HTTP front end served while the scenario runs.
pub struct HttpOptions {
    pub listener: TcpListener,
    pub static_dir: Option<PathBuf>,
}

/// Runs everything in this process. The relay still listens on loopback and
/// the C2 reaches it only over TCP.
pub async fn run_all_in_one(
    scn: &Scenario,
    opts: RunOptions,
    utterances: Vec<Utterance>,
    http: Option<HttpOptions>,
) -> Result<(RunOutput, SharedC2)> {
    let mut sea = Sea::start(scn, "127.0.0.1:0".parse().expect("literal")).await?;
    let c2 = C2Service::new(initial_db(scn)?).shared();
    if let Some(h) = http {
        tokio::spawn(serve(c2.clone(), h.listener, h.static_dir));
    }
    let mut shore =
        Shore::connect(c2.clone(), sea.relay().local_addr(), scn.operator_commands.clone(), utterances).await?;
    sea.wait_for_clients(1).await?;
    let end_ms = drive(&mut sea, &mut shore, scn.duration_ms(), opts).await?;
    let sea_log = sea.finish().await;
    let (shore_log, replies) = shore.into_parts();
    Ok((RunOutput { log: sea_log.merge(&shore_log), replies, end_ms }, c2))
}

#[derive(Debug, Serialize, Deserialize)]
struct Tick {
    t_ms: u64,
    fanout: usize,
    #[serde(default)]
    done: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Submitted {
    sent: usize,
    idle: bool,
}

async fn write_json(w: &mut OwnedWriteHalf, v: &impl Serialize) -> Result<()> {
    let mut line = serde_json::to_string(v)?;
    line.push('\n');
    w.write_all(line.as_bytes()).await?;
    Ok(())
}

async fn read_json<T: for<'de> Deserialize<'de>>(r: &mut BufReader<OwnedReadHalf>) -> Result<T> {
    let mut line = String::new();
    let n = timeout(IO_TIMEOUT, r.read_line(&mut line)).await.context("control link timed out")??;
    if n == 0 {
        bail!("control link closed");
    }
    serde_json::from_str(&line).with_context(|| format!("bad control message {line:?}"))
}

/// Lockstep control connection between the relay process and the C2 process.
struct ControlLink {
    reader: BufReader<OwnedReadHalf>,
    writer: OwnedWriteHalf,
}

impl ControlLink {
    fn new(stream: TcpStream) -> Self {
        let _ = stream.set_nodelay(true);
        let (r, w) = stream.into_split();
        Self { reader: BufReader::new(r), writer: w }
    }
}

impl ShoreLink for ControlLink {
    async fn phase(&mut self, clock: u64, fanout: usize) -> Result<(usize, bool)> {
        write_json(&mut self.writer, &Tick { t_ms: clock, fanout, done: false }).await?;
        let s: Submitted = read_json(&mut self.reader).await?;
        Ok((s.sent, s.idle))
    }

    async fn finish(&mut self, clock: u64) -> Result<()> {
        write_json(&mut self.writer, &Tick { t_ms: clock, fanout: 0, done: true }).await
    }
}

/// Addresses a relay process announces once it is listening.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announce {
    pub relay: SocketAddr,
    pub control: SocketAddr,
}

/// Sea side of a split run: world, channel and relay, paced by the C2
/// process over the control connection.
pub async fn run_relay_process(
    scn: &Scenario,
    listen: SocketAddr,
    control: SocketAddr,
    opts: RunOptions,
    announce: impl FnOnce(Announce),
) -> Result<EventLog> {
    let mut sea = Sea::start(scn, listen).await?;
    let control = TcpListener::bind(control).await.with_context(|| format!("cannot bind control on {control}"))?;
    announce(Announce { relay: sea.relay().local_addr(), control: control.local_addr()? });
    let (stream, _) = timeout(Duration::from_secs(60), control.accept()).await.context("no C2 process connected")??;
    sea.wait_for_clients(1).await?;
    let mut link = ControlLink::new(stream);
    drive(&mut sea, &mut link, scn.duration_ms(), opts).await?;
    Ok(sea.finish().await)
}

/// Shore side of a split run.
pub async fn run_c2_process(
    scn: &Scenario,
    announce: Announce,
    utterances: Vec<Utterance>,
    http: Option<HttpOptions>,
) -> Result<(RunOutput, SharedC2)> {
    let c2 = C2Service::new(initial_db(scn)?).shared();
    if let Some(h) = http {
        tokio::spawn(serve(c2.clone(), h.listener, h.static_dir));
    }
    let mut shore = Shore::connect(c2.clone(), announce.relay, scn.operator_commands.clone(), utterances).await?;
    let stream = TcpStream::connect(announce.control)
        .await
        .with_context(|| format!("cannot reach relay control at {}", announce.control))?;
    let mut link = ControlLink::new(stream);
    let end_ms = loop {
        let tick: Tick = read_json(&mut link.reader).await?;
        if tick.done {
            break tick.t_ms;
        }
        let (sent, idle) = shore.phase(tick.t_ms, tick.fanout).await?;
        write_json(&mut link.writer, &Submitted { sent, idle }).await?;
    };
    let (log, replies) = shore.into_parts();
    Ok((RunOutput { log, replies, end_ms }, c2))
}
