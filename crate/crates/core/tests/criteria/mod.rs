//! Library-level acceptance checks. Each returns a one-line summary on
//! success. Shared between this crate's integration tests and the
//! workspace acceptance target.

#![allow(dead_code)]

use std::time::{Duration, Instant};

use auv_c2_core::acoustic::{
    crc16, decode_frame, decode_payload, delivery_probability, encode_frame, encode_payload, AcousticFrame, Channel,
    ChannelParams, DropCause, StatusReport, TelemetryMessage, MAX_PAYLOAD, MIN_FRAME_LEN,
};
use auv_c2_core::c2::{MissionDb, C2_ADDRESS};
use auv_c2_core::domain::{
    enu_to_latlon, EnuPoint, GeoPoint, MissionPlan, Objective, ObjectiveKind, ObjectiveState, SurveyArea, Track,
};
use auv_c2_core::relay::{make_envelope, RelayClient, RelayServer};
use auv_c2_core::sim::{
    allocate_objectives, Candidate, Condition, FaultSchedule, Faults, VehicleKind, VehicleSpec, World, WorldOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- oracles

/// CRC-16/CCITT-FALSE computed one bit at a time.
pub fn crc_reference(bytes: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &b in bytes {
        crc ^= u16::from(b) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ 0x1021 } else { crc << 1 };
        }
    }
    crc
}

/// Loss model with the stock parameters: 2% floor plus a fourth-power term
/// reaching certainty at 3500 m.
pub fn delivery_oracle(d: f64) -> f64 {
    if d >= 3500.0 {
        return 0.0;
    }
    let loss = 0.02 + 0.98 * (d / 3500.0).powi(4);
    1.0 - loss
}

/// Percent per hour for the stock AUV at `kn` knots.
pub fn drain_oracle(kn: f64) -> f64 {
    4.5 + 0.294 * kn * kn * kn
}

// ---------------------------------------------------------------- codec

fn random_message(rng: &mut ChaCha8Rng) -> TelemetryMessage {
    match rng.gen_range(0..4) {
        0 => TelemetryMessage::Status(StatusReport {
            lat_e7: rng.gen(),
            lon_e7: rng.gen(),
            depth_cm: rng.gen(),
            speed_cms: rng.gen(),
            heading_cdeg: rng.gen(),
            battery_pct: rng.gen(),
            fault_bits: rng.gen(),
            objective_id: rng.gen(),
            objective_pct: rng.gen(),
        }),
        1 => TelemetryMessage::Event { event_code: rng.gen(), objective_id: rng.gen(), detail: rng.gen() },
        2 => TelemetryMessage::Command { cmd_code: rng.gen(), arg: rng.gen() },
        _ => TelemetryMessage::Ack { cmd_seq: rng.gen(), status: rng.gen() },
    }
}

pub fn codec_suite() -> Check {
    const N: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DEC);
    for i in 0..N {
        let len = rng.gen_range(0..=MAX_PAYLOAD);
        let frame = AcousticFrame {
            src: rng.gen(),
            dst: rng.gen(),
            msg_type: rng.gen(),
            seq: rng.gen(),
            payload: (0..len).map(|_| rng.gen()).collect(),
        };
        let bytes = encode_frame(&frame).map_err(|e| format!("frame {i}: encode failed: {e}"))?;
        ensure(bytes.len() == MIN_FRAME_LEN + len, || format!("frame {i}: wrong length"))?;
        let back = decode_frame(&bytes).map_err(|e| format!("frame {i}: decode failed: {e}"))?;
        ensure(back == frame, || format!("frame {i}: round trip changed the frame"))?;

        let msg = random_message(&mut rng);
        let (ty, payload) = encode_payload(&msg);
        let back = decode_payload(ty, &payload).map_err(|e| format!("payload {i}: {e}"))?;
        ensure(back == msg, || format!("payload {i}: round trip changed {msg:?}"))?;
    }

    // 22 payload bytes make a 32-byte frame: 256 single-bit flips.
    let fixed = AcousticFrame { src: 1, dst: 255, msg_type: 1, seq: 0x1234, payload: (0..22).collect() };
    let bytes = encode_frame(&fixed).expect("fixed frame encodes");
    ensure(bytes.len() * 8 == 256, || format!("fixed frame is {} bytes", bytes.len()))?;
    let mut accepted = 0;
    for bit in 0..256 {
        let mut flipped = bytes.clone();
        flipped[bit / 8] ^= 0x80 >> (bit % 8);
        if decode_frame(&flipped).is_ok() {
            accepted += 1;
        }
    }
    ensure(accepted == 0, || format!("{accepted} of 256 bit flips decoded"))?;

    let check = crc16(b"123456789");
    ensure(crc_reference(b"123456789") == 0x29B1, || "reference CRC disagrees with the published check value".into())?;
    ensure(check == 0x29B1, || format!("crc16(\"123456789\") = 0x{check:04X}"))?;
    for i in 0..1000 {
        let data: Vec<u8> = (0..rng.gen_range(0..200)).map(|_| rng.gen()).collect();
        ensure(crc16(&data) == crc_reference(&data), || format!("crc mismatch on sample {i}"))?;
    }
    Ok(format!("{N} frame and {N} payload round trips, 256/256 bit flips rejected, check value 0x{check:04X}"))
}

// ---------------------------------------------------------------- channel

fn two_node_channel(params: ChannelParams, d: f64, seed: u64) -> Channel {
    let mut ch = Channel::new(params, seed);
    ch.register(1, EnuPoint::new(0.0, 0.0)).expect("fresh id");
    ch.register(2, EnuPoint::new(d, 0.0)).expect("fresh id");
    ch
}

fn frame_between(src: u8, dst: u8, seq: u16, payload_len: usize) -> Vec<u8> {
    encode_frame(&AcousticFrame { src, dst, msg_type: 1, seq, payload: vec![0x5A; payload_len] }).expect("valid")
}

fn frame_to(dst: u8, seq: u16, payload_len: usize) -> Vec<u8> {
    frame_between(1, dst, seq, payload_len)
}

pub fn channel_laws() -> Check {
    let stock = ChannelParams::default();

    // (a) nothing crosses 3500 m or more.
    for d in [3500.0, 3501.0, 10_000.0] {
        let p = delivery_probability(d, &stock);
        ensure(p == 0.0, || format!("p({d}) = {p}"))?;
        ensure(delivery_oracle(d) == 0.0, || "oracle disagrees at range".into())?;
        let mut ch = two_node_channel(stock, d, 1);
        let mut delivered = 0;
        for k in 0..1000u64 {
            ch.transmit(&frame_to(2, k as u16, 4), 1, k * 10_000).map_err(|e| e.to_string())?;
        }
        for r in ch.poll_deliveries(u64::MAX / 2) {
            delivered += usize::from(r.delivered());
        }
        ensure(delivered == 0, || format!("{delivered} frames delivered at {d} m"))?;
    }

    // (b) propagation latency d / 1500 s. A steep exponent keeps the far
    // samples from being lost.
    let lossless = ChannelParams { base_loss: 0.0, loss_exponent: 64.0, ..stock };
    for d in [0.0, 750.0, 1500.0, 3000.0] {
        let mut ch = two_node_channel(lossless, d, 2);
        let rep = ch.transmit(&frame_to(2, 1, 4), 1, 1_000).map_err(|e| e.to_string())?;
        let rx = ch.poll_deliveries(60_000);
        let r = rx.first().ok_or_else(|| format!("no arrival at {d} m"))?;
        let latency = r.arrival_start_ms as f64 - rep.tx_start_ms as f64;
        let expected = d / 1500.0 * 1000.0;
        ensure((latency - expected).abs() <= 1.0, || format!("latency {latency} ms at {d} m, expected {expected}"))?;
    }

    // (c) saturated sender: bits delivered inside a 60 s window.
    let mut ch = two_node_channel(lossless, 100.0, 3);
    let frame = frame_to(2, 0, MAX_PAYLOAD);
    for _ in 0..2000 {
        ch.transmit(&frame, 1, 0).map_err(|e| e.to_string())?;
    }
    let window_ms = 60_000;
    let bits: usize = ch
        .poll_deliveries(window_ms)
        .iter()
        .filter(|r| r.delivered() && r.arrival_end_ms <= window_ms)
        .map(|r| r.frame.len() * 8)
        .sum();
    let goodput = bits as f64 / 60.0;
    ensure(goodput <= 13_900.0, || format!("goodput {goodput:.1} bit/s"))?;
    ensure(goodput > 13_000.0, || format!("channel was not saturated: {goodput:.1} bit/s"))?;

    // (d) Monte Carlo at 1750 m.
    let trials = 10_000u64;
    let mut ch = two_node_channel(stock, 1750.0, 4);
    for k in 0..trials {
        ch.transmit(&frame_to(2, k as u16, 4), 1, k * 5_000).map_err(|e| e.to_string())?;
    }
    let delivered = ch.poll_deliveries(trials * 5_000 + 60_000).iter().filter(|r| r.delivered()).count();
    let rate = delivered as f64 / trials as f64;
    let oracle = delivery_oracle(1750.0);
    ensure((oracle - 0.919).abs() < 0.001, || format!("oracle p(1750) = {oracle}"))?;
    ensure((rate - 0.919).abs() <= 0.01, || format!("delivery rate {rate:.4} at 1750 m"))?;

    // (e) two overlapping arrivals at one receiver.
    let mut ch = Channel::new(lossless, 5);
    ch.register(1, EnuPoint::new(-300.0, 0.0)).expect("fresh");
    ch.register(2, EnuPoint::new(0.0, 0.0)).expect("fresh");
    ch.register(3, EnuPoint::new(300.0, 0.0)).expect("fresh");
    let a = ch.transmit(&frame_between(1, 2, 1, 16), 1, 0).map_err(|e| e.to_string())?;
    let b = ch.transmit(&frame_between(3, 2, 2, 16), 3, 5).map_err(|e| e.to_string())?;
    let at_2: Vec<_> = ch.poll_deliveries(10_000).into_iter().filter(|r| r.endpoint == 2).collect();
    ensure(at_2.len() == 2, || format!("{} receptions at the middle node", at_2.len()))?;
    ensure(at_2.iter().all(|r| r.dropped == Some(DropCause::Collision)), || format!("{at_2:?}"))?;
    ensure([a.tx_id, b.tx_id].iter().all(|id| at_2.iter().any(|r| r.tx_id == *id)), || "missing tx".into())?;

    Ok(format!(
        "p=0 at 3500/3501/10000 m, latency within 1 ms, goodput {goodput:.0} bit/s, p(1750)={rate:.4} (oracle {oracle:.5}), collision drops both"
    ))
}

// ---------------------------------------------------------------- endurance

pub fn endurance() -> Check {
    const ORIGIN: GeoPoint = GeoPoint::new(56.0, -5.0);
    let geo = |x: f64, y: f64| enu_to_latlon(ORIGIN, EnuPoint::new(x, y)).expect("in range");
    let plan = MissionPlan {
        origin: ORIGIN,
        launch: ORIGIN,
        // Far enough that the post-abort run home outlasts the battery.
        recovery: geo(-15_000.0, 0.0),
        objectives: vec![Objective {
            id: 1,
            name: "Reacquire".into(),
            kind: ObjectiveKind::Reacquire { target: geo(100.0, 0.0) },
            state: ObjectiveState::Pending,
        }],
        shore_station: ORIGIN,
    };
    let tick_ms = 500;
    let mut world = World::new(
        plan,
        vec![(VehicleSpec::auv(1, "AUV-1"), ORIGIN)],
        FaultSchedule::default(),
        0,
        WorldOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let mut legs = Vec::new();
    for i in 0..8 {
        legs.push(EnuPoint::new(if i % 2 == 0 { 0.0 } else { 15_000.0 }, 0.0));
    }
    world.override_track(1, Track { waypoints: legs }).map_err(|e| e.to_string())?;

    let mut t_ms = 0u64;
    loop {
        world.step(tick_ms).map_err(|e| e.to_string())?;
        t_ms += tick_ms;
        let v = world.vehicle(1).expect("vehicle");
        if v.state.battery_pct <= 0.0 {
            break;
        }
        let kn = v.state.speed_kn;
        ensure((kn - 2.5).abs() < 1e-9, || format!("speed {kn} kn at t={t_ms} ms"))?;
        ensure(t_ms < 20 * 3_600_000, || "battery never emptied".into())?;
    }
    let hours = t_ms as f64 / 3_600_000.0;
    let analytic_h = 100.0 / drain_oracle(2.5);
    let tick_h = tick_ms as f64 / 3_600_000.0;
    ensure((hours - analytic_h).abs() <= tick_h, || format!("empty at {hours:.5} h, analytic {analytic_h:.5} h"))?;
    ensure(format!("{hours:.1}") == "11.0", || format!("empty at {hours:.4} h"))?;
    ensure((8.0..=14.0).contains(&hours), || "outside 8-14 h".into())?;
    Ok(format!("battery empty after {hours:.4} h at 2.5 kn (analytic {analytic_h:.4} h)"))
}

// ---------------------------------------------------------------- allocator

const ALLOC_ORIGIN: GeoPoint = GeoPoint::new(56.0, -5.0);

/// Objective pool: two reacquire targets and two unrotated surveys whose
/// heights are whole multiples of the lane spacing.
fn pool() -> Vec<(u8, ObjectiveKind, OracleObjective)> {
    let geo = |x: f64, y: f64| enu_to_latlon(ALLOC_ORIGIN, EnuPoint::new(x, y)).expect("in range");
    let target = |x: f64, y: f64| OracleObjective { entry: (x, y), exit: (x, y), internal: 0.0 };
    let survey = |x: f64, y: f64, w: f64, h: f64, s: f64| {
        let legs = (h / s).round();
        let top = y + h - s / 2.0;
        let exit_x = if legs as u64 % 2 == 0 { x } else { x + w };
        OracleObjective { entry: (x, y + s / 2.0), exit: (exit_x, top), internal: legs * w + (legs - 1.0) * s }
    };
    let area =
        |x: f64, y: f64, w: f64, h: f64| SurveyArea { corner: geo(x, y), width_m: w, height_m: h, rotation_deg: 0.0 };
    vec![
        (1, ObjectiveKind::Reacquire { target: geo(800.0, 300.0) }, target(800.0, 300.0)),
        (
            2,
            ObjectiveKind::Survey { area: area(-600.0, 200.0, 300.0, 200.0), spacing_m: 50.0 },
            survey(-600.0, 200.0, 300.0, 200.0, 50.0),
        ),
        (3, ObjectiveKind::Reacquire { target: geo(-100.0, -900.0) }, target(-100.0, -900.0)),
        (
            4,
            ObjectiveKind::Survey { area: area(400.0, -500.0, 200.0, 150.0), spacing_m: 50.0 },
            survey(400.0, -500.0, 200.0, 150.0, 50.0),
        ),
    ]
}

#[derive(Clone, Copy)]
struct OracleObjective {
    entry: (f64, f64),
    exit: (f64, f64),
    internal: f64,
}

#[derive(Clone, Copy)]
struct OracleVehicle {
    id: u8,
    pos: (f64, f64),
    faults: Faults,
    battery: f64,
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Winner and every candidate's marginal cost.
type OracleDecision = (Option<u8>, Vec<(u8, f64)>);

/// Brute force over eligible vehicles for each objective in order, with
/// route ends advanced by the oracle itself.
fn oracle_allocation(vehicles: &[OracleVehicle], objectives: &[OracleObjective]) -> Vec<OracleDecision> {
    let mut ends: Vec<(u8, (f64, f64))> = vehicles.iter().map(|v| (v.id, v.pos)).collect();
    let mut out = Vec::new();
    for o in objectives {
        let costs: Vec<(u8, f64)> = ends.iter().map(|(id, e)| (*id, dist(*e, o.entry) + o.internal)).collect();
        let mut best: Option<(u8, f64)> = None;
        for (v, (id, c)) in vehicles.iter().zip(&costs) {
            let eligible = !(v.faults.contains(Faults::MOTOR) || v.faults.contains(Faults::NAV)) && v.battery > 20.0;
            if !eligible {
                continue;
            }
            best = match best {
                Some((bid, bc)) if bc < *c - 1e-6 || ((bc - *c).abs() <= 1e-6 && bid < *id) => Some((bid, bc)),
                _ => Some((*id, *c)),
            };
        }
        if let Some((id, _)) = best {
            if let Some(e) = ends.iter_mut().find(|e| e.0 == id) {
                e.1 = o.exit;
            }
        }
        out.push((best.map(|b| b.0), costs));
    }
    out
}

fn soundness(db: &MissionDb, decision_objective: u8, chosen: Option<u8>, ids: &[u8]) -> Result<(), String> {
    for &v in ids {
        if Some(v) == chosen {
            let e = db.explain_why(v, decision_objective).map_err(|e| format!("why({v}): {e}"))?;
            ensure(!e.cited.is_empty() && e.cited.iter().all(|c| c.value && c.vehicle_id == v), || {
                format!("why cites {:?}", e.cited)
            })?;
        } else {
            let e = db.explain_why_not(v, decision_objective).map_err(|e| format!("why-not({v}): {e}"))?;
            ensure(e.cited.len() == 1 && !e.cited[0].value && e.cited[0].vehicle_id == v, || {
                format!("why-not cites {:?}", e.cited)
            })?;
            let first_false = e.decision.conditions_for(v).find(|c| !c.value).map(|c| c.condition);
            ensure(first_false == Some(e.cited[0].condition), || "why-not skipped the first false condition".into())?;
        }
    }
    Ok(())
}

pub fn allocator_oracle() -> Check {
    let spots = [(0.0, 0.0), (500.0, -200.0), (-350.0, 400.0)];
    let states = [(Faults::NONE, 90.0), (Faults::MOTOR, 90.0), (Faults::NONE, 15.0)];
    let pool = pool();
    let plan = MissionPlan {
        origin: ALLOC_ORIGIN,
        launch: ALLOC_ORIGIN,
        recovery: ALLOC_ORIGIN,
        objectives: pool
            .iter()
            .map(|(id, kind, _)| Objective {
                id: *id,
                name: format!("Objective {id}"),
                kind: kind.clone(),
                state: ObjectiveState::Pending,
            })
            .collect(),
        shore_station: ALLOC_ORIGIN,
    };

    // Every ordered selection of 1..=4 objectives.
    let mut orders: Vec<Vec<usize>> = Vec::new();
    fn extend(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if !prefix.is_empty() {
            out.push(prefix.clone());
        }
        for i in 0..n {
            if !prefix.contains(&i) {
                prefix.push(i);
                extend(prefix, n, out);
                prefix.pop();
            }
        }
    }
    extend(&mut Vec::new(), pool.len(), &mut orders);

    let per_vehicle = spots.len() * states.len();
    let mut fixtures = 0usize;
    let mut decisions_checked = 0usize;
    for n in 1..=3usize {
        for code in 0..per_vehicle.pow(n as u32) {
            let mut vehicles = Vec::new();
            let mut c = code;
            for i in 0..n {
                let k = c % per_vehicle;
                c /= per_vehicle;
                let (faults, battery) = states[k % states.len()];
                vehicles.push(OracleVehicle { id: i as u8 + 1, pos: spots[k / states.len()], faults, battery });
            }
            let candidates: Vec<Candidate> = vehicles
                .iter()
                .map(|v| Candidate {
                    id: v.id,
                    kind: VehicleKind::Auv,
                    faults: v.faults,
                    battery_pct: v.battery,
                    route_end: EnuPoint::new(v.pos.0, v.pos.1),
                })
                .collect();
            let fleet: Vec<VehicleSpec> =
                vehicles.iter().map(|v| VehicleSpec::auv(v.id, format!("AUV-{}", v.id))).collect();
            let ids: Vec<u8> = vehicles.iter().map(|v| v.id).collect();
            for order in &orders {
                fixtures += 1;
                let oids: Vec<u8> = order.iter().map(|&i| pool[i].0).collect();
                let oracle_objs: Vec<OracleObjective> = order.iter().map(|&i| pool[i].2).collect();
                let (_, decisions) = allocate_objectives(&plan, &candidates, &oids, 0.0).map_err(|e| e.to_string())?;
                let expected = oracle_allocation(&vehicles, &oracle_objs);
                for (d, (want, costs)) in decisions.iter().zip(&expected) {
                    ensure(d.chosen_vehicle == *want, || {
                        format!(
                            "objective {} with {n} vehicles (code {code}): chose {:?}, oracle {:?}",
                            d.objective_id, d.chosen_vehicle, want
                        )
                    })?;
                    for (id, cost) in costs {
                        let got = d.detail(*id, Condition::MinMarginalCost).unwrap_or(f64::NAN);
                        ensure((got - cost).abs() < 1e-3, || format!("cost for {id}: {got} vs oracle {cost}"))?;
                    }
                    if let Some(w) = d.chosen_vehicle {
                        ensure(d.conditions_for(w).all(|c| c.value), || "winner has a false condition".into())?;
                    }
                    for &id in &ids {
                        if Some(id) != d.chosen_vehicle {
                            ensure(d.conditions_for(id).any(|c| !c.value), || "loser has no false condition".into())?;
                        }
                    }
                }
                let mut db = MissionDb::new(C2_ADDRESS);
                db.load_mission(plan.clone(), &fleet, decisions.clone());
                for d in &decisions {
                    soundness(&db, d.objective_id, d.chosen_vehicle, &ids)?;
                    decisions_checked += 1;
                }
            }
        }
    }
    Ok(format!("{fixtures} fixtures, {decisions_checked} decisions match brute force and pass explanation soundness"))
}

// ---------------------------------------------------------------- relay

async fn recv_n(client: &mut RelayClient, n: usize) -> Result<Vec<String>, String> {
    let mut got = Vec::with_capacity(n);
    while got.len() < n {
        match tokio::time::timeout(Duration::from_secs(5), client.recv()).await {
            Ok(Ok(Some(m))) => got.push(m),
            Ok(Ok(None)) => return Err(format!("connection closed after {}", got.len())),
            Ok(Err(e)) => return Err(e.to_string()),
            Err(_) => return Err(format!("timed out after {} envelopes", got.len())),
        }
    }
    Ok(got)
}

pub async fn relay_transparency() -> Check {
    let (relay, mut requests) = RelayServer::spawn("127.0.0.1:0").await.map_err(|e| e.to_string())?;
    let addr = relay.local_addr();
    let mut clients = Vec::new();
    for _ in 0..3 {
        clients.push(RelayClient::connect(addr).await.map_err(|e| e.to_string())?);
    }
    let t0 = Instant::now();
    while relay.client_count().await < 3 {
        ensure(t0.elapsed() < Duration::from_secs(5), || "clients never registered".into())?;
        tokio::time::sleep(Duration::from_millis(2)).await;
    }

    // AUV (1) to relay modem (200) over a lossless channel.
    let params = ChannelParams { base_loss: 0.0, ..ChannelParams::default() };
    let mut ch = Channel::new(params, 9);
    ch.register(1, EnuPoint::new(0.0, 0.0)).expect("fresh");
    ch.register(200, EnuPoint::new(600.0, 0.0)).expect("fresh");
    let mut sent = Vec::new();
    for k in 0..100u16 {
        let msg = TelemetryMessage::Event { event_code: 1, objective_id: 1, detail: k };
        let (msg_type, payload) = encode_payload(&msg);
        let bytes = encode_frame(&AcousticFrame { src: 1, dst: 255, msg_type, seq: k, payload }).expect("valid");
        ch.transmit(&bytes, 1, u64::from(k) * 1_000).map_err(|e| e.to_string())?;
        sent.push(bytes);
    }
    let mut expected = Vec::new();
    for r in ch.poll_deliveries(200_000).into_iter().filter(|r| r.endpoint == 200 && r.delivered()) {
        expected.push(make_envelope(&r.frame, r.arrival_end_ms));
        relay.acoustic_rx(r.frame, r.arrival_end_ms).await;
    }
    ensure(expected.len() == 100, || format!("{} of 100 frames reached the relay modem", expected.len()))?;
    for (i, c) in clients.iter_mut().enumerate() {
        let got = recv_n(c, 100).await?;
        ensure(got == expected, || format!("client {i} saw a different envelope sequence"))?;
    }

    // Client-submitted command goes out acoustically unchanged.
    let (ty, payload) = encode_payload(&TelemetryMessage::Command { cmd_code: 1, arg: 0 });
    let cmd = encode_frame(&AcousticFrame { src: C2_ADDRESS, dst: 1, msg_type: ty, seq: 7, payload }).expect("valid");
    clients[0].send(&make_envelope(&cmd, 0)).await.map_err(|e| e.to_string())?;
    let req = tokio::time::timeout(Duration::from_secs(5), requests.recv())
        .await
        .map_err(|_| "command never reached the relay".to_string())?
        .ok_or("relay stopped")?;
    ensure(req.frame == cmd, || "relay altered the command frame".into())?;
    ch.transmit(&req.frame, 200, 300_000).map_err(|e| e.to_string())?;
    let at_auv: Vec<_> = ch.poll_deliveries(400_000).into_iter().filter(|r| r.endpoint == 1).collect();
    ensure(at_auv.len() == 1 && at_auv[0].frame == cmd, || "command not delivered byte-identical".into())?;

    // A client that never reads must not hold up the others.
    let _stalled = clients.pop().expect("three clients");
    let burst: Vec<Vec<u8>> = sent.iter().cycle().take(2_000).cloned().collect();
    let n = burst.len();
    let t0 = Instant::now();
    let readers: Vec<_> =
        clients.into_iter().map(|mut c| tokio::spawn(async move { recv_n(&mut c, n).await.map(|_| ()) })).collect();
    for (k, f) in burst.into_iter().enumerate() {
        relay.acoustic_rx(f, 400_000 + k as u64).await;
    }
    for r in readers {
        r.await.map_err(|e| e.to_string())??;
    }
    let elapsed = t0.elapsed();
    ensure(elapsed < Duration::from_secs(2), || format!("live clients took {elapsed:?} with a stalled peer"))?;
    relay.shutdown().await;
    Ok(format!("3 clients x 100 identical envelopes, command byte-identical, 2000-frame burst past a stalled client in {elapsed:?}"))
}
