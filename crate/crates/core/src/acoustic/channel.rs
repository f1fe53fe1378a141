//! Simulated acoustic medium: range-limited lossy broadcast with propagation
//! delay, serialization delay, half-duplex modems and receiver-side
//! collisions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::EnuPoint;

/// Transmissions older than this are forgotten once fully resolved.
const HISTORY_MS: u64 = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub sound_speed_mps: f64,
    pub bitrate_bps: f64,
    pub max_range_m: f64,
    pub base_loss: f64,
    pub loss_exponent: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            sound_speed_mps: 1500.0,
            bitrate_bps: 13_900.0,
            max_range_m: 3500.0,
            base_loss: 0.02,
            loss_exponent: 4.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.sound_speed_mps > 0.0) {
            return Err("sound_speed_mps must be positive".into());
        }
        if !(self.bitrate_bps > 0.0) {
            return Err("bitrate_bps must be positive".into());
        }
        if !(self.max_range_m > 0.0) {
            return Err("max_range_m must be positive".into());
        }
        if !(0.0..1.0).contains(&self.base_loss) {
            return Err("base_loss must be in [0, 1)".into());
        }
        if !(self.loss_exponent >= 1.0) {
            return Err("loss_exponent must be at least 1".into());
        }
        Ok(())
    }

    /// Serialization time of `len` bytes, rounded up to whole milliseconds.
    pub fn tx_duration_ms(&self, len: usize) -> u64 {
        ((len as f64) * 8.0 * 1000.0 / self.bitrate_bps).ceil() as u64
    }

    pub fn propagation_ms(&self, distance_m: f64) -> u64 {
        (distance_m / self.sound_speed_mps * 1000.0).round() as u64
    }
}

pub fn delivery_probability(d_m: f64, params: &ChannelParams) -> f64 {
    if d_m > params.max_range_m {
        return 0.0;
    }
    let ratio = d_m / params.max_range_m;
    let loss = params.base_loss + (1.0 - params.base_loss) * ratio.powf(params.loss_exponent);
    1.0 - loss.min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropCause {
    Loss,
    Collision,
    Range,
    HalfDuplex,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("endpoint {0} is not registered")]
    UnknownEndpoint(u8),
    #[error("endpoint {0} is already registered")]
    DuplicateEndpoint(u8),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModemEndpoint {
    pub id: u8,
    pub pos: EnuPoint,
    pub busy_until_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    pub endpoint: u8,
    pub start_ms: u64,
    pub end_ms: u64,
    pub distance_m: f64,
    /// Outcome of the loss draw; `true` means the frame survived it.
    pub survived_loss: bool,
    pub addressed: bool,
    resolved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InFlightTransmission {
    pub id: u64,
    pub src: u8,
    pub frame: Vec<u8>,
    pub origin: EnuPoint,
    pub tx_start_ms: u64,
    pub tx_end_ms: u64,
    pub arrivals: Vec<Arrival>,
}

impl InFlightTransmission {
    fn overlaps_arrival_at(&self, endpoint: u8, start: u64, end: u64) -> bool {
        self.arrivals.iter().any(|a| a.endpoint == endpoint && a.start_ms < end && start < a.end_ms)
    }

    fn horizon_ms(&self) -> u64 {
        self.arrivals.iter().map(|a| a.end_ms).max().unwrap_or(0).max(self.tx_end_ms)
    }
}

/// Result of handing a frame to a modem.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitReport {
    pub tx_id: u64,
    pub src: u8,
    pub tx_start_ms: u64,
    pub tx_end_ms: u64,
    /// Addressed endpoints that were beyond range at transmit time.
    pub out_of_range: Vec<(u8, f64)>,
}

/// Resolution of one scheduled arrival at an addressed receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    pub tx_id: u64,
    pub src: u8,
    pub endpoint: u8,
    pub frame: Vec<u8>,
    pub tx_start_ms: u64,
    pub arrival_start_ms: u64,
    pub arrival_end_ms: u64,
    pub distance_m: f64,
    pub dropped: Option<DropCause>,
}

impl Reception {
    pub fn delivered(&self) -> bool {
        self.dropped.is_none()
    }
}

/// Frame dst field read without full validation; used only for addressing.
fn frame_dst(frame: &[u8]) -> Option<u8> {
    frame.get(3).copied()
}

#[derive(Debug, Clone)]
pub struct Channel {
    params: ChannelParams,
    endpoints: BTreeMap<u8, ModemEndpoint>,
    in_flight: Vec<InFlightTransmission>,
    rng: ChaCha8Rng,
    next_id: u64,
}

impl Channel {
    pub fn new(params: ChannelParams, seed: u64) -> Self {
        Self {
            params,
            endpoints: BTreeMap::new(),
            in_flight: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_id: 0,
        }
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn register(&mut self, id: u8, pos: EnuPoint) -> Result<(), ChannelError> {
        if self.endpoints.contains_key(&id) {
            return Err(ChannelError::DuplicateEndpoint(id));
        }
        self.endpoints.insert(id, ModemEndpoint { id, pos, busy_until_ms: 0 });
        Ok(())
    }

    pub fn set_position(&mut self, id: u8, pos: EnuPoint) -> Result<(), ChannelError> {
        let ep = self.endpoints.get_mut(&id).ok_or(ChannelError::UnknownEndpoint(id))?;
        ep.pos = pos;
        Ok(())
    }

    pub fn endpoint(&self, id: u8) -> Option<&ModemEndpoint> {
        self.endpoints.get(&id)
    }

    pub fn in_flight(&self) -> &[InFlightTransmission] {
        &self.in_flight
    }

    /// True when no scheduled arrival remains unresolved.
    pub fn is_idle(&self) -> bool {
        self.in_flight.iter().all(|t| t.arrivals.iter().all(|a| a.resolved))
    }

    /// Schedules `frame` from `src`. A busy modem queues the frame behind its
    /// current transmission (FIFO).
    pub fn transmit(&mut self, frame: &[u8], src: u8, now_ms: u64) -> Result<TransmitReport, ChannelError> {
        let sender = self.endpoints.get(&src).ok_or(ChannelError::UnknownEndpoint(src))?;
        let origin = sender.pos;
        let tx_start = now_ms.max(sender.busy_until_ms);
        let tx_end = tx_start + self.params.tx_duration_ms(frame.len());
        let dst = frame_dst(frame);

        let mut arrivals = Vec::new();
        let mut out_of_range = Vec::new();
        for ep in self.endpoints.values().filter(|ep| ep.id != src) {
            let d = origin.distance(&ep.pos);
            let addressed = dst.is_some_and(|dst| dst == ep.id || dst == crate::acoustic::BROADCAST);
            if d > self.params.max_range_m {
                if addressed {
                    out_of_range.push((ep.id, d));
                }
                continue;
            }
            let p = delivery_probability(d, &self.params);
            let draw: f64 = self.rng.gen();
            let delay = self.params.propagation_ms(d);
            arrivals.push(Arrival {
                endpoint: ep.id,
                start_ms: tx_start + delay,
                end_ms: tx_end + delay,
                distance_m: d,
                survived_loss: draw < p,
                addressed,
                resolved: false,
            });
        }

        if let Some(sender) = self.endpoints.get_mut(&src) {
            sender.busy_until_ms = tx_end;
        }
        let id = self.next_id;
        self.next_id += 1;
        self.in_flight.push(InFlightTransmission {
            id,
            src,
            frame: frame.to_vec(),
            origin,
            tx_start_ms: tx_start,
            tx_end_ms: tx_end,
            arrivals,
        });
        Ok(TransmitReport { tx_id: id, src, tx_start_ms: tx_start, tx_end_ms: tx_end, out_of_range })
    }

    /// Resolves every arrival that has finished by `now_ms`, returning the
    /// outcome at each addressed receiver ordered by arrival end time.
    pub fn poll_deliveries(&mut self, now_ms: u64) -> Vec<Reception> {
        let mut decided = Vec::new();
        for (ti, tx) in self.in_flight.iter().enumerate() {
            for (ai, a) in tx.arrivals.iter().enumerate() {
                if a.resolved || a.end_ms > now_ms {
                    continue;
                }
                let cause = if !a.addressed {
                    None
                } else if self.receiver_transmitting(a.endpoint, a.start_ms, a.end_ms) {
                    Some(DropCause::HalfDuplex)
                } else if self
                    .in_flight
                    .iter()
                    .any(|other| other.id != tx.id && other.overlaps_arrival_at(a.endpoint, a.start_ms, a.end_ms))
                {
                    Some(DropCause::Collision)
                } else if !a.survived_loss {
                    Some(DropCause::Loss)
                } else {
                    None
                };
                decided.push((ti, ai, cause));
            }
        }

        let mut out = Vec::new();
        for (ti, ai, cause) in decided {
            let tx = &mut self.in_flight[ti];
            let a = &mut tx.arrivals[ai];
            a.resolved = true;
            if !a.addressed {
                continue;
            }
            out.push(Reception {
                tx_id: tx.id,
                src: tx.src,
                endpoint: a.endpoint,
                frame: tx.frame.clone(),
                tx_start_ms: tx.tx_start_ms,
                arrival_start_ms: a.start_ms,
                arrival_end_ms: a.end_ms,
                distance_m: a.distance_m,
                dropped: cause,
            });
        }
        out.sort_by_key(|r| (r.arrival_end_ms, r.tx_id, r.endpoint));

        self.in_flight.retain(|t| !(t.arrivals.iter().all(|a| a.resolved) && t.horizon_ms() + HISTORY_MS < now_ms));
        out
    }

    fn receiver_transmitting(&self, endpoint: u8, start: u64, end: u64) -> bool {
        self.in_flight.iter().any(|t| t.src == endpoint && t.tx_start_ms < end && start < t.tx_end_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::{encode_frame, AcousticFrame, BROADCAST};

    fn frame(src: u8, dst: u8, len: usize) -> Vec<u8> {
        encode_frame(&AcousticFrame { src, dst, msg_type: 1, seq: 0, payload: vec![0; len] }).unwrap()
    }

    fn lossless() -> ChannelParams {
        ChannelParams { base_loss: 0.0, loss_exponent: 64.0, ..ChannelParams::default() }
    }

    #[test]
    fn probability_curve() {
        let p = ChannelParams::default();
        assert!((delivery_probability(0.0, &p) - 0.98).abs() < 1e-12);
        assert_eq!(delivery_probability(3500.0, &p), 0.0);
        assert!((delivery_probability(1750.0, &p) - 0.91875).abs() < 1e-12);
        assert_eq!(delivery_probability(3501.0, &p), 0.0);
    }

    #[test]
    fn tx_duration_of_max_frame() {
        assert_eq!(ChannelParams::default().tx_duration_ms(74), 43);
    }

    #[test]
    fn latency_and_range() {
        let mut ch = Channel::new(lossless(), 1);
        ch.register(1, EnuPoint::ORIGIN).unwrap();
        ch.register(2, EnuPoint::new(1500.0, 0.0)).unwrap();
        ch.register(3, EnuPoint::new(4000.0, 0.0)).unwrap();
        let report = ch.transmit(&frame(1, BROADCAST, 0), 1, 100).unwrap();
        assert_eq!(report.out_of_range.len(), 1);
        assert_eq!(report.out_of_range[0].0, 3);
        let arrivals = &ch.in_flight()[0].arrivals;
        assert_eq!(arrivals.len(), 1);
        assert_eq!(arrivals[0].start_ms, 1100);
        assert!(ch.poll_deliveries(1100).is_empty());
        let got = ch.poll_deliveries(2000);
        assert_eq!(got.len(), 1);
        assert!(got[0].delivered());
        assert!(ch.poll_deliveries(5000).is_empty(), "delivered exactly once");
    }

    #[test]
    fn unregistered_sender() {
        let mut ch = Channel::new(lossless(), 1);
        assert_eq!(ch.transmit(&frame(9, 1, 0), 9, 0), Err(ChannelError::UnknownEndpoint(9)));
    }

    #[test]
    fn overlapping_arrivals_collide() {
        let mut ch = Channel::new(lossless(), 1);
        ch.register(1, EnuPoint::new(-300.0, 0.0)).unwrap();
        ch.register(2, EnuPoint::new(300.0, 0.0)).unwrap();
        ch.register(3, EnuPoint::ORIGIN).unwrap();
        ch.transmit(&frame(1, 3, 20), 1, 0).unwrap();
        ch.transmit(&frame(2, 3, 20), 2, 5).unwrap();
        let got = ch.poll_deliveries(10_000);
        let at3: Vec<_> = got.iter().filter(|r| r.endpoint == 3).collect();
        assert_eq!(at3.len(), 2);
        assert!(at3.iter().all(|r| r.dropped == Some(DropCause::Collision)));
    }

    #[test]
    fn half_duplex_receiver_misses_frames() {
        let mut ch = Channel::new(lossless(), 1);
        ch.register(1, EnuPoint::ORIGIN).unwrap();
        ch.register(2, EnuPoint::new(15.0, 0.0)).unwrap();
        // Receiver 2 sends a long frame; a short frame from 1 lands inside it.
        ch.transmit(&frame(2, 9, 64), 2, 0).unwrap();
        ch.transmit(&frame(1, 2, 0), 1, 5).unwrap();
        let got = ch.poll_deliveries(1000);
        let at2: Vec<_> = got.iter().filter(|r| r.endpoint == 2).collect();
        assert_eq!(at2.len(), 1);
        assert_eq!(at2[0].dropped, Some(DropCause::HalfDuplex));
    }

    #[test]
    fn busy_sender_queues_fifo() {
        let mut ch = Channel::new(lossless(), 1);
        ch.register(1, EnuPoint::ORIGIN).unwrap();
        ch.register(2, EnuPoint::new(10.0, 0.0)).unwrap();
        let a = ch.transmit(&frame(1, 2, 64), 1, 0).unwrap();
        let b = ch.transmit(&frame(1, 2, 64), 1, 0).unwrap();
        assert_eq!(a.tx_end_ms, 43);
        assert_eq!(b.tx_start_ms, 43);
        let got = ch.poll_deliveries(1000);
        assert_eq!(got.iter().filter(|r| r.delivered()).count(), 2);
    }

    #[test]
    fn unaddressed_receiver_gets_nothing() {
        let mut ch = Channel::new(lossless(), 1);
        ch.register(1, EnuPoint::ORIGIN).unwrap();
        ch.register(2, EnuPoint::new(10.0, 0.0)).unwrap();
        ch.register(3, EnuPoint::new(20.0, 0.0)).unwrap();
        ch.transmit(&frame(1, 2, 0), 1, 0).unwrap();
        let got = ch.poll_deliveries(1000);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].endpoint, 2);
        assert!(ch.is_idle());
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let run = || {
            let mut ch = Channel::new(ChannelParams::default(), 42);
            ch.register(1, EnuPoint::ORIGIN).unwrap();
            ch.register(2, EnuPoint::new(3000.0, 0.0)).unwrap();
            let mut outcomes = Vec::new();
            for i in 0..200u64 {
                ch.transmit(&frame(1, 2, 8), 1, i * 100).unwrap();
                outcomes.extend(ch.poll_deliveries(i * 100 + 99).into_iter().map(|r| r.delivered()));
            }
            outcomes
        };
        assert_eq!(run(), run());
    }

    proptest::proptest! {
        #[test]
        fn probability_monotone(a in 0.0f64..10_000.0, b in 0.0f64..10_000.0) {
            let p = ChannelParams::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(delivery_probability(lo, &p) >= delivery_probability(hi, &p));
            if hi >= p.max_range_m {
                proptest::prop_assert_eq!(delivery_probability(hi, &p), 0.0);
            }
        }
    }
}
