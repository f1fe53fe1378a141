//! Fixed-width big-endian telemetry payloads carried inside acoustic frames.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MSG_STATUS: u8 = 0x01;
pub const MSG_EVENT: u8 = 0x02;
pub const MSG_COMMAND: u8 = 0x03;
pub const MSG_ACK: u8 = 0x04;

pub const STATUS_LEN: usize = 18;
pub const EVENT_LEN: usize = 4;
pub const COMMAND_LEN: usize = 2;
pub const ACK_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PayloadError {
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("payload length {got} does not match {expected} for message type")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusReport {
    pub lat_e7: i32,
    pub lon_e7: i32,
    pub depth_cm: u16,
    pub speed_cms: u16,
    pub heading_cdeg: u16,
    pub battery_pct: u8,
    pub fault_bits: u8,
    /// 0 when no objective is active.
    pub objective_id: u8,
    pub objective_pct: u8,
}

impl StatusReport {
    pub fn lat(&self) -> f64 {
        f64::from(self.lat_e7) / 1e7
    }

    pub fn lon(&self) -> f64 {
        f64::from(self.lon_e7) / 1e7
    }

    pub fn depth_m(&self) -> f64 {
        f64::from(self.depth_cm) / 100.0
    }

    pub fn speed_kn(&self) -> f64 {
        f64::from(self.speed_cms) / 100.0 / KNOT_MPS
    }

    pub fn heading_deg(&self) -> f64 {
        f64::from(self.heading_cdeg) / 100.0
    }
}

/// Meters per second in one knot.
pub const KNOT_MPS: f64 = 0.5144;

pub fn to_e7(deg: f64) -> i32 {
    (deg * 1e7).round() as i32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TelemetryMessage {
    Status(StatusReport),
    Event { event_code: u8, objective_id: u8, detail: u16 },
    Command { cmd_code: u8, arg: u8 },
    Ack { cmd_seq: u16, status: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventCode {
    ObjectiveStarted = 1,
    ObjectiveCompleted = 2,
    FaultOnset = 3,
    Aborting = 4,
    MissionComplete = 5,
    FaultCleared = 6,
    Recovered = 7,
}

impl TryFrom<u8> for EventCode {
    type Error = u8;
    fn try_from(v: u8) -> Result<Self, u8> {
        Ok(match v {
            1 => EventCode::ObjectiveStarted,
            2 => EventCode::ObjectiveCompleted,
            3 => EventCode::FaultOnset,
            4 => EventCode::Aborting,
            5 => EventCode::MissionComplete,
            6 => EventCode::FaultCleared,
            7 => EventCode::Recovered,
            other => return Err(other),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandCode {
    StartMission = 1,
    AbortToRecovery = 2,
    Ping = 3,
}

impl CommandCode {
    pub fn describe(&self) -> &'static str {
        match self {
            CommandCode::StartMission => "start mission",
            CommandCode::AbortToRecovery => "abort to recovery",
            CommandCode::Ping => "status request",
        }
    }
}

impl TryFrom<u8> for CommandCode {
    type Error = u8;
    fn try_from(v: u8) -> Result<Self, u8> {
        Ok(match v {
            1 => CommandCode::StartMission,
            2 => CommandCode::AbortToRecovery,
            3 => CommandCode::Ping,
            other => return Err(other),
        })
    }
}

impl TelemetryMessage {
    pub fn command(code: CommandCode) -> Self {
        TelemetryMessage::Command { cmd_code: code as u8, arg: 0 }
    }

    pub fn event(code: EventCode, objective_id: u8, detail: u16) -> Self {
        TelemetryMessage::Event { event_code: code as u8, objective_id, detail }
    }

    pub fn msg_type(&self) -> u8 {
        match self {
            TelemetryMessage::Status(_) => MSG_STATUS,
            TelemetryMessage::Event { .. } => MSG_EVENT,
            TelemetryMessage::Command { .. } => MSG_COMMAND,
            TelemetryMessage::Ack { .. } => MSG_ACK,
        }
    }
}

pub fn encode_payload(msg: &TelemetryMessage) -> (u8, Vec<u8>) {
    let mut out = Vec::with_capacity(STATUS_LEN);
    match *msg {
        TelemetryMessage::Status(s) => {
            out.extend_from_slice(&s.lat_e7.to_be_bytes());
            out.extend_from_slice(&s.lon_e7.to_be_bytes());
            out.extend_from_slice(&s.depth_cm.to_be_bytes());
            out.extend_from_slice(&s.speed_cms.to_be_bytes());
            out.extend_from_slice(&s.heading_cdeg.to_be_bytes());
            out.extend_from_slice(&[s.battery_pct, s.fault_bits, s.objective_id, s.objective_pct]);
        }
        TelemetryMessage::Event { event_code, objective_id, detail } => {
            out.extend_from_slice(&[event_code, objective_id]);
            out.extend_from_slice(&detail.to_be_bytes());
        }
        TelemetryMessage::Command { cmd_code, arg } => out.extend_from_slice(&[cmd_code, arg]),
        TelemetryMessage::Ack { cmd_seq, status } => {
            out.extend_from_slice(&cmd_seq.to_be_bytes());
            out.push(status);
        }
    }
    (msg.msg_type(), out)
}

fn be16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

fn be32(b: &[u8]) -> i32 {
    i32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

pub fn decode_payload(msg_type: u8, bytes: &[u8]) -> Result<TelemetryMessage, PayloadError> {
    let expected = match msg_type {
        MSG_STATUS => STATUS_LEN,
        MSG_EVENT => EVENT_LEN,
        MSG_COMMAND => COMMAND_LEN,
        MSG_ACK => ACK_LEN,
        other => return Err(PayloadError::UnknownType(other)),
    };
    if bytes.len() != expected {
        return Err(PayloadError::LengthMismatch { expected, got: bytes.len() });
    }
    Ok(match msg_type {
        MSG_STATUS => TelemetryMessage::Status(StatusReport {
            lat_e7: be32(&bytes[0..4]),
            lon_e7: be32(&bytes[4..8]),
            depth_cm: be16(&bytes[8..10]),
            speed_cms: be16(&bytes[10..12]),
            heading_cdeg: be16(&bytes[12..14]),
            battery_pct: bytes[14],
            fault_bits: bytes[15],
            objective_id: bytes[16],
            objective_pct: bytes[17],
        }),
        MSG_EVENT => {
            TelemetryMessage::Event { event_code: bytes[0], objective_id: bytes[1], detail: be16(&bytes[2..4]) }
        }
        MSG_COMMAND => TelemetryMessage::Command { cmd_code: bytes[0], arg: bytes[1] },
        _ => TelemetryMessage::Ack { cmd_seq: be16(&bytes[0..2]), status: bytes[2] },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn status_fixed_point_latitude() {
        let s = StatusReport {
            lat_e7: to_e7(56.5),
            lon_e7: to_e7(-5.25),
            depth_cm: 200,
            speed_cms: 129,
            heading_cdeg: 9000,
            battery_pct: 87,
            fault_bits: 0,
            objective_id: 1,
            objective_pct: 50,
        };
        assert_eq!(s.lat_e7, 565_000_000);
        let (ty, bytes) = encode_payload(&TelemetryMessage::Status(s));
        assert_eq!(ty, MSG_STATUS);
        assert_eq!(bytes.len(), STATUS_LEN);
        assert_eq!(&bytes[..4], &565_000_000i32.to_be_bytes());
    }

    #[test]
    fn command_encoding() {
        let (ty, bytes) = encode_payload(&TelemetryMessage::command(CommandCode::StartMission));
        assert_eq!((ty, bytes), (MSG_COMMAND, vec![0x01, 0x00]));
        let (_, bytes) = encode_payload(&TelemetryMessage::command(CommandCode::Ping));
        assert_eq!(bytes, vec![0x03, 0x00]);
    }

    #[test]
    fn length_and_type_errors() {
        assert_eq!(decode_payload(MSG_EVENT, &[1, 2, 3]), Err(PayloadError::LengthMismatch { expected: 4, got: 3 }));
        assert_eq!(decode_payload(0x09, &[]), Err(PayloadError::UnknownType(0x09)));
    }

    pub(crate) fn arb_message() -> impl Strategy<Value = TelemetryMessage> {
        prop_oneof![
            (any::<i32>(), any::<i32>(), any::<u16>(), any::<u16>(), any::<u16>(), any::<[u8; 4]>()).prop_map(
                |(lat_e7, lon_e7, depth_cm, speed_cms, heading_cdeg, b)| {
                    TelemetryMessage::Status(StatusReport {
                        lat_e7,
                        lon_e7,
                        depth_cm,
                        speed_cms,
                        heading_cdeg,
                        battery_pct: b[0],
                        fault_bits: b[1],
                        objective_id: b[2],
                        objective_pct: b[3],
                    })
                }
            ),
            (any::<u8>(), any::<u8>(), any::<u16>()).prop_map(|(event_code, objective_id, detail)| {
                TelemetryMessage::Event { event_code, objective_id, detail }
            }),
            (any::<u8>(), any::<u8>()).prop_map(|(cmd_code, arg)| TelemetryMessage::Command { cmd_code, arg }),
            (any::<u16>(), any::<u8>()).prop_map(|(cmd_seq, status)| TelemetryMessage::Ack { cmd_seq, status }),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(msg in arb_message()) {
            let (ty, bytes) = encode_payload(&msg);
            prop_assert_eq!(decode_payload(ty, &bytes).unwrap(), msg);
        }
    }
}
