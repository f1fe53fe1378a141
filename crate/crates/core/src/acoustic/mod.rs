//! Acoustic link: wire codecs and the simulated medium.

mod channel;
mod crc;
mod frame;
mod payload;

pub use channel::{
    delivery_probability, Arrival, Channel, ChannelError, ChannelParams, DropCause, InFlightTransmission,
    ModemEndpoint, Reception, TransmitReport,
};
pub use crc::crc16;
pub use frame::{
    decode_frame, encode_frame, AcousticFrame, FrameError, BROADCAST, MAGIC, MAX_FRAME_LEN, MAX_PAYLOAD, MIN_FRAME_LEN,
    VERSION,
};
pub use payload::{
    decode_payload, encode_payload, to_e7, CommandCode, EventCode, PayloadError, StatusReport, TelemetryMessage,
    KNOT_MPS, MSG_ACK, MSG_COMMAND, MSG_EVENT, MSG_STATUS,
};

/// Encodes a telemetry message into complete frame bytes.
pub fn build_frame(src: u8, dst: u8, seq: u16, msg: &TelemetryMessage) -> Vec<u8> {
    let (msg_type, payload) = encode_payload(msg);
    encode_frame(&AcousticFrame { src, dst, msg_type, seq, payload })
        .expect("telemetry payloads are well under the MTU")
}
