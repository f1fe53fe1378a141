//! Envelope text and length-prefixed TCP framing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on one framed message.
pub const MAX_MESSAGE_LEN: usize = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EnvelopeError {
    #[error("not an envelope object")]
    MalformedObject,
    #[error("frame_hex has odd length")]
    OddHexLength,
    #[error("frame_hex contains a non-hex character")]
    NonHexChar,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    rx_time_ms: u64,
    frame_hex: String,
}

/// Wraps frame bytes as `{"rx_time_ms":..,"frame_hex":".."}`.
///
/// Panics on empty `frame`; an envelope always carries a frame.
pub fn make_envelope(frame: &[u8], rx_time_ms: u64) -> String {
    assert!(!frame.is_empty(), "envelope requires non-empty frame bytes");
    let env = Envelope { rx_time_ms, frame_hex: hex::encode(frame) };
    serde_json::to_string(&env).expect("envelope serializes")
}

pub fn parse_envelope(text: &str) -> Result<(Vec<u8>, u64), EnvelopeError> {
    let env: Envelope =
        serde_json::from_str(text.trim_end_matches(['\r', '\n'])).map_err(|_| EnvelopeError::MalformedObject)?;
    if env.frame_hex.len() % 2 != 0 {
        return Err(EnvelopeError::OddHexLength);
    }
    if !env.frame_hex.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return Err(EnvelopeError::NonHexChar);
    }
    let bytes = hex::decode(&env.frame_hex).map_err(|_| EnvelopeError::NonHexChar)?;
    Ok((bytes, env.rx_time_ms))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("message length {0} outside [1, {MAX_MESSAGE_LEN}]")]
    LengthOutOfRange(u32),
}

/// Prefixes `text` with its 4-byte big-endian length.
pub fn stream_encode(text: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + text.len());
    out.extend_from_slice(&(text.len() as u32).to_be_bytes());
    out.extend_from_slice(text.as_bytes());
    out
}

/// Splits every complete message off the front of `buf`, returning them
/// together with the unconsumed remainder. Invalid UTF-8 is replaced so the
/// envelope parser rejects it downstream.
pub fn stream_decode(buf: &[u8]) -> Result<(Vec<String>, Vec<u8>), StreamError> {
    let mut messages = Vec::new();
    let mut rest = buf;
    while rest.len() >= 4 {
        let n = u32::from_be_bytes([rest[0], rest[1], rest[2], rest[3]]);
        if n == 0 || n as usize > MAX_MESSAGE_LEN {
            return Err(StreamError::LengthOutOfRange(n));
        }
        let n = n as usize;
        if rest.len() < 4 + n {
            break;
        }
        messages.push(String::from_utf8_lossy(&rest[4..4 + n]).into_owned());
        rest = &rest[4 + n..];
    }
    Ok((messages, rest.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn envelope_layout() {
        let text = make_envelope(&[0xa5, 0x01, 0xff], 1000);
        assert_eq!(text, r#"{"rx_time_ms":1000,"frame_hex":"a501ff"}"#);
        assert_eq!(parse_envelope(&text), Ok((vec![0xa5, 0x01, 0xff], 1000)));
    }

    #[test]
    #[should_panic]
    fn empty_frame_is_a_contract_violation() {
        make_envelope(&[], 0);
    }

    #[test]
    fn envelope_errors() {
        assert_eq!(parse_envelope(r#"{"rx_time_ms":0,"frame_hex":"a5f"}"#), Err(EnvelopeError::OddHexLength));
        assert_eq!(parse_envelope(r#"{"rx_time_ms":0,"frame_hex":"zz"}"#), Err(EnvelopeError::NonHexChar));
        assert_eq!(parse_envelope(r#"{"rx_time_ms":0,"frame_hex":"A5"}"#), Err(EnvelopeError::NonHexChar));
        assert_eq!(parse_envelope(r#"{"rx_time_ms":0}"#), Err(EnvelopeError::MalformedObject));
        assert_eq!(parse_envelope(r#"{"rx_time_ms":0,"frame_hex":"a5","x":1}"#), Err(EnvelopeError::MalformedObject));
        assert_eq!(parse_envelope("hello"), Err(EnvelopeError::MalformedObject));
    }

    #[test]
    fn stream_examples() {
        let mut buf = stream_encode("one");
        buf.extend(stream_encode("two"));
        let (msgs, rest) = stream_decode(&buf).unwrap();
        assert_eq!(msgs, vec!["one", "two"]);
        assert!(rest.is_empty());

        let (msgs, rest) = stream_decode(&[0, 0, 0]).unwrap();
        assert!(msgs.is_empty());
        assert_eq!(rest, vec![0, 0, 0]);

        assert_eq!(stream_decode(&[0, 0, 0, 0]), Err(StreamError::LengthOutOfRange(0)));
        assert_eq!(stream_decode(&[0, 1, 0, 1]), Err(StreamError::LengthOutOfRange(65_537)));
    }

    proptest! {
        #[test]
        fn envelope_round_trip(frame in prop::collection::vec(any::<u8>(), 1..80), t in any::<u64>()) {
            let text = make_envelope(&frame, t);
            prop_assert!(!text.contains('\n'));
            prop_assert_eq!(parse_envelope(&text).unwrap(), (frame, t));
        }

        #[test]
        fn stream_split_anywhere(msgs in prop::collection::vec("[a-z]{1,20}", 0..6), cut in any::<prop::sample::Index>()) {
            let wire: Vec<u8> = msgs.iter().flat_map(|m| stream_encode(m)).collect();
            let cut = if wire.is_empty() { 0 } else { cut.index(wire.len() + 1) };
            let (mut got, rest) = stream_decode(&wire[..cut]).unwrap();
            let mut tail = rest;
            tail.extend_from_slice(&wire[cut..]);
            let (more, rest) = stream_decode(&tail).unwrap();
            got.extend(more);
            prop_assert!(rest.is_empty());
            prop_assert_eq!(got, msgs);
        }
    }
}
