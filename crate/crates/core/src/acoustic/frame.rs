//! Acoustic datagram layout:
//!
//! ```text
//! [0] 0xA5  [1] 0x01  [2] src  [3] dst  [4] msg_type  [5..7] seq (BE)
//! [7] payload_len  [8..8+len] payload  [8+len..10+len] crc16 (BE)
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::crc::crc16;

pub const MAGIC: u8 = 0xA5;
pub const VERSION: u8 = 0x01;
pub const MAX_PAYLOAD: usize = 64;
pub const HEADER_LEN: usize = 8;
pub const MIN_FRAME_LEN: usize = HEADER_LEN + 2;
pub const MAX_FRAME_LEN: usize = MIN_FRAME_LEN + MAX_PAYLOAD;
pub const BROADCAST: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameError {
    #[error("payload exceeds {MAX_PAYLOAD} bytes")]
    Oversize,
    #[error("bad magic byte")]
    BadMagic,
    #[error("unsupported frame version")]
    BadVersion,
    #[error("frame shorter than {MIN_FRAME_LEN} bytes")]
    Truncated,
    #[error("declared payload length disagrees with frame size")]
    LengthMismatch,
    #[error("checksum mismatch")]
    BadCrc,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AcousticFrame {
    pub src: u8,
    pub dst: u8,
    pub msg_type: u8,
    pub seq: u16,
    pub payload: Vec<u8>,
}

impl AcousticFrame {
    pub fn encoded_len(&self) -> usize {
        MIN_FRAME_LEN + self.payload.len()
    }

    pub fn is_for(&self, address: u8) -> bool {
        self.dst == address || self.dst == BROADCAST
    }
}

pub fn encode_frame(frame: &AcousticFrame) -> Result<Vec<u8>, FrameError> {
    if frame.payload.len() > MAX_PAYLOAD {
        return Err(FrameError::Oversize);
    }
    let mut out = Vec::with_capacity(frame.encoded_len());
    out.extend_from_slice(&[MAGIC, VERSION, frame.src, frame.dst, frame.msg_type]);
    out.extend_from_slice(&frame.seq.to_be_bytes());
    out.push(frame.payload.len() as u8);
    out.extend_from_slice(&frame.payload);
    let crc = crc16(&out);
    out.extend_from_slice(&crc.to_be_bytes());
    Ok(out)
}

pub fn decode_frame(bytes: &[u8]) -> Result<AcousticFrame, FrameError> {
    if bytes.len() < MIN_FRAME_LEN {
        return Err(FrameError::Truncated);
    }
    if bytes[0] != MAGIC {
        return Err(FrameError::BadMagic);
    }
    if bytes[1] != VERSION {
        return Err(FrameError::BadVersion);
    }
    let len = bytes[7] as usize;
    if len > MAX_PAYLOAD || bytes.len() != MIN_FRAME_LEN + len {
        return Err(FrameError::LengthMismatch);
    }
    let body = &bytes[..HEADER_LEN + len];
    let crc = u16::from_be_bytes([bytes[HEADER_LEN + len], bytes[HEADER_LEN + len + 1]]);
    if crc16(body) != crc {
        return Err(FrameError::BadCrc);
    }
    Ok(AcousticFrame {
        src: bytes[2],
        dst: bytes[3],
        msg_type: bytes[4],
        seq: u16::from_be_bytes([bytes[5], bytes[6]]),
        payload: bytes[HEADER_LEN..HEADER_LEN + len].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> AcousticFrame {
        AcousticFrame { src: 1, dst: 2, msg_type: 3, seq: 7, payload: vec![] }
    }

    #[test]
    fn empty_payload_layout() {
        let bytes = encode_frame(&sample()).unwrap();
        assert_eq!(&bytes[..8], &[0xA5, 0x01, 0x01, 0x02, 0x03, 0x00, 0x07, 0x00]);
        let crc = crc16(&bytes[..8]);
        assert_eq!(&bytes[8..], &crc.to_be_bytes());
        assert_eq!(bytes.len(), 10);
    }

    #[test]
    fn oversize_rejected() {
        let mut f = sample();
        f.payload = vec![0; 65];
        assert_eq!(encode_frame(&f), Err(FrameError::Oversize));
        f.payload.pop();
        assert_eq!(encode_frame(&f).unwrap().len(), MAX_FRAME_LEN);
    }

    #[test]
    fn decode_errors() {
        let good = encode_frame(&AcousticFrame { payload: vec![9, 8, 7], ..sample() }).unwrap();
        assert_eq!(decode_frame(&good[..5]), Err(FrameError::Truncated));

        let mut bad = good.clone();
        *bad.last_mut().unwrap() ^= 0x01;
        assert_eq!(decode_frame(&bad), Err(FrameError::BadCrc));

        let mut bad = good.clone();
        bad[0] = 0x5A;
        assert_eq!(decode_frame(&bad), Err(FrameError::BadMagic));

        let mut bad = good.clone();
        bad[1] = 0x02;
        assert_eq!(decode_frame(&bad), Err(FrameError::BadVersion));

        let mut bad = good.clone();
        bad.push(0);
        assert_eq!(decode_frame(&bad), Err(FrameError::LengthMismatch));
    }

    fn arb_frame() -> impl Strategy<Value = AcousticFrame> {
        (any::<u8>(), any::<u8>(), any::<u8>(), any::<u16>(), prop::collection::vec(any::<u8>(), 0..=MAX_PAYLOAD))
            .prop_map(|(src, dst, msg_type, seq, payload)| AcousticFrame { src, dst, msg_type, seq, payload })
    }

    proptest! {
        #[test]
        fn round_trip(frame in arb_frame()) {
            let bytes = encode_frame(&frame).unwrap();
            prop_assert_eq!(bytes.len(), frame.encoded_len());
            prop_assert_eq!(decode_frame(&bytes).unwrap(), frame);
        }

        #[test]
        fn corrupted_crc_never_decodes(frame in arb_frame(), which in 0usize..2, mask in 1u8..=255) {
            let mut bytes = encode_frame(&frame).unwrap();
            let idx = bytes.len() - 1 - which;
            bytes[idx] ^= mask;
            prop_assert_eq!(decode_frame(&bytes), Err(FrameError::BadCrc));
        }
    }
}
