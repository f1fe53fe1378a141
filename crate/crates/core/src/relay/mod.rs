//! Sea-side relay: forwards acoustically received frames to every connected
//! TCP client and turns client envelopes back into acoustic transmissions.

mod envelope;
mod server;

pub use envelope::{
    make_envelope, parse_envelope, stream_decode, stream_encode, EnvelopeError, StreamError, MAX_MESSAGE_LEN,
};
pub use server::{RelayClient, RelayHandle, RelayServer, CLIENT_QUEUE_CAPACITY};

use serde::Serialize;

use crate::acoustic::decode_frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ClientId(pub u64);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RelayCounters {
    pub acoustic_rx: u64,
    pub acoustic_tx: u64,
    pub tcp_rx: u64,
    pub tcp_tx: u64,
    pub dropped_invalid: u64,
}

/// Frame bytes a client asked the relay modem to send.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmitRequest {
    pub client: ClientId,
    pub frame: Vec<u8>,
    /// Relay clock when the request was accepted.
    pub t_ms: u64,
}

/// Transport-free relay logic. The server drives it from a single task so
/// fan-out order always matches acoustic reception order.
#[derive(Debug, Default)]
pub struct RelayState {
    clients: Vec<ClientId>,
    counters: RelayCounters,
}

impl RelayState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn connect(&mut self, id: ClientId) {
        if !self.clients.contains(&id) {
            self.clients.push(id);
        }
    }

    pub fn disconnect(&mut self, id: ClientId) -> bool {
        let before = self.clients.len();
        self.clients.retain(|c| *c != id);
        before != self.clients.len()
    }

    /// Clients in accept order.
    pub fn clients(&self) -> &[ClientId] {
        &self.clients
    }

    pub fn counters(&self) -> RelayCounters {
        self.counters
    }

    /// One envelope per connected client, in accept order.
    pub fn on_acoustic_rx(&mut self, frame: &[u8], now_ms: u64) -> Vec<(ClientId, String)> {
        self.counters.acoustic_rx += 1;
        let text = make_envelope(frame, now_ms);
        self.counters.tcp_tx += self.clients.len() as u64;
        self.clients.iter().map(|c| (*c, text.clone())).collect()
    }

    /// Validates a client envelope. Anything that is not a well-formed
    /// envelope around a valid frame is counted and dropped.
    pub fn on_tcp_rx(&mut self, client: ClientId, text: &str, now_ms: u64) -> Option<TransmitRequest> {
        self.counters.tcp_rx += 1;
        let valid = parse_envelope(text).ok().filter(|(bytes, _)| decode_frame(bytes).is_ok());
        match valid {
            Some((frame, _)) => {
                self.counters.acoustic_tx += 1;
                Some(TransmitRequest { client, frame, t_ms: now_ms })
            }
            None => {
                self.counters.dropped_invalid += 1;
                None
            }
        }
    }
}
