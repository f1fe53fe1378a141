//! Tokio transport for [`RelayState`]: one actor task owns the state, each
//! client gets a reader task and a writer task behind a bounded queue.

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::{TcpListener, TcpStream, ToSocketAddrs};
use tokio::sync::{mpsc, oneshot};
use tokio::task::AbortHandle;

use super::{stream_decode, stream_encode, ClientId, RelayCounters, RelayState, TransmitRequest};

/// Envelopes queued per client before it is considered stalled and dropped.
pub const CLIENT_QUEUE_CAPACITY: usize = 1024;

enum Msg {
    Connected { id: ClientId, tx: mpsc::Sender<String>, tasks: [AbortHandle; 2] },
    Disconnected(ClientId),
    TcpRx { id: ClientId, text: String },
    AcousticRx { frame: Vec<u8>, now_ms: u64, reply: oneshot::Sender<usize> },
    SetClock(u64),
    Counters(oneshot::Sender<RelayCounters>),
    ClientCount(oneshot::Sender<usize>),
    Shutdown(oneshot::Sender<()>),
}

struct Client {
    tx: mpsc::Sender<String>,
    tasks: [AbortHandle; 2],
}

impl Client {
    fn abort(&self) {
        for t in &self.tasks {
            t.abort();
        }
    }
}

pub struct RelayServer;

impl RelayServer {
    /// Binds `addr` and starts the relay. Valid client envelopes come out of
    /// the returned receiver as transmit requests.
    pub async fn spawn(
        addr: impl ToSocketAddrs,
    ) -> io::Result<(RelayHandle, mpsc::UnboundedReceiver<TransmitRequest>)> {
        let listener = TcpListener::bind(addr).await?;
        let local_addr = listener.local_addr()?;
        let (tx, rx) = mpsc::unbounded_channel();
        let (req_tx, req_rx) = mpsc::unbounded_channel();
        let accept = tokio::spawn(accept_loop(listener, tx.clone())).abort_handle();
        tokio::spawn(actor(rx, req_tx, accept));
        Ok((RelayHandle { tx, local_addr }, req_rx))
    }
}

async fn accept_loop(listener: TcpListener, events: mpsc::UnboundedSender<Msg>) {
    let mut next_id = 1u64;
    loop {
        let stream = match listener.accept().await {
            Ok((s, _)) => s,
            Err(e) => {
                tracing::warn!("relay accept failed: {e}");
                continue;
            }
        };
        let _ = stream.set_nodelay(true);
        let id = ClientId(next_id);
        next_id += 1;
        let (read, write) = stream.into_split();
        let (tx, rx) = mpsc::channel(CLIENT_QUEUE_CAPACITY);
        let writer = tokio::spawn(write_loop(id, write, rx, events.clone())).abort_handle();
        // Connected goes out before the reader exists so the actor never sees
        // data from a client it does not know yet.
        let (start_tx, start_rx) = oneshot::channel::<()>();
        let reader = tokio::spawn(read_loop(id, read, events.clone(), start_rx)).abort_handle();
        if events.send(Msg::Connected { id, tx, tasks: [reader, writer] }).is_err() {
            return;
        }
        let _ = start_tx.send(());
    }
}

async fn read_loop(
    id: ClientId,
    mut read: OwnedReadHalf,
    events: mpsc::UnboundedSender<Msg>,
    start: oneshot::Receiver<()>,
) {
    if start.await.is_err() {
        return;
    }
    let mut buf = Vec::new();
    let mut chunk = [0u8; 8192];
    loop {
        match read.read(&mut chunk).await {
            Ok(0) | Err(_) => break,
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
        }
        match stream_decode(&buf) {
            Ok((messages, rest)) => {
                buf = rest;
                for text in messages {
                    if events.send(Msg::TcpRx { id, text }).is_err() {
                        return;
                    }
                }
            }
            Err(e) => {
                tracing::warn!("relay client {} sent bad framing: {e}", id.0);
                break;
            }
        }
    }
    let _ = events.send(Msg::Disconnected(id));
}

async fn write_loop(
    id: ClientId,
    mut write: OwnedWriteHalf,
    mut rx: mpsc::Receiver<String>,
    events: mpsc::UnboundedSender<Msg>,
) {
    while let Some(text) = rx.recv().await {
        if write.write_all(&stream_encode(&text)).await.is_err() {
            let _ = events.send(Msg::Disconnected(id));
            return;
        }
    }
}

async fn actor(
    mut rx: mpsc::UnboundedReceiver<Msg>,
    requests: mpsc::UnboundedSender<TransmitRequest>,
    accept: AbortHandle,
) {
    let mut state = RelayState::new();
    let mut clients: HashMap<ClientId, Client> = HashMap::new();
    let mut clock_ms = 0u64;
    while let Some(msg) = rx.recv().await {
        match msg {
            Msg::Connected { id, tx, tasks } => {
                state.connect(id);
                clients.insert(id, Client { tx, tasks });
            }
            Msg::Disconnected(id) => {
                state.disconnect(id);
                if let Some(c) = clients.remove(&id) {
                    c.abort();
                }
            }
            Msg::TcpRx { id, text } => {
                if !clients.contains_key(&id) {
                    continue;
                }
                if let Some(req) = state.on_tcp_rx(id, &text, clock_ms) {
                    let _ = requests.send(req);
                }
            }
            Msg::AcousticRx { frame, now_ms, reply } => {
                clock_ms = clock_ms.max(now_ms);
                let mut delivered = 0;
                for (id, text) in state.on_acoustic_rx(&frame, now_ms) {
                    let ok = clients.get(&id).is_some_and(|c| c.tx.try_send(text).is_ok());
                    if ok {
                        delivered += 1;
                    } else {
                        tracing::warn!("relay client {} stalled or gone, disconnecting", id.0);
                        state.disconnect(id);
                        if let Some(c) = clients.remove(&id) {
                            c.abort();
                        }
                    }
                }
                let _ = reply.send(delivered);
            }
            Msg::SetClock(t) => clock_ms = clock_ms.max(t),
            Msg::Counters(reply) => {
                let _ = reply.send(state.counters());
            }
            Msg::ClientCount(reply) => {
                let _ = reply.send(state.clients().len());
            }
            Msg::Shutdown(reply) => {
                accept.abort();
                for c in clients.values() {
                    c.abort();
                }
                let _ = reply.send(());
                return;
            }
        }
    }
    accept.abort();
}

/// Cheap cloneable control handle for a running relay.
#[derive(Clone)]
pub struct RelayHandle {
    tx: mpsc::UnboundedSender<Msg>,
    local_addr: SocketAddr,
}

impl RelayHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Hands a frame received by the relay modem to the relay. Returns how
    /// many clients it was queued for.
    pub async fn acoustic_rx(&self, frame: Vec<u8>, now_ms: u64) -> usize {
        let (reply, rx) = oneshot::channel();
        if self.tx.send(Msg::AcousticRx { frame, now_ms, reply }).is_err() {
            return 0;
        }
        rx.await.unwrap_or(0)
    }

    pub fn set_clock(&self, now_ms: u64) {
        let _ = self.tx.send(Msg::SetClock(now_ms));
    }

    pub async fn counters(&self) -> RelayCounters {
        let (reply, rx) = oneshot::channel();
        let _ = self.tx.send(Msg::Counters(reply));
        rx.await.unwrap_or_default()
    }

    pub async fn client_count(&self) -> usize {
        let (reply, rx) = oneshot::channel();
        let _ = self.tx.send(Msg::ClientCount(reply));
        rx.await.unwrap_or(0)
    }

    pub async fn shutdown(&self) {
        let (reply, rx) = oneshot::channel();
        if self.tx.send(Msg::Shutdown(reply)).is_ok() {
            let _ = rx.await;
        }
    }
}

/// Client side of the relay TCP link.
pub struct RelayClient {
    read: OwnedReadHalf,
    write: OwnedWriteHalf,
    buf: Vec<u8>,
    pending: std::collections::VecDeque<String>,
}

impl RelayClient {
    pub async fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let stream = TcpStream::connect(addr).await?;
        stream.set_nodelay(true)?;
        let (read, write) = stream.into_split();
        Ok(Self { read, write, buf: Vec::new(), pending: Default::default() })
    }

    pub async fn send(&mut self, text: &str) -> io::Result<()> {
        self.write.write_all(&stream_encode(text)).await
    }

    /// Next message from the relay, or `None` once the relay closed the link.
    pub async fn recv(&mut self) -> io::Result<Option<String>> {
        let mut chunk = [0u8; 8192];
        loop {
            if let Some(m) = self.pending.pop_front() {
                return Ok(Some(m));
            }
            let n = self.read.read(&mut chunk).await?;
            if n == 0 {
                return Ok(None);
            }
            self.buf.extend_from_slice(&chunk[..n]);
            let (messages, rest) =
                stream_decode(&self.buf).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            self.buf = rest;
            self.pending.extend(messages);
        }
    }
}
