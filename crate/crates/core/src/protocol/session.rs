//! Party state machines over TCP.
//!
//! Message flow for `R` rounds:
//!
//! 1. every input party connects to the function party and sends `HELLO`;
//! 2. once all registered parties are present the function party answers
//!    each with `HELLO`;
//! 3. the leader sends one `SEED_ENVELOPE` per other party, which the
//!    function party forwards unopened to the recipient;
//! 4. per round `t`, each party masks its new samples and sends them as
//!    `MASKED_CHUNK` frames followed by `CHUNK_END` carrying the labels;
//! 5. after all `CHUNK_END`s of round `t` the function party extends its
//!    Gram matrix and replies `GRAM_ACK`.
//!
//! The function party reads every connection on its own thread and funnels
//! the frames into a channel; one loop owns all state and all writes.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crypto_box::aead::rand_core::RngCore;
use crypto_box::aead::OsRng;

use super::crypto::{CryptoSuite, SecretKeys};
use super::envelope::{open_seed, seal_seed, SeedEnvelope};
use super::frame::{Frame, MsgType};
use super::registry::{elect_leader, PartyRegistry};
use super::wire::{chunk_ranges, decode_matrix, encode_matrix};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::gram::{self, GramMatrix, PayloadStore};
use crate::linalg::{MaskDims, Matrix};
use crate::masking::{self, MaskedMatrix};
use crate::svm::{cross_validate_grid, CvReport, GridSpec, TrainedModel};
use crate::PartyId;

pub const DEFAULT_CHUNK_ROWS: usize = 256;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

fn map_io(err: io::Error, waiting_for: &str) -> Error {
    match err.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => Error::Timeout(waiting_for.to_string()),
        _ => Error::Io(err),
    }
}

/// `MASKED_CHUNK` frames of at most `chunk_rows` rows each.
pub fn chunk_frames(masked: &MaskedMatrix, chunk_rows: usize) -> Result<Vec<Frame>> {
    let ranges = chunk_ranges(masked.sample_count(), chunk_rows)?;
    Ok(ranges
        .into_iter()
        .map(|(start, end)| {
            let rows = masked.payload.row_range(start, end);
            Frame::new(MsgType::MaskedChunk, masked.party_id.clone(), masked.iteration, encode_matrix(&rows))
        })
        .collect())
}

/// `rows u64 | has_labels u8 | labels i64...`, all little-endian.
pub fn encode_chunk_end(rows: usize, labels: Option<&[i64]>) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + 8 * rows);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.push(u8::from(labels.is_some()));
    for l in labels.unwrap_or_default() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn decode_chunk_end(payload: &[u8]) -> Result<(usize, Option<Vec<i64>>)> {
    if payload.len() < 9 {
        return Err(Error::Frame("CHUNK_END payload too short".into()));
    }
    let rows = u64::from_le_bytes(payload[..8].try_into().expect("u64")) as usize;
    let body = &payload[9..];
    match payload[8] {
        0 if body.is_empty() => Ok((rows, None)),
        1 if body.len() as u64 == 8 * rows as u64 => {
            Ok((rows, Some(body.chunks_exact(8).map(|c| i64::from_le_bytes(c.try_into().expect("i64"))).collect())))
        }
        _ => Err(Error::Frame("malformed CHUNK_END payload".into())),
    }
}

/// Sends `masked` as chunks followed by `CHUNK_END`; returns the chunk count.
pub fn chunk_and_send<W: io::Write>(masked: &MaskedMatrix, labels: Option<&[i64]>, chunk_rows: usize, conn: &mut W) -> Result<usize> {
    let frames = chunk_frames(masked, chunk_rows)?;
    for frame in &frames {
        frame.write_to(conn)?;
    }
    let end = encode_chunk_end(masked.sample_count(), labels);
    Frame::new(MsgType::ChunkEnd, masked.party_id.clone(), masked.iteration, end).write_to(conn)?;
    Ok(frames.len())
}

/// Stacks received chunks in arrival order.
pub fn reassemble(chunks: &[Matrix], width: usize) -> Result<Matrix> {
    if chunks.is_empty() {
        return Ok(Matrix::zeros(0, width));
    }
    let refs: Vec<&Matrix> = chunks.iter().collect();
    Matrix::vstack(&refs)
}

#[derive(Clone, Debug)]
pub struct InputPartyConfig {
    pub party_id: PartyId,
    pub registry: PartyRegistry,
    pub secret: SecretKeys,
    pub suite: Arc<dyn CryptoSuite>,
    /// Round 0 holds the initial samples, later rounds only the additions.
    pub rounds: Vec<DataMatrix>,
    /// Shared seed chosen by the leader; random when `None`. Ignored by
    /// non-leaders.
    pub seed: Option<u64>,
    /// Masked width chosen by the leader; `2f` when `None`.
    pub width: Option<usize>,
    pub private_seed: u64,
    pub chunk_rows: usize,
    pub timeout: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundStats {
    pub rows: usize,
    pub chunks: usize,
    /// Mask multiplication only; context construction is excluded.
    pub masking: Duration,
}

#[derive(Clone, Debug)]
pub struct InputOutcome {
    pub party_id: PartyId,
    pub leader: bool,
    pub envelopes_sent: usize,
    pub envelopes_received: usize,
    pub dims: MaskDims,
    pub rounds: Vec<RoundStats>,
}

struct Conn {
    stream: TcpStream,
    party: PartyId,
}

impl Conn {
    fn send(&mut self, frame: &Frame) -> Result<()> {
        frame.write_to(&mut self.stream)
    }

    fn recv(&mut self, waiting_for: &str) -> Result<Frame> {
        let frame = Frame::read_from(&mut self.stream).map_err(|e| match e {
            Error::Io(io) => map_io(io, waiting_for),
            other => other,
        })?;
        let frame = frame.ok_or_else(|| Error::Protocol(format!("connection closed while waiting for {waiting_for}")))?;
        if frame.msg_type == MsgType::Error {
            return Err(Error::Remote(String::from_utf8_lossy(&frame.payload).into_owned()));
        }
        Ok(frame)
    }

    fn expect(&mut self, msg_type: MsgType, waiting_for: &str) -> Result<Frame> {
        let frame = self.recv(waiting_for)?;
        if frame.msg_type != msg_type {
            return Err(Error::Protocol(format!("{} expected {msg_type:?}, got {:?}", self.party, frame.msg_type)));
        }
        Ok(frame)
    }
}

fn connect(addr: &str, timeout: Duration) -> Result<TcpStream> {
    let deadline = Instant::now() + timeout;
    loop {
        let attempt = addr
            .to_socket_addrs()
            .map_err(Error::Io)?
            .next()
            .ok_or_else(|| Error::Config(format!("cannot resolve {addr}")))
            .and_then(|sock| TcpStream::connect_timeout(&sock, timeout).map_err(Error::Io));
        match attempt {
            Ok(stream) => return Ok(stream),
            Err(_) if Instant::now() < deadline => thread::sleep(Duration::from_millis(20)),
            Err(_) => return Err(Error::Timeout(format!("connection to function party at {addr}"))),
        }
    }
}

pub fn run_input_party(config: &InputPartyConfig) -> Result<InputOutcome> {
    let me = config.party_id.clone();
    config.registry.validate()?;
    config.registry.entry(&me)?;
    let first = config.rounds.first().ok_or_else(|| Error::Config("an input party needs at least one round of data".into()))?;
    let leader = elect_leader(&config.registry)? == me;

    let stream = connect(&config.registry.function_party.socket_addr(), config.timeout)?;
    stream.set_read_timeout(Some(config.timeout))?;
    stream.set_nodelay(true)?;
    let mut conn = Conn { stream, party: me.clone() };

    conn.send(&Frame::new(MsgType::Hello, me.clone(), 0, Vec::new()))?;
    conn.expect(MsgType::Hello, "session start")?;

    let (seed, dims, sent, received) = if leader {
        let features = first.feature_count();
        let dims = match config.width {
            Some(width) => MaskDims::new(features, width)?,
            None => MaskDims::doubled(features)?,
        };
        let seed = config.seed.unwrap_or_else(|| OsRng.next_u64());
        let mut sent = 0;
        for recipient in config.registry.party_ids().into_iter().filter(|p| p != &me) {
            let envelope = seal_seed(config.suite.as_ref(), &config.registry, seed, dims, &me, &config.secret, &recipient)?;
            conn.send(&Frame::new(MsgType::SeedEnvelope, me.clone(), 0, envelope.to_bytes()))?;
            sent += 1;
        }
        (seed, dims, sent, 0)
    } else {
        let frame = conn.expect(MsgType::SeedEnvelope, "seed envelope")?;
        let envelope = SeedEnvelope::from_bytes(&frame.payload)?;
        if envelope.recipient != me {
            return Err(Error::Protocol(format!("received envelope addressed to {}", envelope.recipient)));
        }
        let (seed, dims) = open_seed(config.suite.as_ref(), &config.registry, &envelope, &config.secret)?;
        (seed, dims, 0, 1)
    };

    let mut ctx = masking::build_mask_context(seed, dims, me.clone(), config.private_seed)?;
    let mut rounds = Vec::with_capacity(config.rounds.len());
    for (t, data) in config.rounds.iter().enumerate() {
        if t > 0 {
            ctx = ctx.advance_iteration()?;
        }
        let start = Instant::now();
        let masked = masking::mask(data, &ctx)?;
        let masking = start.elapsed();
        let chunks = chunk_and_send(&masked, data.labels.as_deref(), config.chunk_rows, &mut conn.stream)?;
        let ack = conn.expect(MsgType::GramAck, "gram acknowledgement")?;
        if ack.iteration != ctx.iteration() {
            return Err(Error::Protocol(format!("GRAM_ACK for iteration {} during iteration {}", ack.iteration, ctx.iteration())));
        }
        rounds.push(RoundStats { rows: data.samples(), chunks, masking });
    }
    let _ = conn.stream.shutdown(Shutdown::Both);
    Ok(InputOutcome { party_id: me, leader, envelopes_sent: sent, envelopes_received: received, dims, rounds })
}

#[derive(Clone, Debug)]
pub struct FunctionPartyConfig {
    pub registry: PartyRegistry,
    /// Number of masking rounds every input party contributes.
    pub rounds: usize,
    pub timeout: Duration,
    /// Keep a copy of every frame received from input parties.
    pub record_frames: bool,
    /// Run the grid search once all rounds are in.
    pub training: Option<GridSpec>,
}

#[derive(Clone, Debug)]
pub struct FunctionOutcome {
    pub gram: GramMatrix,
    pub store: PayloadStore,
    /// Labels aligned with the Gram rows, when every batch carried them.
    pub labels: Option<Vec<i64>>,
    /// Envelope bytes exactly as relayed.
    pub relayed_envelopes: Vec<Vec<u8>>,
    pub observed_frames: Vec<Frame>,
    /// Block products plus assembly, per round.
    pub gram_times: Vec<Duration>,
    pub training_time: Option<Duration>,
    pub cv: Option<CvReport>,
    pub model: Option<TrainedModel>,
}

enum Event {
    Connected(usize, TcpStream),
    Frame(usize, Frame),
    Closed(usize),
    Failed(usize, Error),
}

pub struct FunctionParty {
    listener: TcpListener,
    config: FunctionPartyConfig,
}

#[derive(Default)]
struct RoundBuffer {
    chunks: BTreeMap<PartyId, Vec<Matrix>>,
    ended: BTreeMap<PartyId, (usize, Option<Vec<i64>>)>,
}

impl FunctionParty {
    /// Binds to the registry's function-party endpoint.
    pub fn bind(config: FunctionPartyConfig) -> Result<Self> {
        let listener = TcpListener::bind(config.registry.function_party.socket_addr())?;
        Self::with_listener(listener, config)
    }

    pub fn with_listener(listener: TcpListener, config: FunctionPartyConfig) -> Result<Self> {
        config.registry.validate()?;
        if config.rounds == 0 {
            return Err(Error::Config("at least one round is required".into()));
        }
        Ok(FunctionParty { listener, config })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    pub fn run(self) -> Result<FunctionOutcome> {
        let (tx, rx) = mpsc::channel();
        let stop = Arc::new(AtomicBool::new(false));
        self.listener.set_nonblocking(true)?;
        let acceptor = {
            let listener = self.listener.try_clone()?;
            let (tx, stop) = (tx.clone(), Arc::clone(&stop));
            thread::spawn(move || accept_loop(listener, tx, stop))
        };
        let mut state = Relay::new(self.config, tx);
        let result = state.serve(&rx);
        if let Err(err) = &result {
            state.broadcast_error(&err.to_string());
        }
        stop.store(true, Ordering::SeqCst);
        state.close_all();
        let _ = acceptor.join();
        for reader in state.readers.drain(..) {
            let _ = reader.join();
        }
        result
    }
}

fn accept_loop(listener: TcpListener, tx: Sender<Event>, stop: Arc<AtomicBool>) {
    let mut next = 0;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                if stream.set_nonblocking(false).is_ok() && tx.send(Event::Connected(next, stream)).is_err() {
                    return;
                }
                next += 1;
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(2)),
            Err(_) => thread::sleep(Duration::from_millis(2)),
        }
    }
}

fn read_loop(id: usize, mut stream: TcpStream, tx: Sender<Event>) {
    loop {
        let event = match Frame::read_from(&mut stream) {
            Ok(Some(frame)) => Event::Frame(id, frame),
            Ok(None) => Event::Closed(id),
            Err(e) => Event::Failed(id, e),
        };
        let done = !matches!(event, Event::Frame(..));
        if tx.send(event).is_err() || done {
            return;
        }
    }
}

struct Relay {
    config: FunctionPartyConfig,
    expected: BTreeSet<PartyId>,
    tx: Sender<Event>,
    writers: BTreeMap<usize, TcpStream>,
    party_of: BTreeMap<usize, PartyId>,
    conn_of: BTreeMap<PartyId, usize>,
    readers: Vec<JoinHandle<()>>,
    started: bool,
    round: usize,
    buffer: RoundBuffer,
    width: Option<usize>,
    state: Option<(GramMatrix, PayloadStore)>,
    labels: Option<Vec<i64>>,
    relayed: Vec<Vec<u8>>,
    observed: Vec<Frame>,
    gram_times: Vec<Duration>,
}

impl Relay {
    fn new(config: FunctionPartyConfig, tx: Sender<Event>) -> Self {
        let expected = config.registry.party_ids().into_iter().collect();
        Relay {
            config,
            expected,
            tx,
            writers: BTreeMap::new(),
            party_of: BTreeMap::new(),
            conn_of: BTreeMap::new(),
            readers: Vec::new(),
            started: false,
            round: 0,
            buffer: RoundBuffer::default(),
            width: None,
            state: None,
            labels: Some(Vec::new()),
            relayed: Vec::new(),
            observed: Vec::new(),
            gram_times: Vec::new(),
        }
    }

    fn missing(&self) -> String {
        let pending: Vec<String> = if !self.started {
            self.expected.iter().filter(|p| !self.conn_of.contains_key(*p)).map(|p| p.to_string()).collect()
        } else {
            self.expected.iter().filter(|p| !self.buffer.ended.contains_key(*p)).map(|p| p.to_string()).collect()
        };
        format!("parties [{}] (round {})", pending.join(", "), self.round)
    }

    fn serve(&mut self, rx: &Receiver<Event>) -> Result<FunctionOutcome> {
        while self.round < self.config.rounds {
            let event = match rx.recv_timeout(self.config.timeout) {
                Ok(event) => event,
                Err(RecvTimeoutError::Timeout) => return Err(Error::Timeout(self.missing())),
                Err(RecvTimeoutError::Disconnected) => return Err(Error::Protocol("event channel closed".into())),
            };
            match event {
                Event::Connected(id, stream) => self.on_connect(id, stream)?,
                Event::Frame(id, frame) => self.on_frame(id, frame)?,
                Event::Closed(id) | Event::Failed(id, _) if !self.party_of.contains_key(&id) => {
                    self.writers.remove(&id);
                }
                Event::Closed(id) => {
                    return Err(Error::Protocol(format!("{} disconnected mid-session", self.party_of[&id])));
                }
                Event::Failed(id, err) => {
                    return Err(Error::Protocol(format!("connection of {} failed: {err}", self.party_of[&id])));
                }
            }
        }
        self.finish()
    }

    fn on_connect(&mut self, id: usize, stream: TcpStream) -> Result<()> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        let tx = self.tx.clone();
        self.readers.push(thread::spawn(move || read_loop(id, reader, tx)));
        self.writers.insert(id, stream);
        Ok(())
    }

    fn send_to(&mut self, party: &PartyId, frame: &Frame) -> Result<()> {
        let id = self.conn_of[party];
        let stream = self.writers.get_mut(&id).ok_or_else(|| Error::Protocol(format!("no connection to {party}")))?;
        frame.write_to(stream)
    }

    fn reject(&mut self, id: usize, message: &str) {
        if let Some(mut stream) = self.writers.remove(&id) {
            let _ = Frame::new(MsgType::Error, PartyId::function_party(), 0, message.as_bytes().to_vec()).write_to(&mut stream);
            let _ = stream.shutdown(Shutdown::Both);
        }
    }

    fn on_frame(&mut self, id: usize, frame: Frame) -> Result<()> {
        let Some(party) = self.party_of.get(&id).cloned() else {
            return self.on_hello(id, frame);
        };
        if frame.party_id != party {
            return Err(Error::Protocol(format!("{party} sent a frame claiming to be {}", frame.party_id)));
        }
        if self.config.record_frames {
            self.observed.push(frame.clone());
        }
        match frame.msg_type {
            MsgType::SeedEnvelope => {
                let envelope = SeedEnvelope::from_bytes(&frame.payload)?;
                if envelope.sender != party || !self.expected.contains(&envelope.recipient) || envelope.recipient == party {
                    return Err(Error::Protocol(format!("{party} sent an envelope with bad routing")));
                }
                self.relayed.push(frame.payload.clone());
                self.send_to(&envelope.recipient, &frame)
            }
            MsgType::MaskedChunk => {
                self.check_round(&party, &frame)?;
                let chunk = decode_matrix(&frame.payload)?;
                match self.width {
                    Some(w) if w != chunk.cols() => return Err(Error::WidthMismatch { left: w, right: chunk.cols() }),
                    _ => self.width = Some(chunk.cols()),
                }
                self.buffer.chunks.entry(party).or_default().push(chunk);
                Ok(())
            }
            MsgType::ChunkEnd => {
                self.check_round(&party, &frame)?;
                let (rows, labels) = decode_chunk_end(&frame.payload)?;
                self.buffer.ended.insert(party, (rows, labels));
                if self.buffer.ended.len() == self.expected.len() {
                    self.complete_round()?;
                }
                Ok(())
            }
            other => Err(Error::Protocol(format!("unexpected {other:?} from {party}"))),
        }
    }

    fn on_hello(&mut self, id: usize, frame: Frame) -> Result<()> {
        let party = frame.party_id.clone();
        if frame.msg_type != MsgType::Hello {
            self.reject(id, "first frame must be HELLO");
            return Ok(());
        }
        if !self.expected.contains(&party) {
            self.reject(id, &format!("{party} is not in the registry"));
            return Ok(());
        }
        if self.conn_of.contains_key(&party) {
            self.reject(id, &format!("{party} is already connected"));
            return Ok(());
        }
        self.party_of.insert(id, party.clone());
        self.conn_of.insert(party, id);
        if self.conn_of.len() == self.expected.len() {
            self.started = true;
            let parties: Vec<PartyId> = self.expected.iter().cloned().collect();
            for p in parties {
                self.send_to(&p, &Frame::new(MsgType::Hello, PartyId::function_party(), 0, Vec::new()))?;
            }
        }
        Ok(())
    }

    fn check_round(&self, party: &PartyId, frame: &Frame) -> Result<()> {
        if !self.started {
            return Err(Error::Protocol(format!("{party} sent data before the session started")));
        }
        if frame.iteration as usize != self.round {
            return Err(Error::Protocol(format!("{party} sent iteration {} during round {}", frame.iteration, self.round)));
        }
        if self.buffer.ended.contains_key(party) {
            return Err(Error::Protocol(format!("{party} sent data after CHUNK_END")));
        }
        Ok(())
    }

    fn complete_round(&mut self) -> Result<()> {
        let buffer = std::mem::take(&mut self.buffer);
        let width = self.width.unwrap_or(0);
        let mut batches = Vec::with_capacity(self.expected.len());
        let mut round_labels = Vec::new();
        for party in &self.expected {
            let payload = reassemble(buffer.chunks.get(party).map_or(&[][..], Vec::as_slice), width)?;
            let (rows, labels) = &buffer.ended[party];
            if payload.rows() != *rows {
                return Err(Error::Protocol(format!("{party} announced {rows} rows but sent {}", payload.rows())));
            }
            match labels {
                Some(l) => round_labels.extend_from_slice(l),
                None if *rows > 0 => self.labels = None,
                None => {}
            }
            batches.push(MaskedMatrix { payload, party_id: party.clone(), iteration: self.round as u32 });
        }
        if let Some(all) = &mut self.labels {
            all.extend(round_labels);
        }

        let start = Instant::now();
        match &mut self.state {
            None => {
                if batches.iter().any(|b| b.sample_count() == 0) {
                    return Err(Error::Protocol("every party must contribute samples in round 0".into()));
                }
                self.state = Some(gram::initial_state(batches)?);
            }
            Some((gram, store)) => {
                for batch in batches {
                    gram::extend_with_data(gram, batch, store)?;
                }
            }
        }
        self.gram_times.push(start.elapsed());

        let size = self.state.as_ref().map_or(0, |(g, _)| g.size()) as u64;
        let parties: Vec<PartyId> = self.expected.iter().cloned().collect();
        for p in parties {
            self.send_to(&p, &Frame::new(MsgType::GramAck, PartyId::function_party(), self.round as u32, size.to_le_bytes().to_vec()))?;
        }
        self.round += 1;
        Ok(())
    }

    fn finish(&mut self) -> Result<FunctionOutcome> {
        let (gram, store) = self.state.take().ok_or_else(|| Error::Protocol("no data received".into()))?;
        let labels = self.labels.take();
        let (mut cv, mut model, mut training_time) = (None, None, None);
        if let Some(grid) = &self.config.training {
            let labels = labels.as_deref().ok_or_else(|| Error::InvalidLabels("training requires labelled batches".into()))?;
            let start = Instant::now();
            let report = cross_validate_grid(&gram, labels, grid)?;
            let scaled = gram.values().scale(report.gram_scale);
            let kernel = report.best_kernel.from_gram(&scaled)?;
            model = Some(TrainedModel::fit(&kernel, labels, report.best_c, report.best_kernel, report.gram_scale)?);
            training_time = Some(start.elapsed());
            cv = Some(report);
        }
        Ok(FunctionOutcome {
            gram,
            store,
            labels,
            relayed_envelopes: std::mem::take(&mut self.relayed),
            observed_frames: std::mem::take(&mut self.observed),
            gram_times: std::mem::take(&mut self.gram_times),
            training_time,
            cv,
            model,
        })
    }

    fn broadcast_error(&mut self, message: &str) {
        for stream in self.writers.values_mut() {
            let _ = Frame::new(MsgType::Error, PartyId::function_party(), self.round as u32, message.as_bytes().to_vec()).write_to(stream);
        }
    }

    fn close_all(&mut self) {
        for stream in self.writers.values() {
            let _ = stream.shutdown(Shutdown::Both);
        }
        self.writers.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::MaskRng;

    #[test]
    fn chunking_splits_and_reassembles_bit_identically() {
        let payload = MaskRng::new(1, 0, 0).normal_matrix(100, 10);
        let masked = MaskedMatrix { payload: payload.clone(), party_id: PartyId::new("A").unwrap(), iteration: 2 };
        let frames = chunk_frames(&masked, 32).unwrap();
        assert_eq!(frames.len(), 4);
        let chunks: Vec<Matrix> = frames.iter().map(|f| decode_matrix(&f.payload).unwrap()).collect();
        assert_eq!(chunks.iter().map(Matrix::rows).collect::<Vec<_>>(), vec![32, 32, 32, 4]);
        assert!(frames.iter().all(|f| f.iteration == 2 && f.msg_type == MsgType::MaskedChunk));
        let back = reassemble(&chunks, 10).unwrap();
        assert_eq!(back.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), payload.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn chunk_and_send_writes_end_marker() {
        let masked = MaskedMatrix { payload: Matrix::zeros(5, 3), party_id: PartyId::new("B").unwrap(), iteration: 0 };
        let mut buf = Vec::new();
        assert_eq!(chunk_and_send(&masked, Some(&[1, 2, 3, 4, 5]), 2, &mut buf).unwrap(), 3);
        let mut cursor = io::Cursor::new(buf);
        let mut types = Vec::new();
        let mut last = None;
        while let Some(frame) = Frame::read_from(&mut cursor).unwrap() {
            types.push(frame.msg_type);
            last = Some(frame);
        }
        assert_eq!(types, vec![MsgType::MaskedChunk, MsgType::MaskedChunk, MsgType::MaskedChunk, MsgType::ChunkEnd]);
        assert_eq!(decode_chunk_end(&last.unwrap().payload).unwrap(), (5, Some(vec![1, 2, 3, 4, 5])));
    }

    #[test]
    fn chunk_end_codec() {
        assert_eq!(decode_chunk_end(&encode_chunk_end(0, None)).unwrap(), (0, None));
        assert_eq!(decode_chunk_end(&encode_chunk_end(2, Some(&[-1, 7]))).unwrap(), (2, Some(vec![-1, 7])));
        let mut bad = encode_chunk_end(2, Some(&[-1, 7]));
        bad.pop();
        assert!(decode_chunk_end(&bad).is_err());
        assert!(decode_chunk_end(&[0; 4]).is_err());
    }
}
