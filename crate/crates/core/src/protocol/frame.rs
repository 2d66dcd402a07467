//! Fixed 25-byte header followed by an opaque payload.
//!
//! ```text
//! 0..4    magic "FLK1"
//! 4       msg_type
//! 5..13   party id, ASCII, zero padded
//! 13..17  iteration, u32 LE
//! 17..25  payload length, u64 LE
//! 25..    payload
//! ```

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::party::{PartyId, PARTY_ID_LEN};

pub const MAGIC: [u8; 4] = *b"FLK1";
pub const HEADER_LEN: usize = 4 + 1 + PARTY_ID_LEN + 4 + 8;
/// Upper bound accepted by the reader; larger frames are rejected before
/// allocating.
pub const MAX_PAYLOAD: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    SeedEnvelope = 2,
    MaskedChunk = 3,
    ChunkEnd = 4,
    GramAck = 5,
    Error = 6,
}

impl MsgType {
    pub const ALL: [MsgType; 6] =
        [MsgType::Hello, MsgType::SeedEnvelope, MsgType::MaskedChunk, MsgType::ChunkEnd, MsgType::GramAck, MsgType::Error];
}

impl TryFrom<u8> for MsgType {
    type Error = Error;

    fn try_from(byte: u8) -> Result<Self> {
        MsgType::ALL
            .into_iter()
            .find(|t| *t as u8 == byte)
            .ok_or_else(|| Error::Frame(format!("unknown message type {byte}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub party_id: PartyId,
    pub iteration: u32,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, party_id: PartyId, iteration: u32, payload: Vec<u8>) -> Self {
        Frame { msg_type, party_id, iteration, payload }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    fn header(&self) -> [u8; HEADER_LEN] {
        let mut header = [0u8; HEADER_LEN];
        header[..4].copy_from_slice(&MAGIC);
        header[4] = self.msg_type as u8;
        header[5..13].copy_from_slice(&self.party_id.to_wire());
        header[13..17].copy_from_slice(&self.iteration.to_le_bytes());
        header[17..25].copy_from_slice(&(self.payload.len() as u64).to_le_bytes());
        header
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.header());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes exactly one frame; trailing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Frame> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Frame(format!("{} bytes is shorter than the header", bytes.len())));
        }
        let (header, payload) = bytes.split_at(HEADER_LEN);
        let (msg_type, party_id, iteration, len) = parse_header(header.try_into().expect("header length"))?;
        if len != payload.len() as u64 {
            return Err(Error::Frame(format!("payload_len {len} but {} payload bytes", payload.len())));
        }
        Ok(Frame { msg_type, party_id, iteration, payload: payload.to_vec() })
    }

    pub fn write_to<W: Write>(&self, writer: &mut W) -> Result<()> {
        writer.write_all(&self.header())?;
        writer.write_all(&self.payload)?;
        writer.flush()?;
        Ok(())
    }

    /// Reads one frame. A clean end of stream before the first header byte
    /// yields `Ok(None)`.
    pub fn read_from<R: Read>(reader: &mut R) -> Result<Option<Frame>> {
        let mut header = [0u8; HEADER_LEN];
        let mut filled = 0;
        while filled < HEADER_LEN {
            match reader.read(&mut header[filled..]) {
                Ok(0) if filled == 0 => return Ok(None),
                Ok(0) => return Err(Error::Frame("stream ended inside a frame header".into())),
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let (msg_type, party_id, iteration, len) = parse_header(&header)?;
        if len > MAX_PAYLOAD {
            return Err(Error::Frame(format!("payload_len {len} exceeds limit")));
        }
        let mut payload = vec![0u8; len as usize];
        reader.read_exact(&mut payload).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => Error::Frame("stream ended inside a frame payload".into()),
            _ => e.into(),
        })?;
        Ok(Some(Frame { msg_type, party_id, iteration, payload }))
    }
}

fn parse_header(header: &[u8; HEADER_LEN]) -> Result<(MsgType, PartyId, u32, u64)> {
    if header[..4] != MAGIC {
        return Err(Error::Frame(format!("bad magic {:?}", &header[..4])));
    }
    let msg_type = MsgType::try_from(header[4])?;
    let party_id = PartyId::from_wire(header[5..13].try_into().expect("party id length"))?;
    let iteration = u32::from_le_bytes(header[13..17].try_into().expect("u32"));
    let len = u64::from_le_bytes(header[17..25].try_into().expect("u64"));
    Ok((msg_type, party_id, iteration, len))
}
