//! Wire framing for the one-wire servo bus (protocol 1.0 layout).
//!
//! `FF FF id length instruction|error params.. checksum`, with
//! `length = params + 2` and `checksum = !(id + length + code + Σparams)`.

use thiserror::Error;

pub const HEADER: [u8; 2] = [0xFF, 0xFF];
pub const BROADCAST_ID: u8 = 0xFE;
pub const IMU_BOARD_ID: u8 = 200;
pub const MAX_PARAMS: usize = 250;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Instruction {
    Ping = 0x01,
    Read = 0x02,
    Write = 0x03,
    SyncWrite = 0x83,
    BulkRead = 0x92,
}

impl Instruction {
    pub const ALL: [Instruction; 5] = [
        Instruction::Ping,
        Instruction::Read,
        Instruction::Write,
        Instruction::SyncWrite,
        Instruction::BulkRead,
    ];

    pub fn from_byte(b: u8) -> Option<Self> {
        Instruction::ALL.into_iter().find(|i| *i as u8 == b)
    }
}

/// Error bits carried in a status packet.
pub mod error_flags {
    pub const INPUT_VOLTAGE: u8 = 1 << 0;
    pub const OVERHEAT: u8 = 1 << 2;
    pub const RANGE: u8 = 1 << 3;
    pub const OVERLOAD: u8 = 1 << 5;
    pub const INSTRUCTION: u8 = 1 << 6;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BusPacket {
    pub id: u8,
    pub instruction: Instruction,
    pub params: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatusPacket {
    pub id: u8,
    pub error_flags: u8,
    pub params: Vec<u8>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("{0} parameter bytes exceed the {MAX_PARAMS}-byte frame limit")]
    Oversize(usize),
    #[error("status packets cannot carry the broadcast id")]
    BroadcastStatus,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    /// A complete frame was found but its checksum is wrong; `consumed`
    /// bytes (garbage plus the bad frame) should be dropped.
    #[error("checksum mismatch (expected {expected:#04x}, got {got:#04x})")]
    ChecksumMismatch { expected: u8, got: u8, consumed: usize },
    /// No complete frame yet; `skipped` leading garbage bytes may be dropped.
    #[error("need more data")]
    NeedMoreData { skipped: usize },
    /// Valid frame with an instruction byte this bus does not know.
    #[error("unknown instruction {code:#04x}")]
    UnknownInstruction { code: u8, consumed: usize },
}

impl DecodeError {
    /// Bytes the caller should discard from the front of its buffer.
    pub fn consumed(&self) -> usize {
        match *self {
            DecodeError::ChecksumMismatch { consumed, .. } => consumed,
            DecodeError::NeedMoreData { skipped } => skipped,
            DecodeError::UnknownInstruction { consumed, .. } => consumed,
        }
    }
}

pub fn checksum(id: u8, length: u8, code: u8, params: &[u8]) -> u8 {
    let sum = params
        .iter()
        .fold(id as u32 + length as u32 + code as u32, |acc, &b| acc + b as u32);
    !(sum as u8)
}

fn encode_frame(id: u8, code: u8, params: &[u8]) -> Result<Vec<u8>, EncodeError> {
    if params.len() > MAX_PARAMS {
        return Err(EncodeError::Oversize(params.len()));
    }
    let length = params.len() as u8 + 2;
    let mut out = Vec::with_capacity(params.len() + 6);
    out.extend_from_slice(&HEADER);
    out.extend_from_slice(&[id, length, code]);
    out.extend_from_slice(params);
    out.push(checksum(id, length, code, params));
    Ok(out)
}

pub fn encode(packet: &BusPacket) -> Result<Vec<u8>, EncodeError> {
    encode_frame(packet.id, packet.instruction as u8, &packet.params)
}

pub fn encode_status(status: &StatusPacket) -> Result<Vec<u8>, EncodeError> {
    if status.id == BROADCAST_ID {
        return Err(EncodeError::BroadcastStatus);
    }
    encode_frame(status.id, status.error_flags, &status.params)
}

/// A checksum-valid frame before interpretation of its code byte.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawFrame {
    pub id: u8,
    pub code: u8,
    pub params: Vec<u8>,
}

/// Find the first complete, checksum-valid frame in `bytes`.
///
/// Returns the frame and the number of bytes consumed, including any
/// garbage skipped before the header.
pub fn decode_frame(bytes: &[u8]) -> Result<(RawFrame, usize), DecodeError> {
    let mut start = 0;
    loop {
        // resync on FF FF; a lone trailing FF may be the start of a header
        match bytes[start..].windows(2).position(|w| w == HEADER) {
            Some(off) => start += off,
            None => {
                let keep = usize::from(bytes.last() == Some(&0xFF));
                return Err(DecodeError::NeedMoreData { skipped: bytes.len() - keep });
            }
        }
        // FF FF FF ... : the header is the last pair of the run
        while bytes.get(start + 2) == Some(&0xFF) {
            start += 1;
        }
        let rest = &bytes[start..];
        if rest.len() < 4 {
            return Err(DecodeError::NeedMoreData { skipped: start });
        }
        let (id, length) = (rest[2], rest[3]);
        if length < 2 {
            // cannot be a frame; skip this header and keep scanning
            start += 2;
            continue;
        }
        let total = 4 + length as usize;
        if rest.len() < total {
            return Err(DecodeError::NeedMoreData { skipped: start });
        }
        let code = rest[4];
        let params = &rest[5..total - 1];
        let got = rest[total - 1];
        let expected = checksum(id, length, code, params);
        if got != expected {
            return Err(DecodeError::ChecksumMismatch { expected, got, consumed: start + total });
        }
        let frame = RawFrame { id, code, params: params.to_vec() };
        return Ok((frame, start + total));
    }
}

/// Decode an instruction packet (master → device direction).
pub fn decode(bytes: &[u8]) -> Result<(BusPacket, usize), DecodeError> {
    let (frame, consumed) = decode_frame(bytes)?;
    let instruction = Instruction::from_byte(frame.code)
        .ok_or(DecodeError::UnknownInstruction { code: frame.code, consumed })?;
    Ok((BusPacket { id: frame.id, instruction, params: frame.params }, consumed))
}

/// Decode a status packet (device → master direction).
pub fn decode_status(bytes: &[u8]) -> Result<(StatusPacket, usize), DecodeError> {
    let (frame, consumed) = decode_frame(bytes)?;
    Ok((StatusPacket { id: frame.id, error_flags: frame.code, params: frame.params }, consumed))
}
