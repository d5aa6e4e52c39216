//! Binary packet log for replay.
//!
//! Each record is `timestamp_us: u64 LE`, `length: u16 LE`, then `length`
//! raw wire bytes.

use std::io::{self, Read, Write};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PacketLog {
    bytes: Vec<u8>,
    frames: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoggedFrame {
    pub timestamp_us: u64,
    pub wire: Vec<u8>,
}

impl PacketLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, timestamp_us: u64, wire: &[u8]) {
        self.bytes.extend_from_slice(&timestamp_us.to_le_bytes());
        self.bytes.extend_from_slice(&(wire.len() as u16).to_le_bytes());
        self.bytes.extend_from_slice(wire);
        self.frames += 1;
    }

    pub fn len(&self) -> usize {
        self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.frames == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        w.write_all(&self.bytes)
    }
}

/// Parse a packet log; a truncated trailing record is an error.
pub fn read_log(mut r: impl Read) -> io::Result<Vec<LoggedFrame>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut out = Vec::new();
    let mut at = 0;
    while at < buf.len() {
        if buf.len() - at < 10 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated record header"));
        }
        let ts = u64::from_le_bytes(buf[at..at + 8].try_into().expect("8 bytes"));
        let len = u16::from_le_bytes([buf[at + 8], buf[at + 9]]) as usize;
        at += 10;
        if buf.len() - at < len {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated frame"));
        }
        out.push(LoggedFrame { timestamp_us: ts, wire: buf[at..at + len].to_vec() });
        at += len;
    }
    Ok(out)
}
