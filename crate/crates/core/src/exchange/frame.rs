use std::io::{self, Read, Write};

use crate::{Error, Result};

pub const MAX_PAYLOAD: usize = 4 * 1024 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameType {
    Hello = 1,
    Meta = 2,
    Chunk = 3,
    Done = 4,
    Err = 5,
}

impl FrameType {
    pub const ALL: [FrameType; 5] = [
        FrameType::Hello,
        FrameType::Meta,
        FrameType::Chunk,
        FrameType::Done,
        FrameType::Err,
    ];

    pub fn from_byte(b: u8) -> Result<Self> {
        FrameType::ALL
            .into_iter()
            .find(|t| *t as u8 == b)
            .ok_or_else(|| Error::Protocol(format!("unknown frame type {b}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: FrameType, payload: impl Into<Vec<u8>>) -> Self {
        Frame {
            kind,
            payload: payload.into(),
        }
    }

    pub fn error(message: &str) -> Self {
        Frame::new(FrameType::Err, message.as_bytes())
    }
}

/// Writes `type u8 | length u32 | payload`.
pub fn write_frame(w: &mut impl Write, kind: FrameType, payload: &[u8]) -> Result<()> {
    if payload.len() > MAX_PAYLOAD {
        return Err(Error::Protocol(format!(
            "payload of {} bytes exceeds the 4 MiB limit",
            payload.len()
        )));
    }
    let mut header = [0u8; 5];
    header[0] = kind as u8;
    header[1..].copy_from_slice(&(payload.len() as u32).to_le_bytes());
    w.write_all(&header)?;
    w.write_all(payload)?;
    Ok(())
}

pub fn read_frame(r: &mut impl Read) -> Result<Frame> {
    let mut header = [0u8; 5];
    r.read_exact(&mut header)
        .map_err(|e| eof_context(e, "frame header"))?;
    let kind = FrameType::from_byte(header[0])?;
    let len = u32::from_le_bytes(header[1..].try_into().unwrap()) as usize;
    if len > MAX_PAYLOAD {
        return Err(Error::Protocol(format!(
            "{kind:?} frame announces {len} bytes, above the 4 MiB limit"
        )));
    }
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)
        .map_err(|e| eof_context(e, "frame payload"))?;
    Ok(Frame { kind, payload })
}

fn eof_context(e: io::Error, what: &str) -> Error {
    match e.kind() {
        io::ErrorKind::UnexpectedEof => {
            Error::Protocol(format!("connection closed while reading {what}"))
        }
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => {
            Error::Protocol(format!("idle timeout while reading {what}"))
        }
        _ => Error::Io(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let mut buf = Vec::new();
        write_frame(&mut buf, FrameType::Meta, b"abc").unwrap();
        assert_eq!(buf, [2, 3, 0, 0, 0, b'a', b'b', b'c']);
        let f = read_frame(&mut buf.as_slice()).unwrap();
        assert_eq!(f, Frame::new(FrameType::Meta, b"abc".to_vec()));
    }

    #[test]
    fn unknown_type_and_oversize() {
        let err = read_frame(&mut [9u8, 0, 0, 0, 0].as_slice()).unwrap_err();
        assert!(err.to_string().contains("unknown frame type 9"));
        let big = ((MAX_PAYLOAD + 1) as u32).to_le_bytes();
        let err = read_frame(&mut [3, big[0], big[1], big[2], big[3]].as_slice()).unwrap_err();
        assert!(err.to_string().contains("4 MiB"));
        assert!(write_frame(&mut Vec::new(), FrameType::Chunk, &vec![0; MAX_PAYLOAD + 1]).is_err());
    }

    #[test]
    fn short_payload_is_reported() {
        let err = read_frame(&mut [3u8, 4, 0, 0, 0, 1].as_slice()).unwrap_err();
        assert!(err
            .to_string()
            .contains("closed while reading frame payload"));
    }
}
