use crate::exchange::frame::FrameType;
use crate::{Error, Result};

pub const PROTOCOL_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionState {
    AwaitHello,
    AwaitMeta,
    Receiving,
    Done,
    Failed,
}

/// What a successfully consumed frame means for the receiver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Negotiated(u16),
    Meta { size: u64, source_tag: String },
    Chunk(usize),
    Complete { crc: u32 },
}

/// Receiver side of one transfer: `HELLO → META → CHUNK* → DONE`.
///
/// Any violation moves the session to `Failed`, after which every frame is
/// rejected.
#[derive(Debug)]
pub struct Session {
    state: SessionState,
    version: Option<u16>,
    expected_size: u64,
    source_tag: String,
    data: Vec<u8>,
    crc: crc32fast::Hasher,
}

impl Default for Session {
    fn default() -> Self {
        Session::new()
    }
}

impl Session {
    pub fn new() -> Self {
        Session {
            state: SessionState::AwaitHello,
            version: None,
            expected_size: 0,
            source_tag: String::new(),
            data: Vec::new(),
            crc: crc32fast::Hasher::new(),
        }
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn version(&self) -> Option<u16> {
        self.version
    }

    pub fn bytes_received(&self) -> u64 {
        self.data.len() as u64
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    /// The received bytes; complete only once the state is `Done`.
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn accept(&mut self, kind: FrameType, payload: &[u8]) -> Result<Event> {
        let out = self.step(kind, payload);
        if out.is_err() {
            self.state = SessionState::Failed;
            self.data.clear();
        }
        out
    }

    fn step(&mut self, kind: FrameType, payload: &[u8]) -> Result<Event> {
        use SessionState::*;
        match (self.state, kind) {
            (_, FrameType::Err) => Err(Error::Protocol(format!(
                "peer reported error: {}",
                String::from_utf8_lossy(payload)
            ))),
            (AwaitHello, FrameType::Hello) => {
                let version = u16::from_le_bytes(fixed(payload, "HELLO")?);
                if version != PROTOCOL_VERSION {
                    return Err(Error::Protocol(format!("unsupported version {version}")));
                }
                self.version = Some(version);
                self.state = AwaitMeta;
                Ok(Event::Negotiated(version))
            }
            (AwaitMeta, FrameType::Meta) => {
                if payload.len() < 12 {
                    return Err(Error::Protocol("META payload too short".into()));
                }
                let size = u64::from_le_bytes(payload[..8].try_into().unwrap());
                let len = u32::from_le_bytes(payload[8..12].try_into().unwrap()) as usize;
                if payload.len() != 12 + len {
                    return Err(Error::Protocol(
                        "META source tag length does not match payload".into(),
                    ));
                }
                let tag = std::str::from_utf8(&payload[12..])
                    .map_err(|_| Error::Protocol("META source tag is not utf-8".into()))?;
                self.expected_size = size;
                self.source_tag = tag.to_owned();
                self.data = Vec::with_capacity(size.min(1 << 26) as usize);
                self.state = Receiving;
                Ok(Event::Meta {
                    size,
                    source_tag: self.source_tag.clone(),
                })
            }
            (Receiving, FrameType::Chunk) => {
                if self.data.len() as u64 + payload.len() as u64 > self.expected_size {
                    return Err(Error::Protocol(format!(
                        "received more than the announced {} bytes",
                        self.expected_size
                    )));
                }
                self.data.extend_from_slice(payload);
                self.crc.update(payload);
                Ok(Event::Chunk(payload.len()))
            }
            (Receiving, FrameType::Done) => {
                let announced = u32::from_le_bytes(fixed(payload, "DONE")?);
                if self.data.len() as u64 != self.expected_size {
                    return Err(Error::Protocol(format!(
                        "transfer ended after {} of {} bytes",
                        self.data.len(),
                        self.expected_size
                    )));
                }
                let computed = self.crc.clone().finalize();
                if computed != announced {
                    return Err(Error::Protocol(format!(
                        "stream crc mismatch: announced {announced:#010x}, computed {computed:#010x}"
                    )));
                }
                self.state = Done;
                Ok(Event::Complete { crc: computed })
            }
            (state, kind) => Err(Error::Protocol(format!(
                "unexpected {kind:?} frame in state {state:?}"
            ))),
        }
    }
}

fn fixed<const N: usize>(payload: &[u8], what: &str) -> Result<[u8; N]> {
    payload.try_into().map_err(|_| {
        Error::Protocol(format!(
            "{what} payload must be {N} bytes, got {}",
            payload.len()
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHUNK: &[u8] = b"abcd";

    fn meta(size: u64, tag: &str) -> Vec<u8> {
        let mut p = size.to_le_bytes().to_vec();
        p.extend_from_slice(&(tag.len() as u32).to_le_bytes());
        p.extend_from_slice(tag.as_bytes());
        p
    }

    /// Well-formed payload for each frame of `seq`, with META and DONE
    /// consistent with the number of CHUNK frames in the sequence.
    fn payloads(seq: &[FrameType]) -> Vec<Vec<u8>> {
        let chunks = seq.iter().filter(|t| **t == FrameType::Chunk).count();
        let body = CHUNK.repeat(chunks);
        seq.iter()
            .map(|t| match t {
                FrameType::Hello => PROTOCOL_VERSION.to_le_bytes().to_vec(),
                FrameType::Meta => meta(body.len() as u64, "x"),
                FrameType::Chunk => CHUNK.to_vec(),
                FrameType::Done => crc32fast::hash(&body).to_le_bytes().to_vec(),
                FrameType::Err => b"nope".to_vec(),
            })
            .collect()
    }

    /// Grammar `HELLO META CHUNK* DONE`, prefixes allowed.
    fn is_valid_prefix(seq: &[FrameType]) -> bool {
        use FrameType::*;
        let mut i = 0;
        for expected in [Hello, Meta] {
            match seq.get(i) {
                None => return true,
                Some(t) if *t == expected => i += 1,
                Some(_) => return false,
            }
        }
        while seq.get(i) == Some(&Chunk) {
            i += 1;
        }
        match seq.get(i) {
            None => true,
            Some(Done) => i + 1 == seq.len(),
            Some(_) => false,
        }
    }

    #[test]
    fn exhaustive_sequences_up_to_four() {
        let mut checked = 0;
        for len in 1..=4u32 {
            for code in 0..5usize.pow(len) {
                let seq: Vec<FrameType> = (0..len)
                    .map(|i| FrameType::ALL[code / 5usize.pow(i) % 5])
                    .collect();
                let mut s = Session::new();
                let accepted = seq
                    .iter()
                    .zip(payloads(&seq))
                    .all(|(t, p)| s.accept(*t, &p).is_ok());
                assert_eq!(accepted, is_valid_prefix(&seq), "{seq:?}");
                if !accepted {
                    assert_eq!(s.state(), SessionState::Failed);
                }
                checked += 1;
            }
        }
        assert_eq!(checked, 5 + 25 + 125 + 625);
    }

    #[test]
    fn full_transfer() {
        let body = b"hello world".to_vec();
        let mut s = Session::new();
        assert_eq!(
            s.accept(FrameType::Hello, &[1, 0]).unwrap(),
            Event::Negotiated(1)
        );
        s.accept(FrameType::Meta, &meta(body.len() as u64, "peer-b"))
            .unwrap();
        s.accept(FrameType::Chunk, &body[..5]).unwrap();
        s.accept(FrameType::Chunk, &body[5..]).unwrap();
        let crc = crc32fast::hash(&body);
        assert_eq!(
            s.accept(FrameType::Done, &crc.to_le_bytes()).unwrap(),
            Event::Complete { crc }
        );
        assert_eq!(
            (s.state(), s.source_tag(), s.data()),
            (SessionState::Done, "peer-b", &body[..])
        );
        assert!(s.accept(FrameType::Chunk, b"x").is_err());
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut s = Session::new();
        let err = s
            .accept(FrameType::Hello, &999u16.to_le_bytes())
            .unwrap_err();
        assert!(err.to_string().contains("unsupported version 999"));
        assert_eq!(s.state(), SessionState::Failed);
    }

    #[test]
    fn corrupted_chunk_fails_crc_and_discards_data() {
        let body = b"0123456789".to_vec();
        let mut s = Session::new();
        s.accept(FrameType::Hello, &[1, 0]).unwrap();
        s.accept(FrameType::Meta, &meta(10, "")).unwrap();
        let mut bad = body.clone();
        bad[3] ^= 0x40;
        s.accept(FrameType::Chunk, &bad).unwrap();
        let err = s
            .accept(FrameType::Done, &crc32fast::hash(&body).to_le_bytes())
            .unwrap_err();
        assert!(err.to_string().contains("crc mismatch"));
        assert!(s.data().is_empty());
    }

    #[test]
    fn short_and_long_transfers() {
        let mut s = Session::new();
        s.accept(FrameType::Hello, &[1, 0]).unwrap();
        s.accept(FrameType::Meta, &meta(3, "")).unwrap();
        assert!(s.accept(FrameType::Chunk, b"abcd").is_err());

        let mut s = Session::new();
        s.accept(FrameType::Hello, &[1, 0]).unwrap();
        s.accept(FrameType::Meta, &meta(3, "")).unwrap();
        s.accept(FrameType::Chunk, b"ab").unwrap();
        let err = s
            .accept(FrameType::Done, &crc32fast::hash(b"ab").to_le_bytes())
            .unwrap_err();
        assert!(err.to_string().contains("2 of 3"));
    }
}
