use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use super::format::decode_embedding_file;
use super::frame::{read_frame, write_frame, FrameType};
use super::session::{Event, Session, PROTOCOL_VERSION};
use crate::{Error, Result};

pub const DEFAULT_PORT: u16 = 7519;
pub const IDLE_TIMEOUT: Duration = Duration::from_secs(30);
const CHUNK_SIZE: usize = 64 * 1024;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReceivedFile {
    pub path: PathBuf,
    pub bytes: u64,
    pub source_tag: String,
    pub peer: SocketAddr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferSummary {
    pub bytes: u64,
    pub chunks: usize,
    pub duration: Duration,
}

/// Single-session receiver.
pub struct Server {
    listener: TcpListener,
    timeout: Duration,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Self> {
        Ok(Server {
            listener: TcpListener::bind(addr)?,
            timeout: IDLE_TIMEOUT,
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts one connection and stores the received file in `output_dir`.
    /// Nothing is written unless the file arrives complete and verifies.
    pub fn accept_one(&self, output_dir: impl AsRef<Path>) -> Result<ReceivedFile> {
        let (stream, peer) = self.listener.accept()?;
        stream.set_read_timeout(Some(self.timeout))?;
        stream.set_nodelay(true)?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = stream;

        let mut session = Session::new();
        let result = (|| -> Result<()> {
            loop {
                let frame = read_frame(&mut reader)?;
                match session.accept(frame.kind, &frame.payload)? {
                    Event::Negotiated(v) => {
                        write_frame(&mut writer, FrameType::Hello, &v.to_le_bytes())?
                    }
                    Event::Meta { .. } | Event::Chunk(_) => {}
                    Event::Complete { .. } => {
                        decode_embedding_file(session.data())?;
                        return Ok(());
                    }
                }
            }
        })();
        if let Err(e) = result {
            let _ = write_frame(&mut writer, FrameType::Err, e.to_string().as_bytes());
            return Err(e);
        }

        let dir = output_dir.as_ref();
        let path = dir.join(format!("{}.lse", file_stem(session.source_tag())));
        let tmp = dir.join(format!(".{}.partial", file_stem(session.source_tag())));
        let bytes = session.bytes_received();
        let source_tag = session.source_tag().to_owned();
        let crc = crc32fast::hash(session.data());
        let stored = fs::write(&tmp, session.data()).and_then(|_| fs::rename(&tmp, &path));
        if let Err(e) = stored {
            let _ = fs::remove_file(&tmp);
            let _ = write_frame(&mut writer, FrameType::Err, e.to_string().as_bytes());
            return Err(e.into());
        }
        write_frame(&mut writer, FrameType::Done, &crc.to_le_bytes())?;
        Ok(ReceivedFile {
            path,
            bytes,
            source_tag,
            peer,
        })
    }
}

fn file_stem(tag: &str) -> String {
    let stem: String = tag
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if stem.is_empty() {
        "received".into()
    } else {
        stem
    }
}

/// Validates the file locally, then streams it to a listening peer and
/// waits for its acknowledgement.
pub fn send(addr: impl ToSocketAddrs, path: impl AsRef<Path>) -> Result<TransferSummary> {
    let bytes = fs::read(path.as_ref())?;
    let table = decode_embedding_file(&bytes)?;
    send_bytes(addr, &bytes, table.source_tag())
}

fn send_bytes(addr: impl ToSocketAddrs, bytes: &[u8], source_tag: &str) -> Result<TransferSummary> {
    let start = Instant::now();
    let stream = TcpStream::connect(addr)?;
    stream.set_read_timeout(Some(IDLE_TIMEOUT))?;
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);

    write_frame(
        &mut writer,
        FrameType::Hello,
        &PROTOCOL_VERSION.to_le_bytes(),
    )?;
    writer.flush()?;
    let reply = read_frame(&mut reader).map_err(|e| context(e, "HELLO"))?;
    match reply.kind {
        FrameType::Hello => {}
        FrameType::Err => return Err(rejected(&reply.payload)),
        other => {
            return Err(Error::Protocol(format!(
                "expected HELLO reply, got {other:?}"
            )))
        }
    }

    let mut meta = (bytes.len() as u64).to_le_bytes().to_vec();
    meta.extend_from_slice(&(source_tag.len() as u32).to_le_bytes());
    meta.extend_from_slice(source_tag.as_bytes());
    write_frame(&mut writer, FrameType::Meta, &meta)?;
    let mut chunks = 0;
    for chunk in bytes.chunks(CHUNK_SIZE) {
        write_frame(&mut writer, FrameType::Chunk, chunk).map_err(|e| context(e, "CHUNK"))?;
        chunks += 1;
    }
    let crc = crc32fast::hash(bytes);
    write_frame(&mut writer, FrameType::Done, &crc.to_le_bytes())?;
    writer.flush()?;

    let reply = read_frame(&mut reader).map_err(|e| context(e, "DONE"))?;
    match reply.kind {
        FrameType::Done if reply.payload == crc.to_le_bytes() => Ok(TransferSummary {
            bytes: bytes.len() as u64,
            chunks,
            duration: start.elapsed(),
        }),
        FrameType::Err => Err(rejected(&reply.payload)),
        other => Err(Error::Protocol(format!(
            "unexpected {other:?} acknowledgement"
        ))),
    }
}

fn rejected(payload: &[u8]) -> Error {
    Error::Protocol(format!(
        "receiver rejected transfer: {}",
        String::from_utf8_lossy(payload)
    ))
}

fn context(e: Error, frame: &str) -> Error {
    match e {
        Error::Protocol(m) => Error::Protocol(format!("{frame}: {m}")),
        Error::Io(io) => Error::Protocol(format!("{frame}: {io}")),
        other => other,
    }
}
