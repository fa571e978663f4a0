//! Binary embedding files and the framed point-to-point protocol used to
//! hand them from one peer to the other.
//!
//! All integers are little-endian.

mod format;
mod frame;
mod net;
mod session;

pub use format::{
    decode_embedding_file, encode_embedding_file, read_embedding_file, write_embedding_file,
    FormatError, FORMAT_VERSION, MAGIC,
};
pub use frame::{read_frame, write_frame, Frame, FrameType, MAX_PAYLOAD};
pub use net::{send, ReceivedFile, Server, TransferSummary, DEFAULT_PORT, IDLE_TIMEOUT};
pub use session::{Event, Session, SessionState, PROTOCOL_VERSION};
