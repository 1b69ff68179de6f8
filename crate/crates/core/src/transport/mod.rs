//! Client/server boundary. Every operation is a request/response exchange of
//! framed [`Message`]s, either with an in-process [`Server`] or over TCP.
//! [`Session`] counts requests and bytes so protocol costs can be asserted.

mod message;
mod server;

use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;

pub use message::{
    decode, decode_body, encode, read_frame, write_frame, ErrorCode, Message, Opcode, MAX_FRAME,
    SENTINEL, SPARSE_WIRE_LEN,
};
pub use server::{serve, Server, ServerHandle};

use crate::cipher::Ciphertext;
use crate::error::{Error, Result};
use crate::store::SparseIndex;

pub const DEFAULT_PORT: u16 = 7487;

/// Moves one encoded request frame to the server and returns the response
/// frame.
pub trait Channel: Send {
    fn exchange(&mut self, frame: &[u8]) -> Result<Vec<u8>>;
}

pub struct InProcess {
    server: Arc<Server>,
}

impl InProcess {
    pub fn new(server: Arc<Server>) -> Self {
        Self { server }
    }
}

impl Channel for InProcess {
    fn exchange(&mut self, frame: &[u8]) -> Result<Vec<u8>> {
        Ok(self.server.handle_frame(frame))
    }
}

pub struct Tcp {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Tcp {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }
}

impl Channel for Tcp {
    fn exchange(&mut self, frame: &[u8]) -> Result<Vec<u8>> {
        write_frame(&mut self.writer, frame)?;
        read_frame(&mut self.reader)?.ok_or_else(|| Error::Protocol("connection closed".into()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub requests_sent: u64,
    pub cells_fetched: u64,
    pub bytes_on_wire: u64,
}

impl SessionStats {
    pub fn since(&self, earlier: &SessionStats) -> SessionStats {
        SessionStats {
            requests_sent: self.requests_sent - earlier.requests_sent,
            cells_fetched: self.cells_fetched - earlier.cells_fetched,
            bytes_on_wire: self.bytes_on_wire - earlier.bytes_on_wire,
        }
    }
}

/// One client connection: strict request/response, one request in flight.
pub struct Session {
    channel: Box<dyn Channel>,
    stats: SessionStats,
    transcript: Option<Vec<Vec<u8>>>,
}

impl Session {
    pub fn new(channel: impl Channel + 'static) -> Self {
        Self {
            channel: Box::new(channel),
            stats: SessionStats::default(),
            transcript: None,
        }
    }

    pub fn in_process(server: Arc<Server>) -> Self {
        Self::new(InProcess::new(server))
    }

    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        Ok(Self::new(Tcp::connect(addr)?))
    }

    /// Keeps a copy of every frame sent and received.
    pub fn record_transcript(&mut self) {
        self.transcript = Some(Vec::new());
    }

    pub fn transcript(&self) -> &[Vec<u8>] {
        self.transcript.as_deref().unwrap_or(&[])
    }

    pub fn stats(&self) -> SessionStats {
        self.stats
    }

    /// Sends a request and returns its paired response. A server `ERROR`
    /// becomes [`Error::Server`].
    pub fn request(&mut self, msg: &Message) -> Result<Message> {
        let expected = msg
            .expected_response()
            .ok_or_else(|| Error::Protocol(format!("{:?} is not a request", msg.opcode())))?;
        let frame = encode(msg);
        if frame.len() - 4 > MAX_FRAME {
            return Err(Error::Protocol("request exceeds frame limit".into()));
        }
        let reply_frame = self.channel.exchange(&frame)?;
        self.stats.requests_sent += 1;
        self.stats.bytes_on_wire += (frame.len() + reply_frame.len()) as u64;
        if let Some(t) = self.transcript.as_mut() {
            t.push(frame);
            t.push(reply_frame.clone());
        }
        let reply = decode(&reply_frame)?;
        match reply {
            Message::Error { code, message } => Err(Error::Server { code, message }),
            r if r.opcode() == expected => {
                if expected == Opcode::Cell {
                    self.stats.cells_fetched += 1;
                }
                Ok(r)
            }
            r => Err(Error::Protocol(format!(
                "expected {expected:?}, got {:?}",
                r.opcode()
            ))),
        }
    }

    pub fn get_cell(&mut self, j: usize) -> Result<Ciphertext> {
        match self.request(&Message::GetCell { index: j as u64 })? {
            Message::Cell { cell } => Ciphertext::from_bytes(&cell),
            _ => unreachable!("pairing checked in request"),
        }
    }

    pub fn length(&mut self) -> Result<usize> {
        match self.request(&Message::Length)? {
            Message::Len { n } => Ok(n as usize),
            _ => unreachable!("pairing checked in request"),
        }
    }

    pub fn insert_at(&mut self, l: usize, c: &Ciphertext) -> Result<()> {
        self.request(&Message::InsertAt {
            index: l as u64,
            cell: c.to_bytes().to_vec(),
        })?;
        Ok(())
    }

    pub fn insert_between(
        &mut self,
        left: Option<usize>,
        right: Option<usize>,
        c: &Ciphertext,
    ) -> Result<SparseIndex> {
        let r = self.request(&Message::InsertBetween {
            left: left.map_or(SENTINEL, |l| l as u64),
            right: right.map_or(SENTINEL, |r| r as u64),
            cell: c.to_bytes().to_vec(),
        })?;
        match r {
            Message::Ok { sparse: Some(s) } => Ok(SparseIndex::from_be_bytes(&s)),
            _ => Err(Error::Protocol("INSERT_BETWEEN reply lacks an index".into())),
        }
    }

    /// `batch == 0` runs a complete pass.
    pub fn rebalance_hint(&mut self, batch: u32) -> Result<()> {
        self.request(&Message::RebalanceHint { batch })?;
        Ok(())
    }

    pub fn save(&mut self) -> Result<()> {
        self.request(&Message::Save)?;
        Ok(())
    }
}
