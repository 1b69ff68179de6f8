//! Wire codec. A frame is `u32 length (big-endian) || u8 opcode || payload`,
//! where `length` counts the opcode and payload bytes. Integers in payloads are
//! big-endian; byte strings are prefixed by a `u32` length.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAX_FRAME: usize = 16 * 1024 * 1024;
/// Rank sentinel for `INSERT_BETWEEN` ends.
pub const SENTINEL: u64 = u64::MAX;
pub const SPARSE_WIRE_LEN: usize = 32;

#[repr(u8)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Opcode {
    GetCell = 0x01,
    InsertAt = 0x02,
    InsertBetween = 0x03,
    Length = 0x04,
    RebalanceHint = 0x05,
    Save = 0x06,
    Error = 0x80,
    Cell = 0x81,
    Ok = 0x82,
    Len = 0x83,
}

impl Opcode {
    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => Opcode::GetCell,
            0x02 => Opcode::InsertAt,
            0x03 => Opcode::InsertBetween,
            0x04 => Opcode::Length,
            0x05 => Opcode::RebalanceHint,
            0x06 => Opcode::Save,
            0x80 => Opcode::Error,
            0x81 => Opcode::Cell,
            0x82 => Opcode::Ok,
            0x83 => Opcode::Len,
            _ => return None,
        })
    }
}

#[repr(u16)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCode {
    OutOfRange = 1,
    WrongMode = 2,
    Malformed = 3,
    Collision = 4,
    Exhausted = 5,
    Io = 6,
    Internal = 7,
}

impl ErrorCode {
    pub fn from_u16(v: u16) -> Self {
        match v {
            1 => ErrorCode::OutOfRange,
            2 => ErrorCode::WrongMode,
            3 => ErrorCode::Malformed,
            4 => ErrorCode::Collision,
            5 => ErrorCode::Exhausted,
            6 => ErrorCode::Io,
            _ => ErrorCode::Internal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    GetCell { index: u64 },
    InsertAt { index: u64, cell: Vec<u8> },
    /// Ranks of the neighbours; [`SENTINEL`] marks either end.
    InsertBetween { left: u64, right: u64, cell: Vec<u8> },
    Length,
    /// `batch == 0` asks for a complete pass.
    RebalanceHint { batch: u32 },
    Save,
    Error { code: ErrorCode, message: String },
    Cell { cell: Vec<u8> },
    /// Carries the sparse index chosen by `INSERT_BETWEEN`, otherwise empty.
    Ok { sparse: Option<[u8; SPARSE_WIRE_LEN]> },
    Len { n: u64 },
}

impl Message {
    pub fn opcode(&self) -> Opcode {
        match self {
            Message::GetCell { .. } => Opcode::GetCell,
            Message::InsertAt { .. } => Opcode::InsertAt,
            Message::InsertBetween { .. } => Opcode::InsertBetween,
            Message::Length => Opcode::Length,
            Message::RebalanceHint { .. } => Opcode::RebalanceHint,
            Message::Save => Opcode::Save,
            Message::Error { .. } => Opcode::Error,
            Message::Cell { .. } => Opcode::Cell,
            Message::Ok { .. } => Opcode::Ok,
            Message::Len { .. } => Opcode::Len,
        }
    }

    pub fn is_request(&self) -> bool {
        (self.opcode() as u8) < 0x80
    }

    /// The one success response paired with a request (`ERROR` is always
    /// possible as well).
    pub fn expected_response(&self) -> Option<Opcode> {
        Some(match self {
            Message::GetCell { .. } => Opcode::Cell,
            Message::InsertAt { .. }
            | Message::InsertBetween { .. }
            | Message::RebalanceHint { .. }
            | Message::Save => Opcode::Ok,
            Message::Length => Opcode::Len,
            _ => return None,
        })
    }

    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Message::Error {
            code,
            message: message.into(),
        }
    }
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_be_bytes());
    out.extend_from_slice(b);
}

/// Serializes a full frame including the length prefix.
pub fn encode(msg: &Message) -> Vec<u8> {
    let mut out = vec![0u8; 4];
    out.push(msg.opcode() as u8);
    match msg {
        Message::GetCell { index } => out.extend_from_slice(&index.to_be_bytes()),
        Message::InsertAt { index, cell } => {
            out.extend_from_slice(&index.to_be_bytes());
            put_bytes(&mut out, cell);
        }
        Message::InsertBetween { left, right, cell } => {
            out.extend_from_slice(&left.to_be_bytes());
            out.extend_from_slice(&right.to_be_bytes());
            put_bytes(&mut out, cell);
        }
        Message::Length | Message::Save => {}
        Message::RebalanceHint { batch } => out.extend_from_slice(&batch.to_be_bytes()),
        Message::Error { code, message } => {
            out.extend_from_slice(&(*code as u16).to_be_bytes());
            put_bytes(&mut out, message.as_bytes());
        }
        Message::Cell { cell } => put_bytes(&mut out, cell),
        Message::Ok { sparse } => {
            if let Some(s) = sparse {
                out.extend_from_slice(s);
            }
        }
        Message::Len { n } => out.extend_from_slice(&n.to_be_bytes()),
    }
    let len = (out.len() - 4) as u32;
    out[..4].copy_from_slice(&len.to_be_bytes());
    out
}

struct Payload<'a> {
    buf: &'a [u8],
}

impl<'a> Payload<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Protocol("truncated payload".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<Vec<u8>> {
        let n = self.u32()? as usize;
        Ok(self.take(n)?.to_vec())
    }

    fn done(self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::Protocol(format!("{} trailing bytes", self.buf.len())))
        }
    }
}

/// Decodes the body of a frame (opcode and payload, without the prefix).
pub fn decode_body(body: &[u8]) -> Result<Message> {
    let (&op, rest) = body
        .split_first()
        .ok_or_else(|| Error::Protocol("empty frame".into()))?;
    let op = Opcode::from_u8(op).ok_or_else(|| Error::Protocol(format!("unknown opcode {op:#04x}")))?;
    let mut p = Payload { buf: rest };
    let msg = match op {
        Opcode::GetCell => Message::GetCell { index: p.u64()? },
        Opcode::InsertAt => Message::InsertAt {
            index: p.u64()?,
            cell: p.bytes()?,
        },
        Opcode::InsertBetween => Message::InsertBetween {
            left: p.u64()?,
            right: p.u64()?,
            cell: p.bytes()?,
        },
        Opcode::Length => Message::Length,
        Opcode::RebalanceHint => Message::RebalanceHint { batch: p.u32()? },
        Opcode::Save => Message::Save,
        Opcode::Error => {
            let code = ErrorCode::from_u16(p.u16()?);
            let message = String::from_utf8(p.bytes()?)
                .map_err(|_| Error::Protocol("error message is not utf-8".into()))?;
            Message::Error { code, message }
        }
        Opcode::Cell => Message::Cell { cell: p.bytes()? },
        Opcode::Ok => {
            if p.buf.is_empty() {
                Message::Ok { sparse: None }
            } else {
                Message::Ok {
                    sparse: Some(p.take(SPARSE_WIRE_LEN)?.try_into().unwrap()),
                }
            }
        }
        Opcode::Len => Message::Len { n: p.u64()? },
    };
    p.done()?;
    Ok(msg)
}

fn check_len(len: usize) -> Result<()> {
    if len > MAX_FRAME {
        return Err(Error::Protocol(format!("frame length {len} exceeds {MAX_FRAME}")));
    }
    if len == 0 {
        return Err(Error::Protocol("empty frame".into()));
    }
    Ok(())
}

/// Decodes exactly one frame; trailing or missing bytes are errors.
pub fn decode(frame: &[u8]) -> Result<Message> {
    if frame.len() < 4 {
        return Err(Error::Protocol("truncated length prefix".into()));
    }
    let len = u32::from_be_bytes(frame[..4].try_into().unwrap()) as usize;
    check_len(len)?;
    let body = &frame[4..];
    if body.len() != len {
        return Err(Error::Protocol(format!(
            "frame declares {len} bytes, has {}",
            body.len()
        )));
    }
    decode_body(body)
}

/// Reads one frame from a stream. `Ok(None)` on a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Vec<u8>>> {
    let mut prefix = [0u8; 4];
    match r.read_exact(&mut prefix) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(prefix) as usize;
    check_len(len)?;
    let mut frame = vec![0u8; 4 + len];
    frame[..4].copy_from_slice(&prefix);
    r.read_exact(&mut frame[4..])?;
    Ok(Some(frame))
}

pub fn write_frame(w: &mut impl Write, frame: &[u8]) -> Result<()> {
    w.write_all(frame)?;
    w.flush()?;
    Ok(())
}
