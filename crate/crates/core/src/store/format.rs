//! Shared pieces of the on-disk layout. All integers are little-endian except
//! sparse indices, which are big-endian and `domain_bits / 8` bytes wide.

use std::io::{Read, Write};

use crate::cipher::Ciphertext;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"ESEDS\0";
pub const VERSION: u16 = 1;

pub const MODE_DENSE: u8 = 0;
pub const MODE_DECOUPLED: u8 = 1;
pub const MODE_DET: u8 = 2;
pub const MODE_OPE: u8 = 3;
pub const MODE_FHOPE: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub mode: u8,
    pub domain_bits: u16,
    pub count: u64,
}

impl Header {
    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.mode])?;
        w.write_all(&self.domain_bits.to_le_bytes())?;
        w.write_all(&self.count.to_le_bytes())?;
        Ok(())
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self> {
        let magic = r.take(MAGIC.len())?;
        if magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        Ok(Header {
            mode: r.u8()?,
            domain_bits: r.u16()?,
            count: r.u64()?,
        })
    }
}

pub fn write_ciphertext(w: &mut impl Write, c: &Ciphertext) -> Result<()> {
    w.write_all(&(Ciphertext::LEN as u32).to_le_bytes())?;
    w.write_all(&c.to_bytes())?;
    Ok(())
}

pub fn read_all(source: &mut impl Read) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    source.read_to_end(&mut buf)?;
    Ok(buf)
}

/// Bounds-checked cursor over a fully buffered file.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format("truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn ciphertext(&mut self) -> Result<Ciphertext> {
        let len = self.u32()? as usize;
        if len != Ciphertext::LEN {
            return Err(Error::Format(format!("ciphertext length {len}")));
        }
        Ciphertext::from_bytes(self.take(len)?)
    }

    /// Upper bound for pre-allocation so a corrupt count cannot exhaust memory.
    pub fn capacity_hint(&self, count: u64, min_record: usize) -> usize {
        let left = (self.buf.len() - self.pos) / min_record.max(1);
        (count as usize).min(left)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
