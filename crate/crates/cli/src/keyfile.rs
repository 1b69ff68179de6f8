//! Client key file: the secret key plus the parameters a client needs to talk
//! to a store (plaintext domain and store mode). Kept apart from the store
//! file, which the server owns.

use std::fs;
use std::io::Write;
use std::path::Path;

use eseds_core::cipher::SecretKey;
use eseds_core::domain::Domain;
use eseds_core::error::Error;
use eseds_core::store::StoreMode;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"ESEDSKEY";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyFile {
    pub key: SecretKey,
    pub domain_bits: u8,
    pub mode: StoreMode,
    /// Sparse index width; 0 for dense stores.
    pub index_bits: u16,
}

impl KeyFile {
    pub fn domain(&self) -> Result<Domain> {
        Ok(Domain::with_bits(self.domain_bits as u32)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.key.as_bytes().len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.domain_bits);
        out.push(match self.mode {
            StoreMode::Dense => 0,
            StoreMode::Decoupled => 1,
        });
        out.extend_from_slice(&self.index_bits.to_le_bytes());
        out.push(self.key.as_bytes().len() as u8);
        out.extend_from_slice(self.key.as_bytes());
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let bad = |why: &str| CliError::Core(Error::Format(format!("key file: {why}")));
        if buf.len() < 15 || &buf[..8] != MAGIC {
            return Err(bad("bad magic"));
        }
        if u16::from_le_bytes([buf[8], buf[9]]) != VERSION {
            return Err(bad("unsupported version"));
        }
        let domain_bits = buf[10];
        let mode = match buf[11] {
            0 => StoreMode::Dense,
            1 => StoreMode::Decoupled,
            _ => return Err(bad("unknown mode")),
        };
        let index_bits = u16::from_le_bytes([buf[12], buf[13]]);
        let len = buf[14] as usize;
        if buf.len() != 15 + len {
            return Err(bad("wrong length"));
        }
        let key = SecretKey::from_bytes(&buf[15..])?;
        let kf = Self {
            key,
            domain_bits,
            mode,
            index_bits,
        };
        kf.domain()?;
        Ok(kf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut opts = fs::OpenOptions::new();
        opts.write(true).create_new(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(0o600);
        }
        let mut f = opts.open(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                CliError::Usage(format!("{} already exists", path.display()))
            } else {
                e.into()
            }
        })?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use eseds_core::cipher::keygen;

    #[test]
    fn round_trip_and_rejects() {
        let kf = KeyFile {
            key: keygen(256).unwrap(),
            domain_bits: 32,
            mode: StoreMode::Decoupled,
            index_bits: 64,
        };
        let bytes = kf.to_bytes();
        assert_eq!(KeyFile::from_bytes(&bytes).unwrap(), kf);
        assert!(KeyFile::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(KeyFile::from_bytes(&wrong).is_err());
        let mut wide = bytes;
        wide[10] = 64;
        assert!(KeyFile::from_bytes(&wide).is_err());
    }
}
