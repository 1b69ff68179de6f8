//! Probabilistic authenticated encryption of cell plaintexts and the keyed
//! PRF used by the deterministic bucket transform.
//!
//! Cells are AES-GCM ciphertexts of an 8-byte big-endian plaintext. The wire
//! layout is `nonce (12) || body (8) || tag (16)`, so every cell is exactly
//! [`Ciphertext::LEN`] bytes regardless of the value it carries.

use std::fmt;

use aes_gcm::aead::{AeadInPlace, KeyInit};
use aes_gcm::{Aes128Gcm, Aes256Gcm, Nonce, Tag};
use hmac::{Hmac, Mac};
use rand::rngs::OsRng;
use rand::RngCore;
use sha2::Sha256;

use crate::domain::Domain;
use crate::error::{Error, Result};

pub const NONCE_LEN: usize = 12;
pub const BODY_LEN: usize = 8;
pub const TAG_LEN: usize = 16;

/// Client-only key material. Never handed to a store or a transport.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    bytes: Vec<u8>,
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretKey({} bits)", self.bits())
    }
}

impl SecretKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match bytes.len() {
            16 | 32 => Ok(Self {
                bytes: bytes.to_vec(),
            }),
            n => Err(Error::UnsupportedSecurityParam(n as u32 * 8)),
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bits(&self) -> u32 {
        self.bytes.len() as u32 * 8
    }
}

/// Draws a fresh key from the operating system's CSPRNG.
pub fn keygen(security_param: u32) -> Result<SecretKey> {
    let len = match security_param {
        128 => 16,
        256 => 32,
        other => return Err(Error::UnsupportedSecurityParam(other)),
    };
    let mut bytes = vec![0u8; len];
    OsRng.fill_bytes(&mut bytes);
    Ok(SecretKey { bytes })
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ciphertext {
    pub nonce: [u8; NONCE_LEN],
    pub body: [u8; BODY_LEN],
    pub tag: [u8; TAG_LEN],
}

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ciphertext(")?;
        for b in &self.nonce[..4] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

impl Ciphertext {
    pub const LEN: usize = NONCE_LEN + BODY_LEN + TAG_LEN;

    pub fn to_bytes(&self) -> [u8; Self::LEN] {
        let mut out = [0u8; Self::LEN];
        out[..NONCE_LEN].copy_from_slice(&self.nonce);
        out[NONCE_LEN..NONCE_LEN + BODY_LEN].copy_from_slice(&self.body);
        out[NONCE_LEN + BODY_LEN..].copy_from_slice(&self.tag);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::LEN {
            return Err(Error::MalformedCiphertext {
                expected: Self::LEN,
                actual: bytes.len(),
            });
        }
        let mut ct = Ciphertext {
            nonce: [0; NONCE_LEN],
            body: [0; BODY_LEN],
            tag: [0; TAG_LEN],
        };
        ct.nonce.copy_from_slice(&bytes[..NONCE_LEN]);
        ct.body.copy_from_slice(&bytes[NONCE_LEN..NONCE_LEN + BODY_LEN]);
        ct.tag.copy_from_slice(&bytes[NONCE_LEN + BODY_LEN..]);
        Ok(ct)
    }
}

enum Aead {
    Aes128(Box<Aes128Gcm>),
    Aes256(Box<Aes256Gcm>),
}

impl Aead {
    fn new(key: &SecretKey) -> Self {
        match key.bytes.len() {
            16 => Aead::Aes128(Box::new(Aes128Gcm::new_from_slice(&key.bytes).unwrap())),
            _ => Aead::Aes256(Box::new(Aes256Gcm::new_from_slice(&key.bytes).unwrap())),
        }
    }
}

/// Keyed cipher instance; cheaper than [`encrypt`]/[`decrypt`] when many cells
/// are processed under the same key.
pub struct CellCipher {
    aead: Aead,
    domain: Domain,
}

impl CellCipher {
    pub fn new(key: &SecretKey, domain: Domain) -> Self {
        Self {
            aead: Aead::new(key),
            domain,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn encrypt(&self, m: u64) -> Result<Ciphertext> {
        self.domain.check(m)?;
        let mut nonce = [0u8; NONCE_LEN];
        rand::thread_rng().fill_bytes(&mut nonce);
        let mut body = m.to_be_bytes();
        let n = Nonce::from_slice(&nonce);
        let tag = match &self.aead {
            Aead::Aes128(c) => c.encrypt_in_place_detached(n, b"", &mut body),
            Aead::Aes256(c) => c.encrypt_in_place_detached(n, b"", &mut body),
        }
        .expect("8-byte message is within AES-GCM limits");
        Ok(Ciphertext {
            nonce,
            body,
            tag: tag.into(),
        })
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<u64> {
        let mut body = c.body;
        let n = Nonce::from_slice(&c.nonce);
        let tag = Tag::from_slice(&c.tag);
        match &self.aead {
            Aead::Aes128(a) => a.decrypt_in_place_detached(n, b"", &mut body, tag),
            Aead::Aes256(a) => a.decrypt_in_place_detached(n, b"", &mut body, tag),
        }
        .map_err(|_| Error::Authentication)?;
        let m = u64::from_be_bytes(body);
        // A valid tag over an out-of-domain value means the key was used with
        // a different domain; treat it as corruption.
        self.domain.check(m).map_err(|_| Error::Authentication)?;
        Ok(m)
    }
}

pub fn encrypt(key: &SecretKey, domain: Domain, m: u64) -> Result<Ciphertext> {
    CellCipher::new(key, domain).encrypt(m)
}

pub fn decrypt(key: &SecretKey, domain: Domain, c: &Ciphertext) -> Result<u64> {
    CellCipher::new(key, domain).decrypt(c)
}

/// HMAC-SHA256 of the keyword, reduced into `0..range`.
pub fn prf(key: &SecretKey, keyword: u64, range: u64) -> Result<u64> {
    if range == 0 {
        return Err(Error::EmptyRange);
    }
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(&key.bytes).expect("hmac takes any key");
    mac.update(b"eseds-prf");
    mac.update(&keyword.to_be_bytes());
    let out = mac.finalize().into_bytes();
    let mut wide = [0u8; 16];
    wide.copy_from_slice(&out[..16]);
    Ok((u128::from_be_bytes(wide) % range as u128) as u64)
}
