//! Flat binary cache shared by mode tensors and split kernels.
//!
//! Layout (little endian): magic, version u32, variant u8, N u32,
//! kernel-tag hash u64, tol f64, entry count u64, payload, checksum u64.
//! The checksum is the leading 8 bytes of the SHA-256 of everything before it.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"GZSPMODE";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 1 + 4 + 8 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Header {
    pub variant: u8,
    pub n: u32,
    pub tag_hash: u64,
    pub tol: f64,
    pub count: u64,
}

/// First 8 bytes of SHA-256 of `tag`.
pub fn tag_hash(tag: &str) -> u64 {
    let d = Sha256::digest(tag.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn checksum(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

pub(crate) fn write(path: &Path, h: &Header, payload: &[u8]) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + payload.len() + 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(h.variant);
    buf.extend_from_slice(&h.n.to_le_bytes());
    buf.extend_from_slice(&h.tag_hash.to_le_bytes());
    buf.extend_from_slice(&h.tol.to_le_bytes());
    buf.extend_from_slice(&h.count.to_le_bytes());
    buf.extend_from_slice(payload);
    let c = checksum(&buf);
    buf.extend_from_slice(&c.to_le_bytes());
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub(crate) fn read(path: &Path) -> Result<(Header, Vec<u8>)> {
    let buf = fs::read(path)?;
    if buf.len() < HEADER_LEN + 8 {
        return Err(Error::Cache(format!("{}: truncated file", path.display())));
    }
    if &buf[..8] != MAGIC {
        return Err(Error::Cache(format!("{}: bad magic", path.display())));
    }
    let (body, tail) = buf.split_at(buf.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    if stored != checksum(body) {
        return Err(Error::Cache(format!("{}: checksum mismatch", path.display())));
    }
    let u32_at = |o: usize| u32::from_le_bytes(body[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(body[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(8);
    if version != VERSION {
        return Err(Error::Cache(format!("{}: unsupported version {version}", path.display())));
    }
    let h = Header {
        variant: body[12],
        n: u32_at(13),
        tag_hash: u64_at(17),
        tol: f64::from_bits(u64_at(25)),
        count: u64_at(33),
    };
    Ok((h, body[HEADER_LEN..].to_vec()))
}

pub(crate) fn check(h: &Header, expected: &Header) -> Result<()> {
    if h.variant != expected.variant {
        return Err(Error::Cache(format!("variant {} does not match {}", h.variant, expected.variant)));
    }
    if h.n != expected.n {
        return Err(Error::Cache(format!("N = {} does not match {}", h.n, expected.n)));
    }
    if h.tag_hash != expected.tag_hash {
        return Err(Error::Cache("kernel tag does not match".into()));
    }
    if h.tol.to_bits() != expected.tol.to_bits() {
        return Err(Error::Cache(format!("tolerance {:e} does not match {:e}", h.tol, expected.tol)));
    }
    Ok(())
}

pub(crate) fn f64s(bytes: &[u8]) -> impl Iterator<Item = f64> + '_ {
    bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
}
