//! Versioned little-endian binary container shared by all binary artifacts.
//!
//! Layout: 8-byte magic, `u32` version, `u64` payload length, payload, then
//! the SHA-256 of the payload. Inside the payload every number is
//! little-endian; strings are a `u32` byte length followed by UTF-8.

use std::io::{Cursor, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not a {expected} file (bad magic)")]
    BadMagic { expected: &'static str },
    #[error("unsupported {kind} version {found}")]
    UnsupportedVersion { kind: &'static str, found: u32 },
    #[error("file is truncated")]
    Truncated,
    #[error("payload digest mismatch: file is corrupted")]
    DigestMismatch,
    #[error("invalid contents: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

/// Accumulates a payload in memory.
#[derive(Debug, Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.write_u32::<LittleEndian>(v).expect("vec write");
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.write_u64::<LittleEndian>(v).expect("vec write");
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.write_f64::<LittleEndian>(v).expect("vec write");
        self
    }

    pub fn f64s(&mut self, v: &[f64]) -> &mut Self {
        for x in v {
            self.f64(*x);
        }
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
        self
    }

    pub fn strs(&mut self, v: &[String]) -> &mut Self {
        self.u32(v.len() as u32);
        for s in v {
            self.str(s);
        }
        self
    }

    /// Writes the framed container.
    pub fn finish<W: Write>(&self, mut w: W, magic: &[u8; 8], version: u32) -> Result<()> {
        w.write_all(magic)?;
        w.write_u32::<LittleEndian>(version)?;
        w.write_u64::<LittleEndian>(self.buf.len() as u64)?;
        w.write_all(&self.buf)?;
        w.write_all(&Sha256::digest(&self.buf))?;
        Ok(())
    }

    pub fn to_bytes(&self, magic: &[u8; 8], version: u32) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.buf.len() + 52);
        self.finish(&mut out, magic, version).expect("vec write");
        out
    }
}

/// Reads a payload back; every accessor fails with [`FormatError::Truncated`]
/// past the end.
pub struct Decoder {
    cur: Cursor<Vec<u8>>,
}

fn eof(e: std::io::Error) -> FormatError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        FormatError::Truncated
    } else {
        FormatError::Io(e)
    }
}

impl Decoder {
    /// Validates the frame and returns the decoder plus the stored version.
    pub fn open<R: Read>(mut r: R, magic: &[u8; 8], kind: &'static str, max_version: u32) -> Result<(Self, u32)> {
        let mut m = [0u8; 8];
        r.read_exact(&mut m).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => FormatError::BadMagic { expected: kind },
            _ => FormatError::Io(e),
        })?;
        if &m != magic {
            return Err(FormatError::BadMagic { expected: kind });
        }
        let version = r.read_u32::<LittleEndian>().map_err(eof)?;
        if version == 0 || version > max_version {
            return Err(FormatError::UnsupportedVersion { kind, found: version });
        }
        let len = r.read_u64::<LittleEndian>().map_err(eof)?;
        let mut buf = Vec::new();
        r.by_ref().take(len).read_to_end(&mut buf)?;
        if buf.len() as u64 != len {
            return Err(FormatError::Truncated);
        }
        let mut digest = [0u8; 32];
        r.read_exact(&mut digest).map_err(eof)?;
        if Sha256::digest(&buf).as_slice() != digest {
            return Err(FormatError::DigestMismatch);
        }
        Ok((Self { cur: Cursor::new(buf) }, version))
    }

    pub fn u8(&mut self) -> Result<u8> {
        self.cur.read_u8().map_err(eof)
    }

    pub fn u32(&mut self) -> Result<u32> {
        self.cur.read_u32::<LittleEndian>().map_err(eof)
    }

    pub fn u64(&mut self) -> Result<u64> {
        self.cur.read_u64::<LittleEndian>().map_err(eof)
    }

    pub fn f64(&mut self) -> Result<f64> {
        self.cur.read_f64::<LittleEndian>().map_err(eof)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        self.check_remaining(n.saturating_mul(8))?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        self.check_remaining(n)?;
        let mut b = vec![0u8; n];
        self.cur.read_exact(&mut b).map_err(eof)?;
        String::from_utf8(b).map_err(|_| FormatError::Invalid("string is not UTF-8".into()))
    }

    pub fn strs(&mut self) -> Result<Vec<String>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.str()).collect()
    }

    fn check_remaining(&self, n: usize) -> Result<()> {
        let left = self.cur.get_ref().len() as u64 - self.cur.position();
        if (n as u64) > left {
            Err(FormatError::Truncated)
        } else {
            Ok(())
        }
    }

    /// Errors if unread bytes remain.
    pub fn done(&self) -> Result<()> {
        if self.cur.position() as usize == self.cur.get_ref().len() {
            Ok(())
        } else {
            Err(FormatError::Invalid("trailing bytes in payload".into()))
        }
    }
}
