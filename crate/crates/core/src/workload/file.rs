//! Binary Gaussian container.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `GSFC`               |
//! | 4      | 2    | format version (1)         |
//! | 6      | 8    | record count               |
//! | 14     | 2    | flags (reserved, 0)        |
//! | 16     | 236n | records                    |
//!
//! A record is 59 `f32`: position (3), rotation `w x y z` (4), scale (3),
//! SH coefficients (48, interleaved per channel), opacity (1).

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::kernels::{Gaussian, KernelError, SH_LEN};

pub const MAGIC: [u8; 4] = *b"GSFC";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 16;
pub const RECORD_BYTES: usize = Gaussian::RECORD_BYTES;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("header truncated at byte {actual}, expected {HEADER_BYTES} bytes")]
    TruncatedHeader { actual: usize },
    #[error("bad magic {found:?} at byte 0")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported format version {version} at byte 4")]
    UnsupportedVersion { version: u16 },
    #[error("record count {count} at byte 6 does not fit in memory")]
    CountOverflow { count: u64 },
    #[error("payload length mismatch at byte {HEADER_BYTES}: expected {expected} bytes, found {actual}")]
    PayloadLength { expected: u64, actual: u64 },
}

/// One record exactly as stored; no validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianRecord {
    pub position: [f32; 3],
    pub rotation: [f32; 4],
    pub scale: [f32; 3],
    pub sh: [f32; SH_LEN],
    pub opacity: f32,
}

impl GaussianRecord {
    pub fn to_gaussian(&self) -> Result<Gaussian, KernelError> {
        Gaussian::new(self.position, self.rotation, self.scale, self.sh, self.opacity)
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        let values = self
            .position
            .iter()
            .chain(&self.rotation)
            .chain(&self.scale)
            .chain(&self.sh)
            .chain(std::iter::once(&self.opacity));
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn read_from(bytes: &[u8]) -> Self {
        debug_assert_eq!(bytes.len(), RECORD_BYTES);
        let mut values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        let mut take = || values.next().expect("record holds 59 values");
        Self {
            position: std::array::from_fn(|_| take()),
            rotation: std::array::from_fn(|_| take()),
            scale: std::array::from_fn(|_| take()),
            sh: std::array::from_fn(|_| take()),
            opacity: take(),
        }
    }
}

impl From<&Gaussian> for GaussianRecord {
    fn from(g: &Gaussian) -> Self {
        Self { position: g.position(), rotation: g.rotation(), scale: g.scale(), sh: *g.sh(), opacity: g.opacity() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GaussianFile {
    pub flags: u16,
    pub records: Vec<GaussianRecord>,
}

impl GaussianFile {
    pub fn new(records: Vec<GaussianRecord>) -> Self {
        Self { flags: 0, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Byte offset of record `index` in the encoded file.
    pub fn record_offset(index: usize) -> u64 {
        (HEADER_BYTES + index * RECORD_BYTES) as u64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + self.records.len() * RECORD_BYTES);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.flags.to_le_bytes());
        for r in &self.records {
            r.write_to(&mut out);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FileError> {
        if bytes.len() < HEADER_BYTES {
            return Err(FileError::TruncatedHeader { actual: bytes.len() });
        }
        let found: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
        if found != MAGIC {
            return Err(FileError::BadMagic { found });
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(FileError::UnsupportedVersion { version });
        }
        let count = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
        let flags = u16::from_le_bytes([bytes[14], bytes[15]]);
        let payload = &bytes[HEADER_BYTES..];
        let expected = count.checked_mul(RECORD_BYTES as u64).ok_or(FileError::CountOverflow { count })?;
        if payload.len() as u64 != expected {
            return Err(FileError::PayloadLength { expected, actual: payload.len() as u64 });
        }
        let records = payload.chunks_exact(RECORD_BYTES).map(GaussianRecord::read_from).collect();
        Ok(Self { flags, records })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, FileError> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), FileError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}
