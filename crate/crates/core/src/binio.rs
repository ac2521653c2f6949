//! Little-endian building blocks for the versioned binary checkpoints.
//!
//! Every container starts with a 4-byte magic and a `u32` version. Strings
//! are `u32` byte length + UTF-8; float blocks are `u64` count + raw values.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported version {found} for {what} (supported: {supported})")]
    Version {
        what: &'static str,
        found: u32,
        supported: u32,
    },
    #[error("corrupt container: {0}")]
    Corrupt(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

/// Upper bound on any single length prefix, to reject garbage early.
const MAX_LEN: u64 = 1 << 34;

pub fn write_header<W: Write>(w: &mut W, magic: &[u8; 4], version: u32) -> FormatResult<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(version)?;
    Ok(())
}

pub fn read_header<R: Read>(
    r: &mut R,
    magic: &[u8; 4],
    what: &'static str,
    supported: u32,
) -> FormatResult<u32> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found)?;
    if &found != magic {
        return Err(FormatError::BadMagic {
            expected: *magic,
            found,
        });
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != supported {
        return Err(FormatError::Version {
            what,
            found: version,
            supported,
        });
    }
    Ok(version)
}

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> FormatResult<()> {
    Ok(w.write_u32::<LittleEndian>(v)?)
}

pub fn read_u32<R: Read>(r: &mut R) -> FormatResult<u32> {
    Ok(r.read_u32::<LittleEndian>()?)
}

pub fn write_u64<W: Write>(w: &mut W, v: u64) -> FormatResult<()> {
    Ok(w.write_u64::<LittleEndian>(v)?)
}

pub fn read_u64<R: Read>(r: &mut R) -> FormatResult<u64> {
    Ok(r.read_u64::<LittleEndian>()?)
}

pub fn read_len<R: Read>(r: &mut R) -> FormatResult<usize> {
    let n = read_u64(r)?;
    if n > MAX_LEN {
        return Err(FormatError::Corrupt(format!("length prefix {n} too large")));
    }
    Ok(n as usize)
}

pub fn write_f64<W: Write>(w: &mut W, v: f64) -> FormatResult<()> {
    Ok(w.write_f64::<LittleEndian>(v)?)
}

pub fn read_f64<R: Read>(r: &mut R) -> FormatResult<f64> {
    Ok(r.read_f64::<LittleEndian>()?)
}

pub fn write_str<W: Write>(w: &mut W, s: &str) -> FormatResult<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_str<R: Read>(r: &mut R) -> FormatResult<String> {
    let n = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| FormatError::Corrupt(format!("invalid utf-8: {e}")))
}

pub fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> FormatResult<()> {
    write_u64(w, xs.len() as u64)?;
    for &x in xs {
        w.write_f64::<LittleEndian>(x)?;
    }
    Ok(())
}

pub fn read_f64s<R: Read>(r: &mut R) -> FormatResult<Vec<f64>> {
    let n = read_len(r)?;
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out)?;
    Ok(out)
}

pub fn write_f32s<W: Write>(w: &mut W, xs: &[f32]) -> FormatResult<()> {
    write_u64(w, xs.len() as u64)?;
    for &x in xs {
        w.write_f32::<LittleEndian>(x)?;
    }
    Ok(())
}

pub fn read_f32s<R: Read>(r: &mut R) -> FormatResult<Vec<f32>> {
    let n = read_len(r)?;
    let mut out = vec![0.0; n];
    r.read_f32_into::<LittleEndian>(&mut out)?;
    Ok(out)
}

pub fn write_u32s<W: Write>(w: &mut W, xs: &[u32]) -> FormatResult<()> {
    write_u64(w, xs.len() as u64)?;
    for &x in xs {
        w.write_u32::<LittleEndian>(x)?;
    }
    Ok(())
}

pub fn read_u32s<R: Read>(r: &mut R) -> FormatResult<Vec<u32>> {
    let n = read_len(r)?;
    let mut out = vec![0u32; n];
    r.read_u32_into::<LittleEndian>(&mut out)?;
    Ok(out)
}

pub fn write_strs<W: Write>(w: &mut W, xs: &[String]) -> FormatResult<()> {
    write_u64(w, xs.len() as u64)?;
    for s in xs {
        write_str(w, s)?;
    }
    Ok(())
}

pub fn read_strs<R: Read>(r: &mut R) -> FormatResult<Vec<String>> {
    let n = read_len(r)?;
    (0..n).map(|_| read_str(r)).collect()
}
