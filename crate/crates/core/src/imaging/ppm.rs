//! Binary PPM (`P6`, maxval 255) reader and writer.
//!
//! The reader accepts any whitespace between header fields and `#` comments
//! up to the maxval. Exactly one whitespace byte separates the maxval from
//! the raster. The writer always emits the canonical header
//! `P6\n<width> <height>\n255\n`, so files in that form round-trip byte for
//! byte.

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{Image, CHANNELS};

pub const MAGIC: &[u8; 2] = b"P6";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PpmError {
    #[error("unsupported magic {0:?}, expected \"P6\"")]
    UnsupportedMagic(String),
    #[error("malformed PPM header: {0}")]
    MalformedHeader(&'static str),
    #[error("unsupported maxval {0}, only 255 is accepted")]
    UnsupportedMaxval(u64),
    #[error("truncated pixel data: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.buf.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.buf.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &'static str) -> Result<u64, PpmError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.buf.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PpmError::MalformedHeader(what));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PpmError::MalformedHeader(what))
    }
}

/// Decodes a binary PPM file into an [`Image`].
pub fn decode(bytes: &[u8]) -> Result<Image, PpmError> {
    if bytes.len() < 2 {
        return Err(PpmError::MalformedHeader("missing magic"));
    }
    if &bytes[..2] != MAGIC {
        return Err(PpmError::UnsupportedMagic(
            String::from_utf8_lossy(&bytes[..2]).into_owned(),
        ));
    }
    let mut cur = Cursor { buf: bytes, pos: 2 };
    if !cur
        .buf
        .get(cur.pos)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return Err(PpmError::MalformedHeader("missing whitespace after magic"));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PpmError::MalformedHeader("zero image dimension"));
    }
    if maxval != 255 {
        return Err(PpmError::UnsupportedMaxval(maxval));
    }
    match cur.buf.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(PpmError::MalformedHeader("missing whitespace after maxval")),
    }

    let expected = usize::try_from(width)
        .ok()
        .zip(usize::try_from(height).ok())
        .and_then(|(w, h)| w.checked_mul(h))
        .and_then(|n| n.checked_mul(CHANNELS))
        .ok_or(PpmError::MalformedHeader("image dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(PpmError::Truncated {
            expected,
            actual: payload.len(),
        });
    }
    Ok(Image {
        width: width as usize,
        height: height as usize,
        data: payload[..expected].to_vec(),
    })
}

/// Encodes an image with the canonical `P6` header.
pub fn encode(img: &Image) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.data());
    out
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("failed to read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Decode { path: String, source: PpmError },
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Image, ReadError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| ReadError::Io {
            path: path.display().to_string(),
            source,
        })?;
    decode(&bytes).map_err(|source| ReadError::Decode {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: impl AsRef<Path>, img: &Image) -> io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(img))?;
    f.flush()
}
