//! Binary portable pixmap I/O: P6 (RGB) and P5 (gray), maxval 255.
//!
//! The writer emits exactly "P6\n{w} {h}\n255\n" (or P5) followed by raw
//! bytes, so write -> read -> write is byte-identical. The reader is strict:
//! no comments, maxval must be 255, exactly one whitespace byte after the
//! header, and errors name the byte offset of the problem.

use super::Image;
use crate::error::{ArganError, Result};
use std::path::Path;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, what: &str) -> ArganError {
        ArganError::Data(format!("malformed pixmap at byte {}: {}", self.pos, what))
    }

    fn take(&mut self) -> Option<u8> {
        let b = self.bytes.get(self.pos).copied();
        if b.is_some() {
            self.pos += 1;
        }
        b
    }

    fn skip_whitespace(&mut self) -> Result<()> {
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(self.err("expected whitespace"));
        }
        Ok(())
    }

    fn read_number(&mut self) -> Result<usize> {
        let start = self.pos;
        let mut value: usize = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_digit() {
                value = value
                    .checked_mul(10)
                    .and_then(|v| v.checked_add((b - b'0') as usize))
                    .ok_or_else(|| self.err("numeric field overflows"))?;
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(self.err("expected a decimal number"));
        }
        Ok(value)
    }
}

/// Parse a P6/P5 image from raw bytes.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic0 = cur.take().ok_or_else(|| cur.err("empty file"))?;
    let magic1 = cur.take().ok_or_else(|| cur.err("truncated magic"))?;
    let channels = match (magic0, magic1) {
        (b'P', b'6') => 3usize,
        (b'P', b'5') => 1usize,
        _ => {
            cur.pos = 0;
            return Err(cur.err("magic must be P6 or P5"));
        }
    };
    cur.skip_whitespace()?;
    let width = cur.read_number()?;
    cur.skip_whitespace()?;
    let height = cur.read_number()?;
    cur.skip_whitespace()?;
    let maxval_pos = cur.pos;
    let maxval = cur.read_number()?;
    if maxval != 255 {
        cur.pos = maxval_pos;
        return Err(cur.err(&format!("maxval must be 255, got {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match cur.take() {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => {
            cur.pos -= 1;
            return Err(cur.err("expected a single whitespace byte after maxval"));
        }
    }
    if width == 0 || height == 0 {
        return Err(cur.err("zero-sized image"));
    }
    let expected = width * height * channels;
    let available = bytes.len() - cur.pos;
    if available != expected {
        return Err(cur.err(&format!(
            "payload has {available} bytes, expected {expected}"
        )));
    }
    let pixels: Vec<f32> = bytes[cur.pos..]
        .iter()
        .map(|&b| b as f32 / 255.0)
        .collect();
    Ok(Image {
        width,
        height,
        channels,
        pixels,
    })
}

/// Serialize to P6/P5 bytes; values are rounded onto the 8-bit grid.
pub fn encode_image(img: &Image) -> Vec<u8> {
    let magic = if img.channels == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(
        img.pixels
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8),
    );
    out
}

pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| {
        ArganError::Data(format!("cannot read image {}: {e}", path.display()))
    })?;
    decode_image(&bytes).map_err(|e| match e {
        ArganError::Data(msg) => ArganError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    std::fs::write(path, encode_image(img)).map_err(|e| {
        ArganError::Data(format!("cannot write image {}: {e}", path.display()))
    })?;
    Ok(())
}
