//! Checkpoint binary format.
//!
//! Layout: magic "ARGN", format version u32 LE, config snapshot
//! (u32 length + the key=value text), then each named tensor as
//! (name_len u32, utf-8 name, ndim u32, dims u32 x ndim, f32 LE payload)
//! until end of file. Save -> load -> save is byte-identical.

use crate::config::ArganConfig;
use crate::error::{ArganError, Result};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"ARGN";
pub const VERSION: u32 = 1;

/// One serialized tensor: name, shape, row-major f32 data.
pub type NamedTensor = (String, Vec<usize>, Vec<f32>);

pub fn encode_checkpoint(cfg: &ArganConfig, tensors: &[NamedTensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let cfg_text = cfg.to_text();
    out.extend_from_slice(&(cfg_text.len() as u32).to_le_bytes());
    out.extend_from_slice(cfg_text.as_bytes());
    for (name, shape, data) in tensors {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn need(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(ArganError::Checkpoint(format!(
                "truncated at byte {}: {what} needs {n} bytes, {} remain",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.need(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ArganConfig, Vec<NamedTensor>)> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.need(4, "magic")?;
    if magic != MAGIC {
        return Err(ArganError::Checkpoint(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(ArganError::Checkpoint(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let cfg_len = r.u32("config length")? as usize;
    let cfg_bytes = r.need(cfg_len, "config text")?;
    let cfg_text = std::str::from_utf8(cfg_bytes)
        .map_err(|e| ArganError::Checkpoint(format!("config text is not utf-8: {e}")))?;
    let cfg = ArganConfig::from_text(cfg_text)?;

    let mut tensors = Vec::new();
    while r.pos < bytes.len() {
        let name_len = r.u32("tensor name length")? as usize;
        let name_bytes = r.need(name_len, "tensor name")?;
        let name = std::str::from_utf8(name_bytes)
            .map_err(|e| ArganError::Checkpoint(format!("tensor name is not utf-8: {e}")))?
            .to_string();
        let ndim = r.u32(&format!("ndim of {name}"))? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32(&format!("dims of {name}"))? as usize);
        }
        let numel: usize = shape.iter().product();
        let payload = r.need(numel * 4, &format!("payload of {name}"))?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push((name, shape, data));
    }
    Ok((cfg, tensors))
}

pub fn save_checkpoint(path: &Path, cfg: &ArganConfig, tensors: &[NamedTensor]) -> Result<()> {
    std::fs::write(path, encode_checkpoint(cfg, tensors)).map_err(|e| {
        ArganError::Checkpoint(format!("cannot write {}: {e}", path.display()))
    })
}

pub fn load_checkpoint(path: &Path) -> Result<(ArganConfig, Vec<NamedTensor>)> {
    let bytes = std::fs::read(path).map_err(|e| {
        ArganError::Checkpoint(format!("cannot read {}: {e}", path.display()))
    })?;
    decode_checkpoint(&bytes)
}
