//! Debug dumps: `DIRF` feature maps and `DIRN` nearest-neighbor fields.
//!
//! `DIRF`: `"DIRF" | u32 version=1 | u32 layer | u32 h | u32 w | u32 c | f32[h*w*c]`,
//! values in channel-outer planar order.
//!
//! `DIRN`: `"DIRN" | u32 version=1 | u32 h | u32 w | u32 source_h | u32 source_w`,
//! then per query position in row-major order `i32 i_src | i32 j_src | f32 distance`.
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use crate::backbone::Reader;
use crate::error::{Error, Result};
use crate::nnf::NNField;
use crate::tensor::FeatureMap;

pub const FEATURE_MAGIC: &[u8; 4] = b"DIRF";
pub const FIELD_MAGIC: &[u8; 4] = b"DIRN";
pub const DUMP_VERSION: u32 = 1;

fn header(magic: &[u8; 4], fields: &[u32]) -> Vec<u8> {
    let mut out = magic.to_vec();
    out.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    for f in fields {
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}

fn open<'a>(bytes: &'a [u8], magic: &[u8; 4]) -> Result<Reader<'a>> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(Error::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != DUMP_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    Ok(r)
}

pub fn encode_feature_map(f: &FeatureMap) -> Vec<u8> {
    let mut out = header(FEATURE_MAGIC, &[f.layer(), f.height() as u32, f.width() as u32, f.channels() as u32]);
    for v in f.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_feature_map(bytes: &[u8]) -> Result<FeatureMap> {
    let mut r = open(bytes, FEATURE_MAGIC)?;
    let layer = r.u32()?;
    let (h, w, c) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let data = r.f32_vec(h * w * c)?;
    FeatureMap::new(layer, h, w, c, data)
}

pub fn encode_field(field: &NNField) -> Vec<u8> {
    let dims = [field.height(), field.width(), field.source_height(), field.source_width()].map(|d| d as u32);
    let mut out = header(FIELD_MAGIC, &dims);
    for (&(a, b), d) in field.mapping().iter().zip(field.distances()) {
        out.extend_from_slice(&(a as i32).to_le_bytes());
        out.extend_from_slice(&(b as i32).to_le_bytes());
        out.extend_from_slice(&(*d as f32).to_le_bytes());
    }
    out
}

/// Decodes a field. Distances are kept at `f32` precision.
pub fn decode_field(bytes: &[u8]) -> Result<(NNField, Vec<f64>)> {
    let mut r = open(bytes, FIELD_MAGIC)?;
    let (h, w, sh, sw) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    let mut mapping = Vec::with_capacity(h * w);
    let mut distance = Vec::with_capacity(h * w);
    for _ in 0..h * w {
        let (a, b) = (r.i32()?, r.i32()?);
        if a < 0 || b < 0 {
            return Err(Error::Malformed(format!("negative source coordinate ({a}, {b})")));
        }
        mapping.push((a as usize, b as usize));
        distance.push(r.f32()?);
    }
    Ok((NNField::from_mapping(h, w, sh, sw, mapping)?, distance))
}

pub fn write_feature_map(path: impl AsRef<Path>, f: &FeatureMap) -> Result<()> {
    fs::write(path, encode_feature_map(f))?;
    Ok(())
}

pub fn read_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    decode_feature_map(&fs::read(path)?)
}

pub fn write_field(path: impl AsRef<Path>, field: &NNField) -> Result<()> {
    fs::write(path, encode_field(field))?;
    Ok(())
}
