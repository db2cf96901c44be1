//! The `DIRW` weights container.
//!
//! Little-endian layout:
//!
//! ```text
//! "DIRW" | u32 version=1 | f32[3] mean_rgb | f32 scale | u32 layer_count
//! per layer: u16 name_len | name (UTF-8) | u32 out_c | u32 in_c | u32 kh | u32 kw
//!            | f32 weights[out_c][in_c][kh][kw] | f32 bias[out_c]
//! u32 CRC32 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"DIRW";
pub const WEIGHTS_VERSION: u32 = 1;

/// Serialized layer order of the truncated VGG-19.
pub const LAYER_NAMES: [&str; 9] = [
    "conv1_1", "conv1_2", "conv2_1", "conv2_2", "conv3_1", "conv3_2", "conv3_3", "conv3_4", "conv4_1",
];

/// Output channels of each layer in the pretrained network.
pub const REFERENCE_WIDTHS: [usize; 9] = [64, 64, 128, 128, 256, 256, 256, 256, 512];

/// A 3x3 convolution with bias. Weights are `[out][in][kh][kw]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub name: String,
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    #[inline]
    pub fn weight(&self, o: usize, c: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_channels + c) * self.kernel_h + ky) * self.kernel_w + kx]
    }
}

/// Input normalization applied before the first convolution:
/// `(pixel - mean_rgb[c]) * scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preprocess {
    pub mean_rgb: [f64; 3],
    pub scale: f64,
}

/// Immutable parameters of the truncated backbone.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightsBundle {
    pub layers: Vec<ConvLayer>,
    pub preprocess: Preprocess,
}

impl WeightsBundle {
    /// Builds a bundle and checks it against the fixed topology.
    pub fn new(layers: Vec<ConvLayer>, preprocess: Preprocess) -> Result<Self> {
        let bundle = Self { layers, preprocess };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Layer names and order must match [`LAYER_NAMES`], every kernel is 3x3, the
    /// first layer reads RGB and each layer consumes its predecessor's channels.
    /// Channel widths come from the file, so narrow test networks are accepted.
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != LAYER_NAMES.len() {
            return Err(Error::Topology(format!(
                "expected {} conv layers, found {}",
                LAYER_NAMES.len(),
                self.layers.len()
            )));
        }
        let mut prev_out = 3;
        for (layer, expected) in self.layers.iter().zip(LAYER_NAMES) {
            if layer.name != expected {
                return Err(Error::Topology(format!("expected layer {expected}, found {}", layer.name)));
            }
            if layer.kernel_h != 3 || layer.kernel_w != 3 {
                return Err(Error::Topology(format!(
                    "{} has a {}x{} kernel, expected 3x3",
                    layer.name, layer.kernel_h, layer.kernel_w
                )));
            }
            if layer.in_channels != prev_out {
                return Err(Error::Topology(format!(
                    "{} takes {} input channels but the previous layer produces {prev_out}",
                    layer.name, layer.in_channels
                )));
            }
            if layer.out_channels == 0 {
                return Err(Error::Topology(format!("{} has no output channels", layer.name)));
            }
            let expected_len = layer.out_channels * layer.in_channels * 9;
            if layer.weights.len() != expected_len || layer.bias.len() != layer.out_channels {
                return Err(Error::Topology(format!("{} parameter count does not match its shape", layer.name)));
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteParameter { layer: layer.name.clone() });
            }
            prev_out = layer.out_channels;
        }
        let p = &self.preprocess;
        if !p.scale.is_finite() || p.mean_rgb.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParameter { layer: "preprocess".into() });
        }
        Ok(())
    }

    /// True when channel widths match the pretrained VGG-19.
    pub fn has_reference_widths(&self) -> bool {
        self.layers.iter().map(|l| l.out_channels).eq(REFERENCE_WIDTHS)
    }

    pub fn layer(&self, name: &str) -> Option<&ConvLayer> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Channel count at each pyramid tap (relu1_1, relu2_1, relu3_1, relu4_1).
    pub fn level_channels(&self) -> [usize; 4] {
        [0, 2, 4, 8].map(|k| self.layers[k].out_channels)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(WEIGHTS_MAGIC);
        put_u32(&mut out, WEIGHTS_VERSION);
        for m in self.preprocess.mean_rgb {
            put_f32(&mut out, m);
        }
        put_f32(&mut out, self.preprocess.scale);
        put_u32(&mut out, self.layers.len() as u32);
        for layer in &self.layers {
            let name = layer.name.as_bytes();
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name);
            for d in [layer.out_channels, layer.in_channels, layer.kernel_h, layer.kernel_w] {
                put_u32(&mut out, d as u32);
            }
            for &w in layer.weights.iter().chain(&layer.bias) {
                put_f32(&mut out, w);
            }
        }
        let crc = crc32fast::hash(&out);
        put_u32(&mut out, crc);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != WEIGHTS_MAGIC {
            return Err(Error::BadMagic);
        }
        let mut r = Reader { bytes, pos: 4 };
        let version = r.u32()?;
        if version != WEIGHTS_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        if bytes.len() < 8 {
            return Err(Error::Malformed("missing checksum".into()));
        }
        let body = &bytes[..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = Reader { bytes: body, pos: 8 };
        let mean_rgb = [r.f32()?, r.f32()?, r.f32()?];
        let scale = r.f32()?;
        let count = r.u32()? as usize;
        if count > 64 {
            return Err(Error::Topology(format!("implausible layer count {count}")));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Malformed("layer name is not UTF-8".into()))?;
            let out_channels = r.u32()? as usize;
            let in_channels = r.u32()? as usize;
            let kernel_h = r.u32()? as usize;
            let kernel_w = r.u32()? as usize;
            let n = out_channels
                .checked_mul(in_channels)
                .and_then(|v| v.checked_mul(kernel_h))
                .and_then(|v| v.checked_mul(kernel_w))
                .ok_or_else(|| Error::Malformed(format!("{name}: shape overflows")))?;
            let weights = r.f32_vec(n)?;
            let bias = r.f32_vec(out_channels)?;
            layers.push(ConvLayer { name, out_channels, in_channels, kernel_h, kernel_w, weights, bias });
        }
        if r.pos != body.len() {
            return Err(Error::Malformed(format!("{} trailing bytes", body.len() - r.pos)));
        }
        Self::new(layers, Preprocess { mean_rgb, scale })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

/// Reads and validates a `DIRW` file.
pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightsBundle> {
    WeightsBundle::from_bytes(&fs::read(path)?)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&(v as f32).to_le_bytes());
}

pub(crate) struct Reader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Malformed(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f64> {
        Ok(f64::from(f32::from_le_bytes(self.take(4)?.try_into().unwrap())))
    }

    pub fn f32_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::Malformed("length overflow".into()))?)?;
        Ok(raw.chunks_exact(4).map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap()))).collect())
    }
}
