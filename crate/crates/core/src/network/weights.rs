//! `SRW1` weight files.
//!
//! Layout, little-endian: magic `SRW1`, layer count (u32), then per layer
//! `in_ch` (u32), `out_ch` (u32), kernels as f32 in out/in/row/col order,
//! biases as f32. Hidden layers are ReLU and the last layer is sigmoid, so
//! activations are implied by position.

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use super::conv::{Activation, ConvLayer, TAPS};
use super::model::Model;
use crate::error::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"SRW1";

// generous bound so a corrupt count cannot trigger a huge allocation
const MAX_CHANNELS: u32 = 4096;
const MAX_LAYERS: u32 = 64;

pub fn to_bytes(model: &Model<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + model.parameter_count() * 4 + model.depth() * 8);
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&(model.depth() as u32).to_le_bytes());
    for layer in model.layers() {
        out.extend_from_slice(&(layer.in_channels() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.out_channels() as u32).to_le_bytes());
        for v in layer.kernels().iter().chain(layer.biases()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::format(format!(
                "weights truncated while reading {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(n * 4, what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}

pub fn from_bytes(data: &[u8]) -> Result<Model<f32>> {
    let mut cur = Cursor { data, pos: 0 };
    if cur.take(4, "magic")? != WEIGHTS_MAGIC {
        return Err(Error::format("bad weights magic, expected SRW1"));
    }
    let depth = cur.u32("layer count")?;
    if depth == 0 || depth > MAX_LAYERS {
        return Err(Error::format(format!("implausible layer count {depth}")));
    }
    let mut layers = Vec::with_capacity(depth as usize);
    for i in 0..depth {
        let inp = cur.u32("input channels")?;
        let out = cur.u32("output channels")?;
        if inp == 0 || out == 0 || inp > MAX_CHANNELS || out > MAX_CHANNELS {
            return Err(Error::format(format!(
                "layer {i} has implausible shape {inp}->{out}"
            )));
        }
        let (inp, out) = (inp as usize, out as usize);
        let kernels = cur.f32s(out * inp * TAPS, "kernels")?;
        let biases = cur.f32s(out, "biases")?;
        if kernels.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::format(format!("layer {i} holds non-finite weights")));
        }
        let activation = if i + 1 == depth {
            Activation::Sigmoid
        } else {
            Activation::Relu
        };
        layers.push(ConvLayer::new(inp, out, kernels, biases, activation)?);
    }
    if cur.pos != data.len() {
        return Err(Error::format(format!(
            "{} trailing bytes after weights",
            data.len() - cur.pos
        )));
    }
    Model::from_layers(layers).map_err(|e| Error::format(format!("dimension mismatch: {e}")))
}

pub fn save_weights<W: Write>(model: &Model<f32>, mut dest: W) -> Result<()> {
    dest.write_all(&to_bytes(model))?;
    Ok(())
}

pub fn load_weights<R: Read>(mut source: R) -> Result<Model<f32>> {
    let mut data = Vec::new();
    source.read_to_end(&mut data)?;
    from_bytes(&data)
}

/// SHA-256 of the serialized weights; identifies a model inside containers.
pub fn model_hash(model: &Model<f32>) -> [u8; 32] {
    Sha256::digest(to_bytes(model)).into()
}

pub fn hash_hex(hash: &[u8; 32]) -> String {
    hash.iter().map(|b| format!("{b:02x}")).collect()
}
