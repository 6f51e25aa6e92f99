//! `SRC1` compressed-image container.
//!
//! All integers little-endian:
//!
//! | bytes | field                                   |
//! |-------|-----------------------------------------|
//! | 4     | magic `SRC1`                            |
//! | 4     | width in pixels (u32)                   |
//! | 4     | height in pixels (u32)                  |
//! | 1     | quality factor (u8)                     |
//! | 32    | SHA-256 of the model's `SRW1` bytes     |
//! | 8     | amplitude payload length (u64)          |
//! | 8     | DC-sign payload length (u64)            |
//! | 8     | residual payload length (u64)           |
//! | ...   | amplitude, DC-sign, residual payloads   |
//!
//! Amplitudes are LEB128 varints in block raster order, each block
//! row-major by `(v, u)`. DC signs are one bit per block in raster order,
//! least significant bit first, set for negative. The residual payload is
//! the output of [`encode_residual`].

use super::residual::{apply, decode_residual, encode_residual, residual};
use crate::error::{Error, Result};
use crate::network::weights::{hash_hex, model_hash};
use crate::network::{retrieve_signs, Model};
use crate::subband::{pack, unpack, AmpTensor3D, Plane2D, SignTensor3D};
use crate::transform::{
    blockwise_forward, blockwise_inverse, merge, quant_table_from_qf, split, AmpGrid4D,
    CoeffGrid4D, Grid4D, ImagePlane, Sign, BLOCK,
};

pub const CONTAINER_MAGIC: &[u8; 4] = b"SRC1";
pub const HEADER_LEN: usize = 4 + 4 + 4 + 1 + 32 + 3 * 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Container {
    pub width: u32,
    pub height: u32,
    pub qf: u8,
    pub model_hash: [u8; 32],
    pub amplitudes: Vec<u8>,
    pub dc_signs: Vec<u8>,
    pub residual: Vec<u8>,
}

/// Decoder output: the reconstructed image and the exact quantized levels.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedImage {
    pub image: ImagePlane,
    pub grid: CoeffGrid4D,
}

impl Container {
    pub fn blocks(&self) -> (usize, usize) {
        (self.width as usize / BLOCK, self.height as usize / BLOCK)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            HEADER_LEN + self.amplitudes.len() + self.dc_signs.len() + self.residual.len(),
        );
        out.extend_from_slice(CONTAINER_MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.push(self.qf);
        out.extend_from_slice(&self.model_hash);
        for payload in [&self.amplitudes, &self.dc_signs, &self.residual] {
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.amplitudes);
        out.extend_from_slice(&self.dc_signs);
        out.extend_from_slice(&self.residual);
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        if data.len() < HEADER_LEN {
            return Err(Error::format(format!(
                "container is {} bytes, shorter than its {HEADER_LEN}-byte header",
                data.len()
            )));
        }
        if &data[..4] != CONTAINER_MAGIC {
            return Err(Error::format("bad container magic, expected SRC1"));
        }
        let u32_at = |at: usize| u32::from_le_bytes(data[at..at + 4].try_into().expect("4 bytes"));
        let u64_at = |at: usize| u64::from_le_bytes(data[at..at + 8].try_into().expect("8 bytes"));
        let width = u32_at(4);
        let height = u32_at(8);
        let qf = data[12];
        let model_hash: [u8; 32] = data[13..45].try_into().expect("32 bytes");
        if width == 0 || height == 0 || !(width as usize).is_multiple_of(BLOCK) || !(height as usize).is_multiple_of(BLOCK)
        {
            return Err(Error::format(format!("bad image size {width}x{height}")));
        }
        if !(1..=100).contains(&qf) {
            return Err(Error::format(format!("bad quality factor {qf}")));
        }
        let lens = [u64_at(45), u64_at(53), u64_at(61)];
        let body = &data[HEADER_LEN..];
        let total = lens
            .iter()
            .try_fold(0u64, |acc, &l| acc.checked_add(l))
            .ok_or_else(|| Error::format("payload lengths overflow"))?;
        if total != body.len() as u64 {
            return Err(Error::format(format!(
                "header declares {total} payload bytes, found {}",
                body.len()
            )));
        }
        let (a, rest) = body.split_at(lens[0] as usize);
        let (d, r) = rest.split_at(lens[1] as usize);
        Ok(Self {
            width,
            height,
            qf,
            model_hash,
            amplitudes: a.to_vec(),
            dc_signs: d.to_vec(),
            residual: r.to_vec(),
        })
    }
}

fn write_varint(out: &mut Vec<u8>, mut value: u32) {
    while value >= 0x80 {
        out.push((value as u8 & 0x7f) | 0x80);
        value >>= 7;
    }
    out.push(value as u8);
}

fn encode_amplitudes(amp: &AmpGrid4D) -> Vec<u8> {
    let mut out = Vec::with_capacity(amp.as_slice().len());
    for &a in amp.as_slice() {
        write_varint(&mut out, a);
    }
    out
}

fn decode_amplitudes(bytes: &[u8], bx: usize, by: usize) -> Result<AmpGrid4D> {
    let count = bx * by * BLOCK * BLOCK;
    let mut values = Vec::with_capacity(count);
    let mut iter = bytes.iter();
    for _ in 0..count {
        let mut value: u64 = 0;
        let mut shift = 0;
        loop {
            let &b = iter
                .next()
                .ok_or_else(|| Error::format("amplitude payload truncated"))?;
            value |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                break;
            }
            shift += 7;
            if shift > 28 {
                return Err(Error::format("amplitude varint too long"));
            }
        }
        let value = u32::try_from(value)
            .ok()
            .filter(|&v| v <= i32::MAX as u32)
            .ok_or_else(|| Error::format("amplitude out of range"))?;
        values.push(value);
    }
    if iter.next().is_some() {
        return Err(Error::format("trailing bytes in amplitude payload"));
    }
    Grid4D::from_vec(bx, by, values)
}

fn encode_dc_signs(dc: &[Sign]) -> Vec<u8> {
    let mut out = vec![0u8; dc.len().div_ceil(8)];
    for (i, s) in dc.iter().enumerate() {
        if *s == Sign::Negative {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

fn decode_dc_signs(bytes: &[u8], count: usize) -> Result<Vec<Sign>> {
    if bytes.len() != count.div_ceil(8) {
        return Err(Error::format(format!(
            "DC-sign payload is {} bytes, expected {}",
            bytes.len(),
            count.div_ceil(8)
        )));
    }
    Ok((0..count)
        .map(|i| Sign::from_bit(bytes[i / 8] & (1 << (i % 8)) == 0))
        .collect())
}

fn dc_plane(signs: &SignTensor3D) -> Plane2D<Sign> {
    Plane2D {
        width: signs.blocks_x(),
        height: signs.blocks_y(),
        data: signs.band(0).to_vec(),
    }
}

/// Encodes already-quantized levels.
pub fn encode_grid(grid: &CoeffGrid4D, qf: u8, model: &Model<f32>) -> Result<Container> {
    let (amp4, sign4) = split(grid);
    let amp: AmpTensor3D = pack(&amp4);
    let truth = pack(&sign4);
    let dc = dc_plane(&truth);
    let retrieved = retrieve_signs(model, &amp, &dc)?;
    let r = residual(&truth, &retrieved, &amp)?;
    Ok(Container {
        width: (grid.blocks_x() * BLOCK) as u32,
        height: (grid.blocks_y() * BLOCK) as u32,
        qf,
        model_hash: model_hash(model),
        amplitudes: encode_amplitudes(&amp4),
        dc_signs: encode_dc_signs(&dc.data),
        residual: encode_residual(&r, &amp)?,
    })
}

pub fn encode_image(image: &ImagePlane, qf: u32, model: &Model<f32>) -> Result<Container> {
    let table = quant_table_from_qf(qf)?;
    encode_grid(&blockwise_forward(image, &table), qf as u8, model)
}

/// Recovers the quantized levels without the inverse transform.
pub fn decode_grid(container: &Container, model: &Model<f32>) -> Result<CoeffGrid4D> {
    if container.model_hash == [0; 32] {
        return Err(Error::format("container carries no model hash"));
    }
    let hash = model_hash(model);
    if hash != container.model_hash {
        return Err(Error::ModelMismatch {
            expected: hash_hex(&container.model_hash),
            found: hash_hex(&hash),
        });
    }
    let (bx, by) = container.blocks();
    let amp4 = decode_amplitudes(&container.amplitudes, bx, by)?;
    let amp = pack(&amp4);
    let dc = Plane2D::from_vec(bx, by, decode_dc_signs(&container.dc_signs, bx * by)?)?;
    let retrieved = retrieve_signs(model, &amp, &dc)?;
    let r = decode_residual(&container.residual, &amp)?;
    let signs = apply(&r, &retrieved, &amp)?;
    merge(&amp4, &unpack(&signs))
}

pub fn decode_image(container: &Container, model: &Model<f32>) -> Result<DecodedImage> {
    let grid = decode_grid(container, model)?;
    let table = quant_table_from_qf(u32::from(container.qf))?;
    Ok(DecodedImage {
        image: blockwise_inverse(&grid, &table),
        grid,
    })
}
