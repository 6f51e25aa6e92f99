//! 8×8 block DCT, JPEG-style quantization and the amplitude/sign split.
//!
//! Coordinates follow the block-domain convention used throughout the crate:
//! `u` is the horizontal frequency, `v` the vertical frequency, `m` the
//! horizontal block index and `n` the vertical block index. Inside a block,
//! coefficients are stored row-major by frequency, i.e. at `8 * v + u`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const BLOCK: usize = 8;
pub const BLOCK_AREA: usize = BLOCK * BLOCK;

/// Quantization step sizes are expressed in 8-bit pixel units, so normalized
/// samples are scaled back up before the forward transform.
pub const PIXEL_SCALE: f64 = 255.0;

/// Standard JPEG luminance table (Annex K), row-major by (v, u).
pub const BASE_LUMINANCE: [u16; BLOCK_AREA] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

pub type Block = [[f64; BLOCK]; BLOCK];

/// A grayscale image with samples normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || !width.is_multiple_of(BLOCK) || !height.is_multiple_of(BLOCK) {
            return Err(Error::invalid(format!(
                "image dimensions {width}x{height} are not positive multiples of {BLOCK}"
            )));
        }
        if samples.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} samples, got {}",
                width * height,
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::invalid(format!("sample {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    /// Builds a plane from 8-bit samples, dividing by 255.
    pub fn from_u8(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        let samples = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
        Self::new(width, height, samples)
    }

    /// Quantizes back to 8-bit samples with round-to-nearest.
    pub fn to_u8(&self) -> Vec<u8> {
        self.samples
            .iter()
            .map(|&s| (s * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn blocks_x(&self) -> usize {
        self.width / BLOCK
    }

    pub fn blocks_y(&self) -> usize {
        self.height / BLOCK
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    /// Copies out a `w`×`h` window whose top-left corner is at `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::invalid(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut samples = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            samples.extend_from_slice(&self.samples[y * self.width + x0..y * self.width + x0 + w]);
        }
        Self::new(w, h, samples)
    }
}

/// Quantization steps, row-major by (v, u).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantTable {
    steps: [u16; BLOCK_AREA],
}

impl QuantTable {
    pub fn new(steps: [u16; BLOCK_AREA]) -> Result<Self> {
        if let Some(bad) = steps.iter().find(|&&q| !(1..=255).contains(&q)) {
            return Err(Error::invalid(format!(
                "quantization step {bad} outside [1, 255]"
            )));
        }
        Ok(Self { steps })
    }

    pub fn step(&self, u: usize, v: usize) -> u16 {
        self.steps[v * BLOCK + u]
    }

    pub fn steps(&self) -> &[u16; BLOCK_AREA] {
        &self.steps
    }
}

/// IJG quality scaling of the standard luminance table.
pub fn quant_table_from_qf(qf: u32) -> Result<QuantTable> {
    if !(1..=100).contains(&qf) {
        return Err(Error::invalid(format!(
            "quality factor {qf} outside 1..=100"
        )));
    }
    let scale = if qf < 50 { 5000 / qf } else { 200 - 2 * qf };
    let mut steps = [0u16; BLOCK_AREA];
    for (out, &base) in steps.iter_mut().zip(BASE_LUMINANCE.iter()) {
        let scaled = (u32::from(base) * scale + 50) / 100;
        *out = scaled.clamp(1, 255) as u16;
    }
    QuantTable::new(steps)
}

fn basis() -> &'static Block {
    static BASIS: OnceLock<Block> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut c = [[0.0; BLOCK]; BLOCK];
        for (k, row) in c.iter_mut().enumerate() {
            let alpha = if k == 0 {
                (1.0 / BLOCK as f64).sqrt()
            } else {
                (2.0 / BLOCK as f64).sqrt()
            };
            for (i, value) in row.iter_mut().enumerate() {
                *value = alpha * ((2 * i + 1) as f64 * k as f64 * PI / (2 * BLOCK) as f64).cos();
            }
        }
        c
    })
}

/// Orthonormal 2D type-II DCT. Input is `[row][col]`; output is `[v][u]`.
pub fn dct8_forward(block: &Block) -> Block {
    let c = basis();
    let mut tmp = [[0.0; BLOCK]; BLOCK];
    // rows: tmp[i][u] = sum_j c[u][j] * b[i][j]
    for i in 0..BLOCK {
        for u in 0..BLOCK {
            tmp[i][u] = (0..BLOCK).map(|j| c[u][j] * block[i][j]).sum();
        }
    }
    let mut out = [[0.0; BLOCK]; BLOCK];
    for v in 0..BLOCK {
        for u in 0..BLOCK {
            out[v][u] = (0..BLOCK).map(|i| c[v][i] * tmp[i][u]).sum();
        }
    }
    out
}

pub fn dct8_inverse(coeffs: &Block) -> Block {
    let c = basis();
    let mut tmp = [[0.0; BLOCK]; BLOCK];
    for v in 0..BLOCK {
        for j in 0..BLOCK {
            tmp[v][j] = (0..BLOCK).map(|u| c[u][j] * coeffs[v][u]).sum();
        }
    }
    let mut out = [[0.0; BLOCK]; BLOCK];
    for i in 0..BLOCK {
        for j in 0..BLOCK {
            out[i][j] = (0..BLOCK).map(|v| c[v][i] * tmp[v][j]).sum();
        }
    }
    out
}

/// Sign of a quantized coefficient. Zero levels carry `Positive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Sign {
    #[default]
    Positive,
    Negative,
}

impl Sign {
    pub fn of(level: i32) -> Self {
        if level < 0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn as_i32(self) -> i32 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }

    /// Zero-one label: 1 for positive.
    pub fn as_bit(self) -> bool {
        self == Sign::Positive
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

/// Values indexed `(u, v, m, n)`, stored block by block in raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid4D<T> {
    blocks_x: usize,
    blocks_y: usize,
    data: Vec<T>,
}

pub type CoeffGrid4D = Grid4D<i32>;
pub type AmpGrid4D = Grid4D<u32>;
pub type SignGrid4D = Grid4D<Sign>;

impl<T: Copy> Grid4D<T> {
    pub fn filled(blocks_x: usize, blocks_y: usize, value: T) -> Self {
        Self {
            blocks_x,
            blocks_y,
            data: vec![value; blocks_x * blocks_y * BLOCK_AREA],
        }
    }

    /// `data` is block-major (`n`, then `m`), each block row-major by `(v, u)`.
    pub fn from_vec(blocks_x: usize, blocks_y: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != blocks_x * blocks_y * BLOCK_AREA {
            return Err(Error::invalid(format!(
                "{} values do not fill a {blocks_x}x{blocks_y} block grid",
                data.len()
            )));
        }
        Ok(Self {
            blocks_x,
            blocks_y,
            data,
        })
    }

    pub fn blocks_x(&self) -> usize {
        self.blocks_x
    }

    pub fn blocks_y(&self) -> usize {
        self.blocks_y
    }

    fn index(&self, u: usize, v: usize, m: usize, n: usize) -> usize {
        debug_assert!(u < BLOCK && v < BLOCK && m < self.blocks_x && n < self.blocks_y);
        (n * self.blocks_x + m) * BLOCK_AREA + v * BLOCK + u
    }

    pub fn get(&self, u: usize, v: usize, m: usize, n: usize) -> T {
        self.data[self.index(u, v, m, n)]
    }

    pub fn set(&mut self, u: usize, v: usize, m: usize, n: usize, value: T) {
        let i = self.index(u, v, m, n);
        self.data[i] = value;
    }

    /// The 64 values of block `(m, n)`, row-major by `(v, u)`.
    pub fn block(&self, m: usize, n: usize) -> &[T] {
        let start = (n * self.blocks_x + m) * BLOCK_AREA;
        &self.data[start..start + BLOCK_AREA]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn same_shape<U>(&self, other: &Grid4D<U>) -> bool {
        self.blocks_x == other.blocks_x && self.blocks_y == other.blocks_y
    }

    pub fn map<U, F: FnMut(T) -> U>(&self, f: F) -> Grid4D<U> {
        Grid4D {
            blocks_x: self.blocks_x,
            blocks_y: self.blocks_y,
            data: self.data.iter().copied().map(f).collect(),
        }
    }
}

fn load_block(image: &ImagePlane, m: usize, n: usize) -> Block {
    let mut block = [[0.0; BLOCK]; BLOCK];
    for (i, row) in block.iter_mut().enumerate() {
        for (j, value) in row.iter_mut().enumerate() {
            *value = image.get(m * BLOCK + j, n * BLOCK + i) * PIXEL_SCALE;
        }
    }
    block
}

/// Unquantized DCT coefficients of every block, in 8-bit pixel units.
pub fn block_coefficients(image: &ImagePlane) -> Vec<Block> {
    let mut out = Vec::with_capacity(image.blocks_x() * image.blocks_y());
    for n in 0..image.blocks_y() {
        for m in 0..image.blocks_x() {
            out.push(dct8_forward(&load_block(image, m, n)));
        }
    }
    out
}

pub fn blockwise_forward(image: &ImagePlane, table: &QuantTable) -> CoeffGrid4D {
    let (bx, by) = (image.blocks_x(), image.blocks_y());
    let mut data = Vec::with_capacity(bx * by * BLOCK_AREA);
    for coeffs in block_coefficients(image) {
        for v in 0..BLOCK {
            for u in 0..BLOCK {
                let q = f64::from(table.step(u, v));
                // f64::round is half-away-from-zero
                data.push((coeffs[v][u] / q).round() as i32);
            }
        }
    }
    Grid4D {
        blocks_x: bx,
        blocks_y: by,
        data,
    }
}

pub fn blockwise_inverse(grid: &CoeffGrid4D, table: &QuantTable) -> ImagePlane {
    let width = grid.blocks_x * BLOCK;
    let height = grid.blocks_y * BLOCK;
    let mut samples = vec![0.0; width * height];
    for n in 0..grid.blocks_y {
        for m in 0..grid.blocks_x {
            let levels = grid.block(m, n);
            let mut coeffs = [[0.0; BLOCK]; BLOCK];
            for v in 0..BLOCK {
                for u in 0..BLOCK {
                    coeffs[v][u] = f64::from(levels[v * BLOCK + u]) * f64::from(table.step(u, v));
                }
            }
            let pixels = dct8_inverse(&coeffs);
            for (i, row) in pixels.iter().enumerate() {
                for (j, &p) in row.iter().enumerate() {
                    samples[(n * BLOCK + i) * width + m * BLOCK + j] =
                        (p / PIXEL_SCALE).clamp(0.0, 1.0);
                }
            }
        }
    }
    ImagePlane {
        width,
        height,
        samples,
    }
}

pub fn split(grid: &CoeffGrid4D) -> (AmpGrid4D, SignGrid4D) {
    (grid.map(i32::unsigned_abs), grid.map(Sign::of))
}

pub fn merge(amp: &AmpGrid4D, sign: &SignGrid4D) -> Result<CoeffGrid4D> {
    if !amp.same_shape(sign) {
        return Err(Error::invalid(format!(
            "amplitude grid {}x{} and sign grid {}x{} differ",
            amp.blocks_x, amp.blocks_y, sign.blocks_x, sign.blocks_y
        )));
    }
    let data = amp
        .data
        .iter()
        .zip(&sign.data)
        .map(|(&a, &s)| {
            i32::try_from(a)
                .map(|a| a * s.as_i32())
                .map_err(|_| Error::invalid(format!("amplitude {a} overflows a level")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Grid4D {
        blocks_x: amp.blocks_x,
        blocks_y: amp.blocks_y,
        data,
    })
}
