//! Sub-band packing of block-domain grids.
//!
//! The 3D layout gathers, for every frequency `(u, v)`, the coefficient of
//! that frequency from each block into one 2D slice `z = 8u + v`. Slice
//! coordinates are `x = m` and `y = n`, so a slice is the block-resolution
//! picture of one frequency band.

use crate::error::{Error, Result};
use crate::transform::{Grid4D, Sign, BLOCK, BLOCK_AREA};

pub const BANDS: usize = BLOCK_AREA;

/// Frequency `(u, v)` stored in slice `z`.
pub fn band_of(z: usize) -> (usize, usize) {
    (z / BLOCK, z % BLOCK)
}

/// Slice index of frequency `(u, v)`.
pub fn slice_of(u: usize, v: usize) -> usize {
    BLOCK * u + v
}

/// A row-major 2D grid, typically at block resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane2D<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Plane2D<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "{} values do not fill a {width}x{height} plane",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }
}

/// Values indexed `(x, y, z)`, stored slice-major: `z`, then `y`, then `x`.
///
/// This is the channel-first layout the network consumes directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubbandTensor<T> {
    blocks_x: usize,
    blocks_y: usize,
    data: Vec<T>,
}

pub type AmpTensor3D = SubbandTensor<u32>;
pub type SignTensor3D = SubbandTensor<Sign>;

impl<T: Copy> SubbandTensor<T> {
    pub fn filled(blocks_x: usize, blocks_y: usize, value: T) -> Self {
        Self {
            blocks_x,
            blocks_y,
            data: vec![value; blocks_x * blocks_y * BANDS],
        }
    }

    pub fn from_vec(blocks_x: usize, blocks_y: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != blocks_x * blocks_y * BANDS {
            return Err(Error::invalid(format!(
                "{} values do not fill a {blocks_x}x{blocks_y}x{BANDS} tensor",
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

    /// Number of positions in one slice.
    pub fn slice_len(&self) -> usize {
        self.blocks_x * self.blocks_y
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.blocks_x && y < self.blocks_y && z < BANDS);
        (z * self.blocks_y + y) * self.blocks_x + x
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: T) {
        let i = self.index(x, y, z);
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Raw values of slice `z`, row-major by `(y, x)`.
    pub fn band(&self, z: usize) -> &[T] {
        let len = self.slice_len();
        &self.data[z * len..(z + 1) * len]
    }

    pub fn same_shape<U>(&self, other: &SubbandTensor<U>) -> bool {
        self.blocks_x == other.blocks_x && self.blocks_y == other.blocks_y
    }

    pub fn map<U, F: FnMut(T) -> U>(&self, f: F) -> SubbandTensor<U> {
        SubbandTensor {
            blocks_x: self.blocks_x,
            blocks_y: self.blocks_y,
            data: self.data.iter().copied().map(f).collect(),
        }
    }
}

pub fn pack<T: Copy + Default>(grid: &Grid4D<T>) -> SubbandTensor<T> {
    let (bx, by) = (grid.blocks_x(), grid.blocks_y());
    let mut t = SubbandTensor::filled(bx, by, T::default());
    for n in 0..by {
        for m in 0..bx {
            let block = grid.block(m, n);
            for z in 0..BANDS {
                let (u, v) = band_of(z);
                t.set(m, n, z, block[v * BLOCK + u]);
            }
        }
    }
    t
}

pub fn unpack<T: Copy + Default>(t: &SubbandTensor<T>) -> Grid4D<T> {
    let (bx, by) = (t.blocks_x, t.blocks_y);
    let mut g = Grid4D::filled(bx, by, T::default());
    for n in 0..by {
        for m in 0..bx {
            for v in 0..BLOCK {
                for u in 0..BLOCK {
                    g.set(u, v, m, n, t.get(m, n, slice_of(u, v)));
                }
            }
        }
    }
    g
}

/// The sub-band block of frequency `(u, v)`.
pub fn slice<T: Copy>(t: &SubbandTensor<T>, u: usize, v: usize) -> Result<Plane2D<T>> {
    if u >= BLOCK || v >= BLOCK {
        return Err(Error::invalid(format!("frequency ({u}, {v}) outside 8x8")));
    }
    Plane2D::from_vec(t.blocks_x, t.blocks_y, t.band(slice_of(u, v)).to_vec())
}

/// Lays a block grid out as the full-resolution coefficient image: value
/// `(u, v, m, n)` lands at column `8m + u`, row `8n + v`.
pub fn to_block_plane<T: Copy>(grid: &Grid4D<T>) -> Plane2D<T> {
    let (w, h) = (grid.blocks_x() * BLOCK, grid.blocks_y() * BLOCK);
    let mut data = Vec::with_capacity(w * h);
    for row in 0..h {
        let (n, v) = (row / BLOCK, row % BLOCK);
        for col in 0..w {
            data.push(grid.get(col % BLOCK, v, col / BLOCK, n));
        }
    }
    Plane2D {
        width: w,
        height: h,
        data,
    }
}

pub fn from_block_plane<T: Copy + Default>(plane: &Plane2D<T>) -> Result<Grid4D<T>> {
    if !plane.width.is_multiple_of(BLOCK) || !plane.height.is_multiple_of(BLOCK) {
        return Err(Error::invalid(format!(
            "plane {}x{} is not a whole number of blocks",
            plane.width, plane.height
        )));
    }
    let mut g = Grid4D::filled(plane.width / BLOCK, plane.height / BLOCK, T::default());
    for row in 0..plane.height {
        for col in 0..plane.width {
            g.set(
                col % BLOCK,
                row % BLOCK,
                col / BLOCK,
                row / BLOCK,
                plane.get(col, row),
            );
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counting_grid(bx: usize, by: usize) -> Grid4D<u32> {
        Grid4D::from_vec(bx, by, (0..(bx * by * 64) as u32).collect()).unwrap()
    }

    #[test]
    fn index_maps() {
        assert_eq!(band_of(10), (1, 2));
        assert_eq!(band_of(0), (0, 0));
        assert_eq!(slice_of(1, 2), 10);
        assert_eq!(slice_of(7, 7), 63);
        for z in 0..BANDS {
            let (u, v) = band_of(z);
            assert_eq!(slice_of(u, v), z);
        }
    }

    #[test]
    fn slice_ten_is_band_one_two() {
        let g = counting_grid(3, 2);
        let t = pack(&g);
        let s = slice(&t, 1, 2).unwrap();
        assert_eq!((s.width, s.height), (3, 2));
        for y in 0..2 {
            for x in 0..3 {
                assert_eq!(s.get(x, y), g.get(1, 2, x, y));
                assert_eq!(t.get(x, y, 10), g.get(1, 2, x, y));
            }
        }
        let dc = slice(&t, 0, 0).unwrap();
        assert_eq!(
            dc.data,
            (0..6).map(|k| g.block(k % 3, k / 3)[0]).collect::<Vec<_>>()
        );
        assert!(slice(&t, 8, 0).is_err());
    }

    #[test]
    fn single_block_unpack_is_transpose() {
        let g = counting_grid(1, 1);
        let t = pack(&g);
        for v in 0..BLOCK {
            for u in 0..BLOCK {
                // block storage is [v][u]; slices run over 8u + v
                assert_eq!(t.band(8 * u + v), &[g.block(0, 0)[8 * v + u]]);
            }
        }
        assert_eq!(unpack(&t), g);
    }

    #[test]
    fn block_plane_layout() {
        let g = counting_grid(2, 3);
        let p = to_block_plane(&g);
        assert_eq!((p.width, p.height), (16, 24));
        assert_eq!(p.get(8 + 3, 16 + 5), g.get(3, 5, 1, 2));
        assert_eq!(from_block_plane(&p).unwrap(), g);
    }

    proptest! {
        #[test]
        fn pack_unpack_bijection(bx in 1usize..6, by in 1usize..6, seed in any::<u32>()) {
            let data = (0..bx * by * 64).map(|i| (i as u32).wrapping_mul(2654435761) ^ seed).collect();
            let g = Grid4D::from_vec(bx, by, data).unwrap();
            let t = pack(&g);
            prop_assert_eq!(&unpack(&t), &g);
            prop_assert_eq!(pack(&unpack(&t)), t.clone());
            let mut a = g.as_slice().to_vec();
            let mut b = t.as_slice().to_vec();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
            for z in 0..BANDS {
                let (u, v) = band_of(z);
                let s = slice(&t, u, v).unwrap();
                for y in 0..by {
                    for x in 0..bx {
                        prop_assert_eq!(s.get(x, y), g.get(u, v, x, y));
                    }
                }
            }
        }
    }
}
