//! Binary range coder with count-based adaptive contexts.
//!
//! The arithmetic follows the LZMA range coder: 32-bit range, 16-bit
//! probabilities, carry propagation through a cached byte. The decoder reads
//! exactly as many bytes as the encoder wrote.

use crate::error::{Error, Result};

const PROB_BITS: u32 = 16;
const PROB_ONE: u32 = 1 << PROB_BITS;
const TOP: u32 = 1 << 24;
const RESCALE_AT: u32 = 1 << 15;
const FLUSH_BYTES: usize = 5;

/// Adaptive probability of a binary symbol, from symbol counts that start
/// at 1/1 and are halved when their sum reaches 2^15.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdaptiveBit {
    zeros: u32,
    ones: u32,
}

impl Default for AdaptiveBit {
    fn default() -> Self {
        Self { zeros: 1, ones: 1 }
    }
}

impl AdaptiveBit {
    /// Probability of a zero, scaled to 16 bits and kept inside (0, 1).
    pub fn p_zero(&self) -> u32 {
        let p = (u64::from(self.zeros) << PROB_BITS) / u64::from(self.zeros + self.ones);
        (p as u32).clamp(1, PROB_ONE - 1)
    }

    pub fn update(&mut self, bit: bool) {
        if bit {
            self.ones += 1;
        } else {
            self.zeros += 1;
        }
        if self.zeros + self.ones >= RESCALE_AT {
            self.zeros = self.zeros.div_ceil(2);
            self.ones = self.ones.div_ceil(2);
        }
    }
}

#[derive(Debug)]
pub struct BitEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Default for BitEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl BitEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    /// Codes `bit` with a fixed 16-bit probability of zero.
    pub fn encode_with(&mut self, bit: bool, p_zero: u32) {
        debug_assert!(p_zero > 0 && p_zero < PROB_ONE);
        let bound = (self.range >> PROB_BITS) * p_zero;
        if bit {
            self.low += u64::from(bound);
            self.range -= bound;
        } else {
            self.range = bound;
        }
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    pub fn encode(&mut self, bit: bool, ctx: &mut AdaptiveBit) {
        self.encode_with(bit, ctx.p_zero());
        ctx.update(bit);
    }

    fn shift_low(&mut self) {
        if self.low < 0xFF00_0000 || self.low > u64::from(u32::MAX) {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..FLUSH_BYTES {
            self.shift_low();
        }
        self.out
    }
}

#[derive(Debug)]
pub struct BitDecoder<'a> {
    data: &'a [u8],
    pos: usize,
    range: u32,
    code: u32,
}

impl<'a> BitDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self> {
        let mut dec = Self {
            data,
            pos: 0,
            range: u32::MAX,
            code: 0,
        };
        for _ in 0..FLUSH_BYTES {
            dec.code = (dec.code << 8) | u32::from(dec.next_byte()?);
        }
        Ok(dec)
    }

    fn next_byte(&mut self) -> Result<u8> {
        let b = *self
            .data
            .get(self.pos)
            .ok_or_else(|| Error::format("residual stream truncated"))?;
        self.pos += 1;
        Ok(b)
    }

    pub fn decode_with(&mut self, p_zero: u32) -> Result<bool> {
        let bound = (self.range >> PROB_BITS) * p_zero;
        let bit = if self.code < bound {
            self.range = bound;
            false
        } else {
            self.code -= bound;
            self.range -= bound;
            true
        };
        while self.range < TOP {
            self.range <<= 8;
            self.code = (self.code << 8) | u32::from(self.next_byte()?);
        }
        Ok(bit)
    }

    pub fn decode(&mut self, ctx: &mut AdaptiveBit) -> Result<bool> {
        let bit = self.decode_with(ctx.p_zero())?;
        ctx.update(bit);
        Ok(bit)
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }

    /// Fails unless every input byte was consumed.
    pub fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::format(format!(
                "{} unread bytes after residual stream",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}
