//! XOR residual between true and retrieved signs.

use super::coder::{AdaptiveBit, BitDecoder, BitEncoder};
use crate::error::{Error, Result};
use crate::subband::{AmpTensor3D, SignTensor3D, SubbandTensor, BANDS};
use crate::transform::Sign;

/// One bit per position: set where the true and retrieved signs of a
/// significant AC coefficient differ. DC and zero-amplitude positions are
/// always clear.
pub type ResidualTensor = SubbandTensor<bool>;

fn check_shapes<A, B>(a: &SubbandTensor<A>, b: &SubbandTensor<B>) -> Result<()>
where
    A: Copy,
    B: Copy,
{
    if !a.same_shape(b) {
        return Err(Error::invalid(format!(
            "tensor shapes {}x{} and {}x{} differ",
            a.blocks_x(),
            a.blocks_y(),
            b.blocks_x(),
            b.blocks_y()
        )));
    }
    Ok(())
}

fn is_coded(amp: &AmpTensor3D, i: usize) -> bool {
    i >= amp.slice_len() && amp.as_slice()[i] > 0
}

pub fn residual(
    truth: &SignTensor3D,
    retrieved: &SignTensor3D,
    amp: &AmpTensor3D,
) -> Result<ResidualTensor> {
    check_shapes(truth, retrieved)?;
    check_shapes(truth, amp)?;
    let mut r = ResidualTensor::filled(amp.blocks_x(), amp.blocks_y(), false);
    for (i, bit) in r.as_mut_slice().iter_mut().enumerate() {
        *bit = is_coded(amp, i) && truth.as_slice()[i] != retrieved.as_slice()[i];
    }
    Ok(r)
}

/// Inverts [`residual`]: flips retrieved signs where the residual is set.
/// Zero-amplitude AC positions come back as `+1`; the DC slice passes through.
pub fn apply(
    r: &ResidualTensor,
    retrieved: &SignTensor3D,
    amp: &AmpTensor3D,
) -> Result<SignTensor3D> {
    check_shapes(r, retrieved)?;
    check_shapes(r, amp)?;
    let mut out = retrieved.clone();
    let len = amp.slice_len();
    for (i, s) in out.as_mut_slice().iter_mut().enumerate().skip(len) {
        *s = if amp.as_slice()[i] == 0 {
            Sign::Positive
        } else if r.as_slice()[i] {
            s.flipped()
        } else {
            *s
        };
    }
    Ok(out)
}

/// Significant AC positions in coding order: `z` ascending, then `y`, then `x`.
/// This coincides with storage order of the tensor.
pub fn significant_ac(amp: &AmpTensor3D) -> impl Iterator<Item = usize> + '_ {
    (amp.slice_len()..amp.as_slice().len()).filter(move |&i| amp.as_slice()[i] > 0)
}

pub fn encode_residual(r: &ResidualTensor, amp: &AmpTensor3D) -> Result<Vec<u8>> {
    check_shapes(r, amp)?;
    let len = amp.slice_len();
    let mut positions = significant_ac(amp).peekable();
    if positions.peek().is_none() {
        return Ok(Vec::new());
    }
    let mut contexts = [AdaptiveBit::default(); BANDS - 1];
    let mut enc = BitEncoder::new();
    for i in positions {
        enc.encode(r.as_slice()[i], &mut contexts[i / len - 1]);
    }
    Ok(enc.finish())
}

pub fn decode_residual(bytes: &[u8], amp: &AmpTensor3D) -> Result<ResidualTensor> {
    let len = amp.slice_len();
    let mut r = ResidualTensor::filled(amp.blocks_x(), amp.blocks_y(), false);
    let mut positions = significant_ac(amp).peekable();
    if positions.peek().is_none() {
        if !bytes.is_empty() {
            return Err(Error::format(
                "residual payload present but nothing is significant",
            ));
        }
        return Ok(r);
    }
    let mut contexts = [AdaptiveBit::default(); BANDS - 1];
    let mut dec = BitDecoder::new(bytes)?;
    for i in positions {
        r.as_mut_slice()[i] = dec.decode(&mut contexts[i / len - 1])?;
    }
    dec.finish()?;
    Ok(r)
}
