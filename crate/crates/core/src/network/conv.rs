//! 3×3 zero-padded convolution over all input channels.
//!
//! Forward and backward passes go through an im2col matrix of shape
//! `(in_channels · 9) × (height · width)` so that every step is one GEMM.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

pub const KERNEL: usize = 3;
pub const TAPS: usize = KERNEL * KERNEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    in_channels: usize,
    out_channels: usize,
    /// `out × in × 3 × 3`, row-major.
    kernels: Vec<T>,
    biases: Vec<T>,
    activation: Activation,
}

/// Gradients of one layer, shaped like its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T> {
    pub kernels: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Real> LayerGrad<T> {
    pub fn zeros_like(layer: &ConvLayer<T>) -> Self {
        Self {
            kernels: vec![T::zero(); layer.kernels.len()],
            biases: vec![T::zero(); layer.biases.len()],
        }
    }
}

impl<T: Real> ConvLayer<T> {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernels: Vec<T>,
        biases: Vec<T>,
        activation: Activation,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::invalid(
                "convolution needs at least one channel each way",
            ));
        }
        if kernels.len() != out_channels * in_channels * TAPS || biases.len() != out_channels {
            return Err(Error::invalid(format!(
                "{} kernel values and {} biases do not fit a {in_channels}->{out_channels} layer",
                kernels.len(),
                biases.len()
            )));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernels,
            biases,
            activation,
        })
    }

    pub fn zeros(in_channels: usize, out_channels: usize, activation: Activation) -> Self {
        Self {
            in_channels,
            out_channels,
            kernels: vec![T::zero(); out_channels * in_channels * TAPS],
            biases: vec![T::zero(); out_channels],
            activation,
        }
    }

    /// Uniform in `±sqrt(6 / fan_in)`, zero biases. Values are drawn as `f32`
    /// so both precisions initialize identically from one seed.
    pub fn he_uniform<R: Rng>(
        in_channels: usize,
        out_channels: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bound = (6.0 / (in_channels * TAPS) as f64).sqrt() as f32;
        let dist = Uniform::new_inclusive(-bound, bound);
        let kernels = (0..out_channels * in_channels * TAPS)
            .map(|_| T::of(f64::from(dist.sample(rng))))
            .collect();
        Self {
            in_channels,
            out_channels,
            kernels,
            biases: vec![T::zero(); out_channels],
            activation,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn kernels(&self) -> &[T] {
        &self.kernels
    }

    pub fn biases(&self) -> &[T] {
        &self.biases
    }

    pub fn kernels_mut(&mut self) -> &mut [T] {
        &mut self.kernels
    }

    pub fn biases_mut(&mut self) -> &mut [T] {
        &mut self.biases
    }

    pub fn kernel(&self, out: usize, inp: usize, dy: usize, dx: usize) -> T {
        self.kernels[((out * self.in_channels + inp) * KERNEL + dy) * KERNEL + dx]
    }

    pub fn cast<U: Real>(&self) -> ConvLayer<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::of(x.to_f64().unwrap_or(0.0))).collect();
        ConvLayer {
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            kernels: conv(&self.kernels),
            biases: conv(&self.biases),
            activation: self.activation,
        }
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_cached(input)?.0)
    }

    /// Returns the activated output and the im2col matrix of the input.
    pub(crate) fn forward_cached(&self, input: &Tensor<T>) -> Result<(Tensor<T>, Vec<T>)> {
        if input.channels != self.in_channels {
            return Err(Error::invalid(format!(
                "layer expects {} input channels, got {}",
                self.in_channels, input.channels
            )));
        }
        let (h, w) = (input.height, input.width);
        let p = h * w;
        let k = self.in_channels * TAPS;
        let col = im2col(input);
        let mut out = Vec::with_capacity(self.out_channels * p);
        for &b in &self.biases {
            out.extend(std::iter::repeat_n(b, p));
        }
        T::gemm(
            self.out_channels,
            k,
            p,
            &self.kernels,
            (k as isize, 1),
            &col,
            (p as isize, 1),
            T::one(),
            &mut out,
        );
        match self.activation {
            Activation::Relu => out.iter_mut().for_each(|x| *x = x.max(T::zero())),
            Activation::Sigmoid => {
                // clamp keeps outputs inside the open interval once exp() saturates
                let lo = T::epsilon();
                let hi = T::one() - T::epsilon();
                out.iter_mut()
                    .for_each(|x| *x = (T::one() / (T::one() + (-*x).exp())).max(lo).min(hi));
            }
        }
        Ok((
            Tensor {
                channels: self.out_channels,
                height: h,
                width: w,
                data: out,
            },
            col,
        ))
    }

    /// Accumulates parameter gradients from `d_pre` (gradient w.r.t. the
    /// pre-activation, `out × h·w`) and optionally returns the gradient
    /// w.r.t. the layer input.
    pub(crate) fn backward(
        &self,
        col: &[T],
        height: usize,
        width: usize,
        d_pre: &[T],
        grad: &mut LayerGrad<T>,
        want_input_grad: bool,
    ) -> Option<Tensor<T>> {
        let p = height * width;
        let k = self.in_channels * TAPS;
        // dW += d_pre · col^T
        T::gemm(
            self.out_channels,
            p,
            k,
            d_pre,
            (p as isize, 1),
            col,
            (1, p as isize),
            T::one(),
            &mut grad.kernels,
        );
        for (gb, row) in grad.biases.iter_mut().zip(d_pre.chunks_exact(p)) {
            *gb = *gb + row.iter().copied().sum::<T>();
        }
        if !want_input_grad {
            return None;
        }
        let mut d_col = vec![T::zero(); k * p];
        // d_col = W^T · d_pre
        T::gemm(
            k,
            self.out_channels,
            p,
            &self.kernels,
            (1, k as isize),
            d_pre,
            (p as isize, 1),
            T::zero(),
            &mut d_col,
        );
        Some(col2im(&d_col, self.in_channels, height, width))
    }
}

pub fn conv_forward<T: Real>(input: &Tensor<T>, layer: &ConvLayer<T>) -> Result<Tensor<T>> {
    layer.forward(input)
}

fn im2col<T: Real>(input: &Tensor<T>) -> Vec<T> {
    let (c, h, w) = (input.channels, input.height, input.width);
    let p = h * w;
    let mut col = vec![T::zero(); c * TAPS * p];
    for ci in 0..c {
        let plane = input.channel(ci);
        for dy in 0..KERNEL {
            for dx in 0..KERNEL {
                let row = &mut col[(ci * TAPS + dy * KERNEL + dx) * p..][..p];
                for y in 0..h {
                    let sy = y as isize + dy as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    match dx {
                        0 => dst[1..].copy_from_slice(&src[..w - 1]),
                        1 => dst.copy_from_slice(src),
                        _ => dst[..w - 1].copy_from_slice(&src[1..]),
                    }
                }
            }
        }
    }
    col
}

fn col2im<T: Real>(col: &[T], c: usize, h: usize, w: usize) -> Tensor<T> {
    let p = h * w;
    let mut out = Tensor::zeros(c, h, w);
    for ci in 0..c {
        let plane = &mut out.data[ci * p..][..p];
        for dy in 0..KERNEL {
            for dx in 0..KERNEL {
                let row = &col[(ci * TAPS + dy * KERNEL + dx) * p..][..p];
                for y in 0..h {
                    let sy = y as isize + dy as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..][..w];
                    let src = &row[y * w..][..w];
                    let (d, s) = match dx {
                        0 => (&mut dst[..w - 1], &src[1..]),
                        1 => (&mut dst[..], src),
                        _ => (&mut dst[1..], &src[..w - 1]),
                    };
                    d.iter_mut().zip(s).for_each(|(a, &b)| *a = *a + b);
                }
            }
        }
    }
    out
}
