//! The sign-retrieval CNN, its masked loss and reverse-mode gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::conv::{Activation, ConvLayer, LayerGrad};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};
use crate::subband::{
    from_block_plane, pack, to_block_plane, unpack, AmpTensor3D, Plane2D, SignTensor3D, BANDS,
};
use crate::transform::{Sign, BLOCK, BLOCK_AREA};

pub const HIDDEN_CHANNELS: usize = 128;
pub const AC_CHANNELS: usize = BANDS - 1;

/// Clamp applied to probabilities inside the log of the loss.
pub const LOG_EPS: f64 = 1e-12;

/// Which representation the network runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// 64 sub-band slices in, 63 AC sign probabilities out.
    Subband,
    /// The raw coefficient image as one plane in, one plane out.
    Naive,
}

impl Variant {
    pub fn input_channels(self) -> usize {
        match self {
            Variant::Subband => BANDS,
            Variant::Naive => 1,
        }
    }

    pub fn output_channels(self) -> usize {
        match self {
            Variant::Subband => AC_CHANNELS,
            Variant::Naive => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    variant: Variant,
    layers: Vec<ConvLayer<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrad<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &Model<T>) -> Self {
        Self {
            layers: model.layers.iter().map(LayerGrad::zeros_like).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.kernels
                .iter_mut()
                .zip(&b.kernels)
                .for_each(|(x, &y)| *x = *x + y);
            a.biases
                .iter_mut()
                .zip(&b.biases)
                .for_each(|(x, &y)| *x = *x + y);
        }
    }

    pub fn scale(&mut self, factor: T) {
        for g in &mut self.layers {
            g.kernels.iter_mut().for_each(|x| *x = *x * factor);
            g.biases.iter_mut().for_each(|x| *x = *x * factor);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.layers
            .iter()
            .flat_map(|g| g.kernels.iter().chain(g.biases.iter()))
    }
}

fn layer_shapes(variant: Variant, depth: usize) -> Vec<(usize, usize, Activation)> {
    (0..depth)
        .map(|i| {
            let inp = if i == 0 {
                variant.input_channels()
            } else {
                HIDDEN_CHANNELS
            };
            if i + 1 == depth {
                (inp, variant.output_channels(), Activation::Sigmoid)
            } else {
                (inp, HIDDEN_CHANNELS, Activation::Relu)
            }
        })
        .collect()
}

fn check_depth(depth: usize) -> Result<()> {
    if depth < 2 {
        return Err(Error::invalid(format!(
            "model depth {depth} below 2 layers"
        )));
    }
    Ok(())
}

impl<T: Real> Model<T> {
    /// Seeded He-uniform initialization with `depth` convolution layers.
    pub fn new(variant: Variant, depth: usize, seed: u64) -> Result<Self> {
        check_depth(depth)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_shapes(variant, depth)
            .into_iter()
            .map(|(i, o, a)| ConvLayer::he_uniform(i, o, a, &mut rng))
            .collect();
        Ok(Self { variant, layers })
    }

    pub fn zeros(variant: Variant, depth: usize) -> Result<Self> {
        check_depth(depth)?;
        let layers = layer_shapes(variant, depth)
            .into_iter()
            .map(|(i, o, a)| ConvLayer::zeros(i, o, a))
            .collect();
        Ok(Self { variant, layers })
    }

    /// Validates the layer stack against the fixed architecture and infers
    /// the variant from the first layer's input width.
    pub fn from_layers(layers: Vec<ConvLayer<T>>) -> Result<Self> {
        check_depth(layers.len())?;
        let variant = match layers[0].in_channels() {
            BANDS => Variant::Subband,
            1 => Variant::Naive,
            other => {
                return Err(Error::invalid(format!(
                    "first layer takes {other} channels; expected {BANDS} or 1"
                )))
            }
        };
        for (i, (layer, (inp, out, act))) in layers
            .iter()
            .zip(layer_shapes(variant, layers.len()))
            .enumerate()
        {
            if layer.in_channels() != inp
                || layer.out_channels() != out
                || layer.activation() != act
            {
                return Err(Error::invalid(format!(
                    "layer {i} is {}->{} {:?}, expected {inp}->{out} {act:?}",
                    layer.in_channels(),
                    layer.out_channels(),
                    layer.activation()
                )));
            }
        }
        Ok(Self { variant, layers })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[ConvLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer<T>] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.kernels().len() + l.biases().len())
            .sum()
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            variant: self.variant,
            layers: self.layers.iter().map(ConvLayer::cast).collect(),
        }
    }

    /// Network input for `amp` in this variant's layout. Levels enter as
    /// raw real values.
    pub fn input(&self, amp: &AmpTensor3D) -> Tensor<T> {
        let convert = |a: &u32| T::of(f64::from(*a));
        match self.variant {
            Variant::Subband => Tensor {
                channels: BANDS,
                height: amp.blocks_y(),
                width: amp.blocks_x(),
                data: amp.as_slice().iter().map(convert).collect(),
            },
            Variant::Naive => {
                let plane = to_block_plane(&unpack(amp));
                Tensor {
                    channels: 1,
                    height: plane.height,
                    width: plane.width,
                    data: plane.data.iter().map(convert).collect(),
                }
            }
        }
    }

    pub fn forward_tensor(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut x = self.layers[0].forward(input)?;
        for layer in &self.layers[1..] {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    /// Output probabilities in the variant's own layout:
    /// `(63, H/8, W/8)` for sub-band, `(1, H, W)` for naive.
    pub fn forward(&self, amp: &AmpTensor3D) -> Result<Tensor<T>> {
        self.forward_tensor(&self.input(amp))
    }

    /// AC probabilities in sub-band layout `(63, H/8, W/8)` for either variant.
    pub fn ac_probabilities(&self, amp: &AmpTensor3D) -> Result<Tensor<T>> {
        let out = self.forward(amp)?;
        match self.variant {
            Variant::Subband => Ok(out),
            Variant::Naive => {
                let plane = Plane2D::from_vec(out.width, out.height, out.data)?;
                let t = pack(&from_block_plane(&plane)?);
                Tensor::from_vec(
                    AC_CHANNELS,
                    t.blocks_y(),
                    t.blocks_x(),
                    t.as_slice()[t.slice_len()..].to_vec(),
                )
            }
        }
    }

    /// Labels and mask in the variant's output layout, plus the `1/(W·H)`
    /// normalization.
    fn targets(&self, amp: &AmpTensor3D, sign: &SignTensor3D) -> Result<Targets> {
        match self.variant {
            Variant::Subband => Targets::subband(amp, sign),
            Variant::Naive => Targets::naive(amp, sign),
        }
    }

    pub fn loss(&self, amp: &AmpTensor3D, sign: &SignTensor3D) -> Result<f64> {
        let targets = self.targets(amp, sign)?;
        Ok(targets.loss(&self.forward(amp)?.data))
    }

    /// Masked BCE and its gradient with respect to every kernel and bias.
    pub fn loss_and_gradients(
        &self,
        amp: &AmpTensor3D,
        sign: &SignTensor3D,
    ) -> Result<(f64, Gradients<T>)> {
        let targets = self.targets(amp, sign)?;
        let mut x = self.input(amp);
        let mut cols = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, col) = layer.forward_cached(&x)?;
            cols.push(col);
            outputs.push(out);
            x = outputs.last().expect("just pushed").clone();
        }
        let loss = targets.loss(&x.data);
        // sigmoid + BCE: dL/dpre = (F - b) * mask / (W·H)
        let norm = T::of(targets.norm);
        let mut delta: Vec<T> = x
            .data
            .iter()
            .zip(&targets.labels)
            .map(|(&f, label)| match label {
                Some(true) => (f - T::one()) * norm,
                Some(false) => f * norm,
                None => T::zero(),
            })
            .collect();

        let (h, w) = (x.height, x.width);
        let mut grads = Gradients::zeros_like(self);
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if let Some(d_in) = layer.backward(&cols[i], h, w, &delta, &mut grads.layers[i], i > 0)
            {
                // layer i-1 is ReLU
                delta = d_in
                    .data
                    .iter()
                    .zip(&outputs[i - 1].data)
                    .map(|(&g, &a)| if a > T::zero() { g } else { T::zero() })
                    .collect();
            }
        }
        Ok((loss, grads))
    }
}

struct Targets {
    labels: Vec<Option<bool>>,
    norm: f64,
}

impl Targets {
    fn subband(amp: &AmpTensor3D, sign: &SignTensor3D) -> Result<Self> {
        if !amp.same_shape(sign) {
            return Err(Error::invalid("amplitude and sign tensors differ in shape"));
        }
        let len = amp.slice_len();
        let labels = amp.as_slice()[len..]
            .iter()
            .zip(&sign.as_slice()[len..])
            .map(|(&a, s)| (a > 0).then(|| s.as_bit()))
            .collect();
        Ok(Self {
            labels,
            norm: pixel_norm(amp),
        })
    }

    fn naive(amp: &AmpTensor3D, sign: &SignTensor3D) -> Result<Self> {
        if !amp.same_shape(sign) {
            return Err(Error::invalid("amplitude and sign tensors differ in shape"));
        }
        let a = to_block_plane(&unpack(amp));
        let s = to_block_plane(&unpack(sign));
        let labels = (0..a.height)
            .flat_map(|row| (0..a.width).map(move |col| (row, col)))
            .map(|(row, col)| {
                let dc = row % BLOCK == 0 && col % BLOCK == 0;
                (!dc && a.get(col, row) > 0).then(|| s.get(col, row).as_bit())
            })
            .collect();
        Ok(Self {
            labels,
            norm: pixel_norm(amp),
        })
    }

    fn loss<T: Real>(&self, out: &[T]) -> f64 {
        let sum: f64 = out
            .iter()
            .zip(&self.labels)
            .map(|(f, label)| {
                let f = f.to_f64().unwrap_or(0.5).clamp(LOG_EPS, 1.0 - LOG_EPS);
                match label {
                    Some(true) => -f.ln(),
                    Some(false) => -(1.0 - f).ln(),
                    None => 0.0,
                }
            })
            .sum();
        sum * self.norm
    }
}

fn pixel_norm(amp: &AmpTensor3D) -> f64 {
    1.0 / (amp.slice_len() * BLOCK_AREA) as f64
}

pub fn model_forward<T: Real>(model: &Model<T>, amp: &AmpTensor3D) -> Result<Tensor<T>> {
    model.forward(amp)
}

pub fn model_backward<T: Real>(
    model: &Model<T>,
    amp: &AmpTensor3D,
    sign: &SignTensor3D,
) -> Result<Gradients<T>> {
    Ok(model.loss_and_gradients(amp, sign)?.1)
}

pub fn build_naive_model<T: Real>(depth: usize, seed: u64) -> Result<Model<T>> {
    Model::new(Variant::Naive, depth, seed)
}

/// Runs a naive model on a full-resolution amplitude plane.
pub fn naive_forward<T: Real>(model: &Model<T>, plane: &Plane2D<u32>) -> Result<Tensor<T>> {
    if model.variant() != Variant::Naive {
        return Err(Error::invalid("naive_forward needs a naive model"));
    }
    let input = Tensor::from_vec(
        1,
        plane.height,
        plane.width,
        plane.data.iter().map(|&a| T::of(f64::from(a))).collect(),
    )?;
    model.forward_tensor(&input)
}

/// Masked binary cross-entropy of sub-band probabilities `f`
/// (shape `(63, H/8, W/8)`) against the true signs, normalized by `1/(W·H)`.
pub fn masked_bce<T: Real>(f: &Tensor<T>, sign: &SignTensor3D, amp: &AmpTensor3D) -> Result<f64> {
    if f.channels != AC_CHANNELS || f.height != amp.blocks_y() || f.width != amp.blocks_x() {
        return Err(Error::invalid(format!(
            "probabilities {}x{}x{} do not match amplitudes",
            f.channels, f.height, f.width
        )));
    }
    Ok(Targets::subband(amp, sign)?.loss(&f.data))
}

/// `+1` where the probability is at least one half.
pub fn threshold<T: Real>(f: &Tensor<T>) -> Vec<Sign> {
    let half = T::of(0.5);
    f.data.iter().map(|&p| Sign::from_bit(p >= half)).collect()
}

/// Full 64-slice sign tensor: slice 0 copies `dc_signs`, slices 1..64 are
/// the thresholded network output.
pub fn retrieve_signs<T: Real>(
    model: &Model<T>,
    amp: &AmpTensor3D,
    dc_signs: &Plane2D<Sign>,
) -> Result<SignTensor3D> {
    if dc_signs.width != amp.blocks_x() || dc_signs.height != amp.blocks_y() {
        return Err(Error::invalid(format!(
            "DC sign plane {}x{} does not match {}x{} blocks",
            dc_signs.width,
            dc_signs.height,
            amp.blocks_x(),
            amp.blocks_y()
        )));
    }
    let probs = model.ac_probabilities(amp)?;
    let mut data = Vec::with_capacity(amp.as_slice().len());
    data.extend_from_slice(&dc_signs.data);
    data.extend(threshold(&probs));
    SignTensor3D::from_vec(amp.blocks_x(), amp.blocks_y(), data)
}
