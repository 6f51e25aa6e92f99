//! Convolutional sign retrieval over sub-band tensors.

mod adam;
mod conv;
mod model;
mod tensor;
mod train;
pub mod weights;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{conv_forward, Activation, ConvLayer, LayerGrad, KERNEL, TAPS};
pub use model::{
    build_naive_model, masked_bce, model_backward, model_forward, naive_forward, retrieve_signs,
    threshold, Gradients, Model, Variant, AC_CHANNELS, HIDDEN_CHANNELS, LOG_EPS,
};
pub use tensor::{Real, Tensor};
pub use train::{train, train_with, TrainConfig, TrainOutcome, TrainingExample};
pub use weights::{load_weights, model_hash, save_weights};
