//! Residual sign coding and the compressed-image container.

pub mod coder;
mod container;
mod residual;

pub use container::{
    decode_grid, decode_image, encode_grid, encode_image, Container, DecodedImage, CONTAINER_MAGIC,
    HEADER_LEN,
};
pub use residual::{
    apply, decode_residual, encode_residual, residual, significant_ac, ResidualTensor,
};
