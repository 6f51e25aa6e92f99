//! Turning images into training examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::TrainingExample;
use crate::subband::pack;
use crate::transform::{blockwise_forward, split, ImagePlane, QuantTable};

/// Quantizes `image` and packs amplitudes and signs into sub-band tensors.
pub fn example_from_image(image: &ImagePlane, table: &QuantTable) -> TrainingExample {
    let (amp, sign) = split(&blockwise_forward(image, table));
    TrainingExample {
        amp: pack(&amp),
        sign: pack(&sign),
    }
}

/// `count` square crops of side `size`, each from a seeded choice of image
/// and position. Images smaller than the crop are never chosen.
pub fn random_crops(
    images: &[ImagePlane],
    count: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<ImagePlane>> {
    let usable: Vec<&ImagePlane> = images
        .iter()
        .filter(|im| im.width() >= size && im.height() >= size)
        .collect();
    if usable.is_empty() {
        return Err(Error::invalid(format!(
            "no image is at least {size}x{size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let im = usable[rng.gen_range(0..usable.len())];
            let x = rng.gen_range(0..=im.width() - size);
            let y = rng.gen_range(0..=im.height() - size);
            im.crop(x, y, size, size)
        })
        .collect()
}
