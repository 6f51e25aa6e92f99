//! Helpers shared by the integration test targets.
#![allow(dead_code)]

pub mod fd;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use signret::subband::{AmpTensor3D, SignTensor3D, BANDS};
use signret::transform::Sign;

/// Random amplitudes in `1..=max_level` at a fraction `density` of
/// positions (zero elsewhere) and independent random signs.
pub fn random_pair(
    bx: usize,
    by: usize,
    density: f64,
    max_level: u32,
    seed: u64,
) -> (AmpTensor3D, SignTensor3D) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = bx * by * BANDS;
    let amp = (0..n)
        .map(|_| {
            if rng.gen_bool(density) {
                rng.gen_range(1..=max_level)
            } else {
                0
            }
        })
        .collect();
    let sign = (0..n).map(|_| Sign::from_bit(rng.gen_bool(0.5))).collect();
    (
        AmpTensor3D::from_vec(bx, by, amp).unwrap(),
        SignTensor3D::from_vec(bx, by, sign).unwrap(),
    )
}

pub struct GradientCheck {
    pub seed: u64,
    pub parameters: usize,
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub kink_margin: f64,
}

/// Two-layer `f64` model on a random 8×8-block, 64-channel input with a
/// random significance mask. Biases are randomized too so their gradients
/// are exercised away from the zero initialization. Seeds are tried in
/// order until no hidden pre-activation lies within reach of the stencil,
/// where a ReLU kink would invalidate the central difference.
pub fn gradient_check(step: f64) -> GradientCheck {
    use signret::network::{Model, Variant};
    for seed in 0u64.. {
        let mut model: Model<f64> = Model::new(Variant::Subband, 2, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for layer in model.layers_mut() {
            for b in layer.biases_mut() {
                *b = rng.gen_range(-0.1..0.1);
            }
        }
        let (amp, sign) = random_pair(8, 8, 0.5, 3, seed);
        let reference = fd::Reference::new(&model, &amp, &sign);
        let margin = reference.kink_margin();
        if margin <= step * reference.max_input().max(1.0) {
            continue;
        }
        let (loss, grads) = model.loss_and_gradients(&amp, &sign).unwrap();
        assert!((loss - reference.loss()).abs() <= 1e-12 * loss.abs().max(1.0));
        let numerical = reference.numerical_gradients(step);
        let analytic: Vec<f64> = grads.iter().copied().collect();
        assert_eq!(analytic.len(), numerical.len());
        let (worst_index, max_relative_error) = analytic
            .iter()
            .zip(&numerical)
            .map(|(&a, &n)| fd::relative_error(a, n))
            .enumerate()
            .fold(
                (0, 0.0),
                |(bi, be), (i, e)| if e > be { (i, e) } else { (bi, be) },
            );
        return GradientCheck {
            seed,
            parameters: analytic.len(),
            max_relative_error,
            worst_index,
            kink_margin: margin,
        };
    }
    unreachable!()
}
