//! Recovery rates, per-block heat maps, residual bit accounting and timing.

use std::time::Instant;

use crate::codec::{significant_ac, Container};
use crate::error::{Error, Result};
use crate::network::{retrieve_signs, Model, Real};
use crate::subband::{AmpTensor3D, Plane2D, SignTensor3D};
use crate::transform::Sign;

/// Fraction of significant AC signs retrieved correctly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryReport {
    pub recovery_rate: f64,
    pub significant_ac_count: usize,
    pub correct_count: usize,
    /// No significant AC coefficient was present; the rate is reported as 1.
    pub vacuous: bool,
}

impl RecoveryReport {
    fn from_counts(correct: usize, significant: usize) -> Self {
        Self {
            recovery_rate: if significant == 0 {
                1.0
            } else {
                correct as f64 / significant as f64
            },
            significant_ac_count: significant,
            correct_count: correct,
            vacuous: significant == 0,
        }
    }

    /// Per-sign aggregate over several reports.
    pub fn pooled<'a>(reports: impl IntoIterator<Item = &'a RecoveryReport>) -> Self {
        let (c, s) = reports.into_iter().fold((0, 0), |(c, s), r| {
            (c + r.correct_count, s + r.significant_ac_count)
        });
        Self::from_counts(c, s)
    }
}

fn check_shapes(truth: &SignTensor3D, retrieved: &SignTensor3D, amp: &AmpTensor3D) -> Result<()> {
    if !truth.same_shape(retrieved) || !truth.same_shape(amp) {
        return Err(Error::invalid("sign and amplitude tensors differ in shape"));
    }
    Ok(())
}

/// Counts positions with `z >= 1` and nonzero amplitude only.
pub fn recovery_rate(
    truth: &SignTensor3D,
    retrieved: &SignTensor3D,
    amp: &AmpTensor3D,
) -> Result<RecoveryReport> {
    check_shapes(truth, retrieved, amp)?;
    let (mut correct, mut significant) = (0, 0);
    for i in significant_ac(amp) {
        significant += 1;
        if truth.as_slice()[i] == retrieved.as_slice()[i] {
            correct += 1;
        }
    }
    Ok(RecoveryReport::from_counts(correct, significant))
}

/// Recovery rate of each block; `None` where a block has no significant AC.
pub fn per_block_rates(
    truth: &SignTensor3D,
    retrieved: &SignTensor3D,
    amp: &AmpTensor3D,
) -> Result<Plane2D<Option<f64>>> {
    check_shapes(truth, retrieved, amp)?;
    let len = amp.slice_len();
    let mut correct = vec![0usize; len];
    let mut significant = vec![0usize; len];
    for i in significant_ac(amp) {
        significant[i % len] += 1;
        if truth.as_slice()[i] == retrieved.as_slice()[i] {
            correct[i % len] += 1;
        }
    }
    let data = correct
        .iter()
        .zip(&significant)
        .map(|(&c, &s)| (s > 0).then(|| c as f64 / s as f64))
        .collect();
    Plane2D::from_vec(amp.blocks_x(), amp.blocks_y(), data)
}

/// Element-wise statistics of per-block recovery rates across images.
/// Blocks without significant AC coefficients in a given image do not
/// contribute for that image; blocks empty in every image are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    pub worst: Plane2D<Option<f64>>,
    /// Population variance across the images where the block is defined.
    pub variance: Plane2D<Option<f64>>,
    pub mean: Plane2D<Option<f64>>,
    pub per_image: Vec<Plane2D<Option<f64>>>,
}

pub fn per_block_heatmap(cases: &[(SignTensor3D, SignTensor3D, AmpTensor3D)]) -> Result<HeatMap> {
    let first = cases
        .first()
        .ok_or_else(|| Error::invalid("heat map needs at least one image"))?;
    if cases.iter().any(|(_, _, a)| !a.same_shape(&first.2)) {
        return Err(Error::invalid("heat map images differ in shape"));
    }
    let per_image = cases
        .iter()
        .map(|(t, r, a)| per_block_rates(t, r, a))
        .collect::<Result<Vec<_>>>()?;
    let (w, h) = (first.2.blocks_x(), first.2.blocks_y());
    let mut worst = Plane2D::filled(w, h, None);
    let mut variance = Plane2D::filled(w, h, None);
    let mut mean = Plane2D::filled(w, h, None);
    for i in 0..w * h {
        let rates: Vec<f64> = per_image.iter().filter_map(|p| p.data[i]).collect();
        if rates.is_empty() {
            continue;
        }
        let n = rates.len() as f64;
        let mu = rates.iter().sum::<f64>() / n;
        worst.data[i] = Some(rates.iter().copied().fold(f64::INFINITY, f64::min));
        mean.data[i] = Some(mu);
        variance.data[i] = Some(rates.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>() / n);
    }
    Ok(HeatMap {
        worst,
        variance,
        mean,
        per_image,
    })
}

/// Mean of per-block rates over every defined block of every image.
pub fn block_mean_rate(per_image: &[Plane2D<Option<f64>>]) -> Option<f64> {
    let rates: Vec<f64> = per_image
        .iter()
        .flat_map(|p| p.data.iter().flatten())
        .copied()
        .collect();
    (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Gray level used for blocks without any significant AC coefficient.
pub const UNDEFINED_GRAY: u8 = 128;

/// 8-bit rendering of a map: `value * scale` clamped to `[0, 1]`, 0 black.
pub fn render_map(map: &Plane2D<Option<f64>>, scale: f64) -> Vec<u8> {
    map.data
        .iter()
        .map(|v| match v {
            Some(x) => ((x * scale).clamp(0.0, 1.0) * 255.0).round() as u8,
            None => UNDEFINED_GRAY,
        })
        .collect()
}

/// CSV lines `x,y,value`, empty value for undefined blocks.
pub fn map_csv(map: &Plane2D<Option<f64>>) -> String {
    let mut out = String::from("x,y,value\n");
    for y in 0..map.height {
        for x in 0..map.width {
            match map.get(x, y) {
                Some(v) => out.push_str(&format!("{x},{y},{v:.6}\n")),
                None => out.push_str(&format!("{x},{y},\n")),
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub median_seconds: f64,
    pub variance: f64,
    pub samples: Vec<f64>,
}

/// Wall-clock of [`retrieve_signs`] alone: one warm-up call, then the median
/// of `runs` (at least 5) timed calls.
pub fn time_retrieval<T: Real>(
    model: &Model<T>,
    amp: &AmpTensor3D,
    dc_signs: &Plane2D<Sign>,
    runs: usize,
) -> Result<Timing> {
    let runs = runs.max(5);
    retrieve_signs(model, amp, dc_signs)?;
    let mut samples = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        let out = retrieve_signs(model, amp, dc_signs)?;
        samples.push(start.elapsed().as_secs_f64());
        std::hint::black_box(out);
    }
    Ok(Timing {
        median_seconds: median(&samples),
        variance: population_variance(&samples),
        samples,
    })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    values.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n
}

/// Residual payload bits per significant AC sign; `None` when there are no
/// significant AC signs.
pub fn bits_per_sign(container: &Container, amp: &AmpTensor3D) -> Option<f64> {
    let count = significant_ac(amp).count();
    (count > 0).then(|| (container.residual.len() * 8) as f64 / count as f64)
}

/// Number of significant AC positions, the denominator of the metrics above.
pub fn significant_ac_count(amp: &AmpTensor3D) -> usize {
    significant_ac(amp).count()
}

/// Fraction of significant AC signs that are positive.
pub fn positive_fraction(truth: &SignTensor3D, amp: &AmpTensor3D) -> Option<f64> {
    let (mut pos, mut n) = (0usize, 0usize);
    for i in significant_ac(amp) {
        n += 1;
        if truth.as_slice()[i] == Sign::Positive {
            pos += 1;
        }
    }
    (n > 0).then(|| pos as f64 / n as f64)
}
