//! Stochastic view generation and multiview batch assembly.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::InputShape;
use crate::error::{Error, Result};
use crate::losses::MultiviewIndex;
use crate::memory::Sample;
use crate::numeric::Tensor;

/// Parameters of the image transform chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageAugment {
    /// Zero padding before the random crop back to full size.
    pub crop_pad: usize,
    pub flip_prob: f64,
    /// Brightness and contrast factors are drawn from `1 ± jitter`, per channel.
    pub jitter: f64,
    pub grayscale_prob: f64,
}

impl Default for ImageAugment {
    fn default() -> Self {
        Self {
            crop_pad: 4,
            flip_prob: 0.5,
            jitter: 0.4,
            grayscale_prob: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorAugment {
    pub noise_std: f64,
    pub dropout: f64,
}

impl Default for VectorAugment {
    fn default() -> Self {
        Self {
            noise_std: 0.1,
            dropout: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Augmentation {
    Identity,
    Vector(VectorAugment),
    Image(ImageAugment),
}

impl Augmentation {
    pub fn default_for(shape: InputShape) -> Self {
        match shape {
            InputShape::Vector(_) => Augmentation::Vector(VectorAugment::default()),
            InputShape::Image { .. } => Augmentation::Image(ImageAugment::default()),
        }
    }

    /// One random draw of the transform applied to `x`.
    pub fn apply<R: Rng + ?Sized>(&self, x: &[f64], shape: InputShape, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Augmentation::Identity => Ok(x.to_vec()),
            Augmentation::Vector(v) => {
                let noise = Normal::new(0.0, v.noise_std)
                    .map_err(|e| Error::Config(format!("noise_std: {e}")))?;
                Ok(x.iter()
                    .map(|&xi| {
                        let kept = if rng.random::<f64>() < v.dropout { 0.0 } else { xi };
                        kept + noise.sample(rng)
                    })
                    .collect())
            }
            Augmentation::Image(a) => {
                let InputShape::Image {
                    channels,
                    height,
                    width,
                } = shape
                else {
                    return Err(Error::Config("image augmentation on non-image input".into()));
                };
                Ok(augment_image(x, channels, height, width, a, rng))
            }
        }
    }
}

fn augment_image<R: Rng + ?Sized>(
    x: &[f64],
    channels: usize,
    height: usize,
    width: usize,
    a: &ImageAugment,
    rng: &mut R,
) -> Vec<f64> {
    let plane = height * width;
    let pad = a.crop_pad as i64;
    let dy = rng.random_range(-pad..=pad) as isize;
    let dx = rng.random_range(-pad..=pad) as isize;
    let flip = rng.random::<f64>() < a.flip_prob;
    let mut out = vec![0.0; x.len()];
    for c in 0..channels {
        for y in 0..height {
            let sy = y as isize + dy;
            if sy < 0 || sy >= height as isize {
                continue;
            }
            for xx in 0..width {
                let col = if flip { width - 1 - xx } else { xx };
                let sx = col as isize + dx;
                if sx < 0 || sx >= width as isize {
                    continue;
                }
                out[c * plane + y * width + xx] = x[c * plane + sy as usize * width + sx as usize];
            }
        }
    }
    for c in 0..channels {
        let p = &mut out[c * plane..(c + 1) * plane];
        let brightness = rng.random_range(1.0 - a.jitter..=1.0 + a.jitter);
        let contrast = rng.random_range(1.0 - a.jitter..=1.0 + a.jitter);
        let mean = p.iter().sum::<f64>() / plane as f64;
        for v in p.iter_mut() {
            *v = ((*v - mean) * contrast + mean) * brightness;
        }
    }
    if channels == 3 && rng.random::<f64>() < a.grayscale_prob {
        for k in 0..plane {
            let g = 0.299 * out[k] + 0.587 * out[plane + k] + 0.114 * out[2 * plane + k];
            out[k] = g;
            out[plane + k] = g;
            out[2 * plane + k] = g;
        }
    }
    out
}

/// Two independently augmented views of every source. Rows `0..b` hold the
/// first views in batch order and rows `b..2b` the second, so the pair of view
/// `i` is `(i + b) mod 2b`.
pub fn make_multiview<R: Rng + ?Sized>(
    batch: &[(Sample, Option<usize>)],
    shape: InputShape,
    aug: &Augmentation,
    rng: &mut R,
) -> Result<(Tensor, MultiviewIndex)> {
    if batch.is_empty() {
        return Err(Error::Config("multiview batch needs at least one source".into()));
    }
    let dim = shape.len();
    let mut data = Vec::with_capacity(2 * batch.len() * dim);
    for _view in 0..2 {
        for (s, _) in batch {
            data.extend(aug.apply(&s.features, shape, rng)?);
        }
    }
    let views = Tensor::matrix(2 * batch.len(), dim, data)?;
    let labels: Vec<Option<usize>> = batch.iter().map(|(_, y)| *y).collect();
    Ok((views, MultiviewIndex::from_sources(&labels)))
}

/// One augmented view per source, for the cross-entropy methods.
pub fn make_single_view<R: Rng + ?Sized>(
    batch: &[(Sample, usize)],
    shape: InputShape,
    aug: &Augmentation,
    rng: &mut R,
) -> Result<(Tensor, Vec<usize>)> {
    let dim = shape.len();
    let mut data = Vec::with_capacity(batch.len() * dim);
    for (s, _) in batch {
        data.extend(aug.apply(&s.features, shape, rng)?);
    }
    let views = Tensor::matrix(batch.len(), dim, data)?;
    Ok((views, batch.iter().map(|(_, y)| *y).collect()))
}
