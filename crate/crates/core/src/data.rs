//! In-memory image classification datasets, rotated subsets and batching.
//!
//! File formats live in the std crate; this module only sees decoded pixels.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::prng::SeededGenerator;
use crate::tensor::Tensor;

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// `N` single-channel 28x28 images with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Vec<f32>,
    labels: Vec<u8>,
    split: Split,
}

impl Dataset {
    pub fn new(images: Vec<f32>, labels: Vec<u8>, split: Split) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if images.len() != labels.len() * IMAGE_PIXELS {
            return Err(Error::BadLength {
                shape: alloc::vec![labels.len(), 1, IMAGE_SIDE, IMAGE_SIDE],
                len: images.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&y| y as usize >= NUM_CLASSES) {
            return Err(Error::LabelOutOfRange { label: label as usize, classes: NUM_CLASSES });
        }
        if images.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("images", "pixel values must lie in [0, 1]"));
        }
        Ok(Dataset { images, labels, split })
    }

    /// Pixels given as bytes, scaled by `1/255`.
    pub fn from_bytes(pixels: &[u8], labels: Vec<u8>, split: Split) -> Result<Self> {
        Self::new(pixels.iter().map(|&p| p as f32 / 255.0).collect(), labels, split)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn image(&self, i: usize) -> &[f32] {
        &self.images[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }

    /// The samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(invalid("indices", alloc::format!("{i} is out of range for {} samples", self.len())));
        }
        let mut images = Vec::with_capacity(indices.len() * IMAGE_PIXELS);
        for &i in indices {
            images.extend_from_slice(self.image(i));
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(images, labels, self.split)
    }

    /// First `n` samples (or all of them).
    pub fn head(&self, n: usize) -> Result<Dataset> {
        let n = n.min(self.len());
        Dataset::new(self.images[..n * IMAGE_PIXELS].to_vec(), self.labels[..n].to_vec(), self.split)
    }

    /// Images as an `(n, 1, 28, 28)` tensor plus labels.
    pub fn batch(&self, indices: &[usize]) -> Result<Batch> {
        if indices.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut data = Vec::with_capacity(indices.len() * IMAGE_PIXELS);
        for &i in indices {
            if i >= self.len() {
                return Err(invalid("indices", alloc::format!("{i} is out of range")));
            }
            data.extend_from_slice(self.image(i));
        }
        Ok(Batch {
            images: Tensor::new(alloc::vec![indices.len(), 1, IMAGE_SIDE, IMAGE_SIDE], data)?,
            labels: indices.iter().map(|&i| self.labels[i] as usize).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub images: Tensor,
    pub labels: Vec<usize>,
}

/// `n` distinct indices below `total`, uniformly chosen by a partial Fisher-Yates shuffle.
pub fn sample_without_replacement(total: usize, n: usize, gen: &mut SeededGenerator) -> Result<Vec<usize>> {
    if n > total {
        return Err(invalid("n", alloc::format!("{n} exceeds the {total} available samples")));
    }
    let mut idx: Vec<usize> = (0..total).collect();
    for i in 0..n {
        let j = i + gen.next_below((total - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(n);
    Ok(idx)
}

/// Uniform random permutation of `0..n`.
pub fn permutation(n: usize, gen: &mut SeededGenerator) -> Vec<usize> {
    sample_without_replacement(n, n, gen).expect("n <= n")
}

/// Rotates a square image counter-clockwise about its center.
///
/// Each destination pixel is mapped back into the source and sampled
/// bilinearly; samples outside the source read as zero.
pub fn rotate_image(src: &[f32], side: usize, angle_deg: f32) -> Vec<f32> {
    let theta = angle_deg.to_radians();
    let (sin, cos) = (libm::sinf(theta), libm::cosf(theta));
    let center = (side as f32 - 1.0) / 2.0;
    let at = |x: i64, y: i64| -> f32 {
        if x < 0 || y < 0 || x >= side as i64 || y >= side as i64 {
            0.0
        } else {
            src[y as usize * side + x as usize]
        }
    };
    let mut out = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let (dx, dy) = (x as f32 - center, y as f32 - center);
            let sx = cos * dx + sin * dy + center;
            let sy = -sin * dx + cos * dy + center;
            let (x0, y0) = (libm::floorf(sx), libm::floorf(sy));
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
            let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
            out.push((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0));
        }
    }
    out
}

/// `n` samples drawn without replacement, each rotated by `angle_deg`.
pub fn make_rotated_subset(ds: &Dataset, n: usize, angle_deg: f32, seed: u32) -> Result<Dataset> {
    let mut gen = SeededGenerator::new(seed);
    let indices = sample_without_replacement(ds.len(), n, &mut gen)?;
    let mut images = Vec::with_capacity(n * IMAGE_PIXELS);
    for &i in &indices {
        images.extend(rotate_image(ds.image(i), IMAGE_SIDE, angle_deg));
    }
    let labels = indices.iter().map(|&i| ds.labels[i]).collect();
    Dataset::new(images, labels, ds.split)
}

/// Index batches for one epoch. With a seed the order is a fresh permutation.
pub fn batch_indices(n: usize, batch: usize, shuffle: Option<&mut SeededGenerator>, drop_last: bool) -> Result<Vec<Vec<usize>>> {
    if batch == 0 {
        return Err(invalid("batch", "must be at least 1"));
    }
    let order = match shuffle {
        Some(gen) => permutation(n, gen),
        None => (0..n).collect(),
    };
    Ok(order
        .chunks(batch)
        .filter(|c| !drop_last || c.len() == batch)
        .map(<[usize]>::to_vec)
        .collect())
}
