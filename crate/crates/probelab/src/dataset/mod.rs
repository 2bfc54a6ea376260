//! Dataset representation, binary-format ingestion, bilinear resizing,
//! subsampling, and synthetic difficulty-controlled generation.

mod io;
mod resize;
mod synth;

pub use io::{load_dataset, save_dset, Format};
pub use resize::resize_bilinear;
pub use synth::{prototypes, synth_generate, SynthSpec, NOISE_LADDER_SIGMAS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// A labeled image dataset with a train/test split. Pixels are stored as
/// raw 8-bit values in channel-last row-major order; scoring and training
/// convert to floats in `[0, 1]` at their boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub id: String,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    /// Number of classes; labels lie in `[0, n_class)`.
    pub n_class: usize,
    pub x_train: Vec<u8>,
    pub y_train: Vec<u32>,
    pub x_test: Vec<u8>,
    pub y_test: Vec<u32>,
}

impl Dataset {
    pub fn n_train(&self) -> usize {
        self.y_train.len()
    }

    pub fn n_test(&self) -> usize {
        self.y_test.len()
    }

    /// Flattened per-image dimension `h * w * c`.
    pub fn dim(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_class < 2 {
            return Err(Error::Data(format!(
                "dataset {}: need at least 2 classes, got {}",
                self.id, self.n_class
            )));
        }
        if self.y_train.is_empty() || self.y_test.is_empty() {
            return Err(Error::Data(format!(
                "dataset {}: both splits must be non-empty",
                self.id
            )));
        }
        let d = self.dim();
        if self.x_train.len() != self.n_train() * d || self.x_test.len() != self.n_test() * d {
            return Err(Error::Data(format!(
                "dataset {}: pixel buffer does not match {}x{}x{} images",
                self.id, self.h, self.w, self.c
            )));
        }
        for &y in self.y_train.iter().chain(&self.y_test) {
            if y as usize >= self.n_class {
                return Err(Error::Data(format!(
                    "dataset {}: label {y} out of range for {} classes",
                    self.id, self.n_class
                )));
            }
        }
        Ok(())
    }

    pub fn train_images(&self) -> FloatImages {
        FloatImages::from_u8(&self.x_train, self.n_train(), self.h, self.w, self.c)
    }

    pub fn test_images(&self) -> FloatImages {
        FloatImages::from_u8(&self.x_test, self.n_test(), self.h, self.w, self.c)
    }
}

/// A batch of float images in `[0, 1]`, channel-last row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImages {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f32>,
}

impl FloatImages {
    pub fn new(n: usize, h: usize, w: usize, c: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != n * h * w * c {
            return Err(Error::invalid(format!(
                "expected {} pixel values for {n} images of {h}x{w}x{c}, got {}",
                n * h * w * c,
                data.len()
            )));
        }
        Ok(FloatImages { n, h, w, c, data })
    }

    pub fn from_u8(pixels: &[u8], n: usize, h: usize, w: usize, c: usize) -> Self {
        debug_assert_eq!(pixels.len(), n * h * w * c);
        FloatImages {
            n,
            h,
            w,
            c,
            data: pixels.iter().map(|&p| p as f32 / 255.0).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn select(&self, indices: &[usize]) -> FloatImages {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(self.image(i));
        }
        FloatImages {
            n: indices.len(),
            h: self.h,
            w: self.w,
            c: self.c,
            data,
        }
    }
}

/// Indices of a uniform random subsample without replacement of `n_max`
/// out of `n`, kept in ascending order. Identity when `n <= n_max`.
pub fn subsample_indices(n: usize, n_max: usize, seed: u64) -> Result<Vec<usize>> {
    if n_max < 1 {
        return Err(Error::invalid("subsample: n_max must be >= 1"));
    }
    if n <= n_max {
        return Ok((0..n).collect());
    }
    // Partial Fisher-Yates over the index vector, then sort the selected
    // prefix so sample order is preserved.
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..n_max {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut chosen = idx[..n_max].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Random subsample of the train split (test split is left untouched).
pub fn subsample(dataset: &Dataset, n_max: usize, seed: u64) -> Result<Dataset> {
    let indices = subsample_indices(dataset.n_train(), n_max, seed)?;
    if indices.len() == dataset.n_train() {
        return Ok(dataset.clone());
    }
    let d = dataset.dim();
    let mut x_train = Vec::with_capacity(indices.len() * d);
    let mut y_train = Vec::with_capacity(indices.len());
    for &i in &indices {
        x_train.extend_from_slice(&dataset.x_train[i * d..(i + 1) * d]);
        y_train.push(dataset.y_train[i]);
    }
    Ok(Dataset {
        id: dataset.id.clone(),
        h: dataset.h,
        w: dataset.w,
        c: dataset.c,
        n_class: dataset.n_class,
        x_train,
        y_train,
        x_test: dataset.x_test.clone(),
        y_test: dataset.y_test.clone(),
    })
}
