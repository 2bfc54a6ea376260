//! Synthetic difficulty-controlled datasets.
//!
//! Each class gets a smooth blob-like prototype: a coarse grid of random
//! signs at `0.5 +- separation/2`, bilinearly upsampled to the image side.
//! The low-frequency structure keeps crop/flip augmentation and resizing
//! meaningful. Samples are the prototype plus per-pixel Gaussian noise,
//! clamped to `[0, 1]` and quantized to 8 bits. Difficulty is dialed in
//! with `sigma` (noise), `separation` (prototype distance), and
//! `label_flip_rate` (fraction of train labels reassigned to other classes).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Dataset;
use crate::error::{Error, Result};

/// Noise levels of the `noise-ladder` preset, in increasing difficulty.
pub const NOISE_LADDER_SIGMAS: [f64; 6] = [0.02, 0.05, 0.1, 0.2, 0.4, 0.8];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub id: String,
    pub classes: usize,
    pub per_class: usize,
    /// Square grayscale images of this side length.
    pub side: usize,
    /// Per-pixel prototype half-range is `separation / 2`.
    pub separation: f64,
    pub sigma: f64,
    pub label_flip_rate: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid("synth: need at least 2 classes"));
        }
        if self.per_class < 2 {
            return Err(Error::invalid("synth: need at least 2 samples per class"));
        }
        if self.side < 1 {
            return Err(Error::invalid("synth: image side must be >= 1"));
        }
        if self.sigma < 0.0 {
            return Err(Error::invalid("synth: sigma must be >= 0"));
        }
        if self.separation < 0.0 {
            return Err(Error::invalid("synth: separation must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.label_flip_rate) {
            return Err(Error::invalid("synth: label flip rate must be in [0, 1)"));
        }
        Ok(())
    }

    /// The six datasets of the noise-ladder preset: identical geometry with
    /// sigma swept over [`NOISE_LADDER_SIGMAS`].
    pub fn noise_ladder(seed: u64) -> Vec<SynthSpec> {
        NOISE_LADDER_SIGMAS
            .iter()
            .enumerate()
            .map(|(i, &sigma)| SynthSpec {
                id: format!("ladder-{i}-sigma{sigma}"),
                classes: 4,
                per_class: 250,
                side: 16,
                separation: 0.12,
                sigma,
                label_flip_rate: 0.0,
                seed: seed.wrapping_add(i as u64),
            })
            .collect()
    }
}

/// Side length of the coarse sign grid a prototype is upsampled from.
const PROTO_GRID: usize = 4;

fn prototypes_with(rng: &mut ChaCha20Rng, spec: &SynthSpec) -> Vec<Vec<f32>> {
    let grid = PROTO_GRID.min(spec.side);
    (0..spec.classes)
        .map(|_| {
            let coarse: Vec<f32> = (0..grid * grid)
                .map(|_| {
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    (0.5 + sign * spec.separation / 2.0) as f32
                })
                .collect();
            let coarse_img = crate::dataset::FloatImages::new(1, grid, grid, 1, coarse)
                .expect("grid buffer is rectangular");
            crate::dataset::resize_bilinear(&coarse_img, spec.side, spec.side)
                .expect("side >= 1")
                .data
        })
        .collect()
}

/// Class prototypes for a spec, as float images in `[0, 1]`.
pub fn prototypes(spec: &SynthSpec) -> Vec<Vec<f32>> {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    prototypes_with(&mut rng, spec)
}

pub fn synth_generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.side * spec.side;
    // Noise and label flips continue on the same stream the prototypes
    // were drawn from.
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let protos = prototypes_with(&mut rng, spec);

    let n_test_per_class = (spec.per_class / 5).max(1);
    let n_train_per_class = spec.per_class - n_test_per_class;

    let mut x_train = Vec::with_capacity(spec.classes * n_train_per_class * d);
    let mut y_train = Vec::with_capacity(spec.classes * n_train_per_class);
    let mut x_test = Vec::with_capacity(spec.classes * n_test_per_class * d);
    let mut y_test = Vec::with_capacity(spec.classes * n_test_per_class);

    for (class, proto) in protos.iter().enumerate() {
        for sample in 0..spec.per_class {
            let mut img = Vec::with_capacity(d);
            for &p in proto {
                let z: f64 = StandardNormal.sample(&mut rng);
                let v = (p as f64 + z * spec.sigma).clamp(0.0, 1.0);
                img.push((v * 255.0).round() as u8);
            }
            if sample < n_train_per_class {
                x_train.extend_from_slice(&img);
                y_train.push(class as u32);
            } else {
                x_test.extend_from_slice(&img);
                y_test.push(class as u32);
            }
        }
    }

    // Reassign a fraction of train labels uniformly to *other* classes.
    let n_train = y_train.len();
    let n_flip = (spec.label_flip_rate * n_train as f64).round() as usize;
    if n_flip > 0 {
        let mut idx: Vec<usize> = (0..n_train).collect();
        for i in 0..n_flip {
            let j = rng.gen_range(i..n_train);
            idx.swap(i, j);
        }
        for &i in &idx[..n_flip] {
            let offset = rng.gen_range(1..spec.classes as u32);
            y_train[i] = (y_train[i] + offset) % spec.classes as u32;
        }
    }

    let ds = Dataset {
        id: spec.id.clone(),
        h: spec.side,
        w: spec.side,
        c: 1,
        n_class: spec.classes,
        x_train,
        y_train,
        x_test,
        y_test,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> SynthSpec {
        SynthSpec {
            id: "synth-test".into(),
            classes: 4,
            per_class: 50,
            side: 8,
            separation: 0.4,
            sigma: 0.0,
            label_flip_rate: 0.0,
            seed: 5,
        }
    }

    /// Independent nearest-prototype classifier used as the difficulty
    /// oracle for generated datasets.
    fn nearest_prototype_accuracy(spec: &SynthSpec, ds: &Dataset) -> f64 {
        let protos = prototypes(spec);
        let d = ds.dim();
        let mut hits = 0usize;
        for (i, &label) in ds.y_test.iter().enumerate() {
            let img = &ds.x_test[i * d..(i + 1) * d];
            let mut best = (f64::INFINITY, 0usize);
            for (c, proto) in protos.iter().enumerate() {
                let dist: f64 = img
                    .iter()
                    .zip(proto)
                    .map(|(&px, &pp)| {
                        let diff = px as f64 / 255.0 - pp as f64;
                        diff * diff
                    })
                    .sum();
                if dist < best.0 {
                    best = (dist, c);
                }
            }
            if best.1 == label as usize {
                hits += 1;
            }
        }
        hits as f64 / ds.y_test.len() as f64
    }

    #[test]
    fn noiseless_set_is_perfectly_separable() {
        let spec = base_spec();
        let ds = synth_generate(&spec).unwrap();
        assert_eq!(nearest_prototype_accuracy(&spec, &ds), 1.0);
        // Every class is internally identical.
        let d = ds.dim();
        let first = &ds.x_train[..d];
        let same_class_later = ds
            .y_train
            .iter()
            .enumerate()
            .skip(1)
            .find(|(_, &y)| y == ds.y_train[0])
            .map(|(i, _)| i)
            .unwrap();
        assert_eq!(
            &ds.x_train[same_class_later * d..(same_class_later + 1) * d],
            first
        );
    }

    #[test]
    fn full_flip_rate_randomizes_train_labels() {
        let mut spec = base_spec();
        spec.label_flip_rate = 1.0 - 1.0 / spec.classes as f64;
        let ds = synth_generate(&spec).unwrap();
        // Train labels are laid out class-major before flipping.
        let per_class_train = spec.per_class - spec.per_class / 5;
        let moved = ds
            .y_train
            .iter()
            .enumerate()
            .filter(|(i, &y)| y != (*i / per_class_train) as u32)
            .count();
        assert!(moved > ds.n_train() / 4, "only {moved} labels moved");
    }

    #[test]
    fn sigma_ladder_degrades_nearest_prototype_accuracy() {
        let mut accs = Vec::new();
        for (i, sigma) in [0.05, 0.1, 0.2, 0.4, 0.8].into_iter().enumerate() {
            let mut spec = base_spec();
            spec.per_class = 100;
            spec.separation = 0.1;
            spec.sigma = sigma;
            spec.seed = 100 + i as u64;
            let ds = synth_generate(&spec).unwrap();
            accs.push(nearest_prototype_accuracy(&spec, &ds));
        }
        for pair in accs.windows(2) {
            assert!(
                pair[1] < pair[0],
                "accuracy not strictly decreasing: {accs:?}"
            );
        }
    }

    #[test]
    fn split_is_stratified_within_one_sample() {
        let ds = synth_generate(&base_spec()).unwrap();
        for split in [&ds.y_train, &ds.y_test] {
            let mut hist = vec![0usize; ds.n_class];
            for &y in split.iter() {
                hist[y as usize] += 1;
            }
            let (min, max) = (hist.iter().min().unwrap(), hist.iter().max().unwrap());
            assert!(max - min <= 1, "{hist:?}");
        }
    }

    #[test]
    fn same_seed_reproduces_identical_datasets() {
        let a = synth_generate(&base_spec()).unwrap();
        let b = synth_generate(&base_spec()).unwrap();
        assert_eq!(a, b);
    }
}
