//! He weight initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Draw a tensor with i.i.d. normal entries of mean 0 and standard deviation
/// `gain * sqrt(2 / fan_in)`. Deterministic for a given seed.
pub fn he_init<F: Scalar>(shape: &[usize], fan_in: usize, gain: f64, seed: u64) -> Result<Tensor<F>> {
    if fan_in == 0 {
        return Err(Error::invalid("he_init: fan_in must be >= 1"));
    }
    if gain <= 0.0 {
        return Err(Error::invalid("he_init: gain must be > 0"));
    }
    let std = gain * (2.0 / fan_in as f64).sqrt();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let numel: usize = shape.iter().product();
    // Draws happen in f64 so the f32 and f64 instantiations see the same
    // underlying stream.
    let data: Vec<F> = (0..numel)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            F::from_double(z * std)
        })
        .collect();
    Tensor::new(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_variance_when_fan_in_is_two() {
        // std = gain * sqrt(2/2) = 1
        let t: Tensor<f64> = he_init(&[100_000], 2, 1.0, 7).unwrap();
        let n = t.numel() as f64;
        let mean: f64 = t.data().iter().sum::<f64>() / n;
        let var: f64 = t.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.05, "sample variance {var}");
    }

    #[test]
    fn sample_std_tracks_fan_in() {
        let t: Tensor<f64> = he_init(&[100_000], 512, 1.0, 11).unwrap();
        let n = t.numel() as f64;
        let mean: f64 = t.data().iter().sum::<f64>() / n;
        let std = (t.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let expected = (2.0f64 / 512.0).sqrt(); // 0.0625
        assert!(
            (std - expected).abs() / expected < 0.05,
            "std {std} vs {expected}"
        );
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a: Tensor<f32> = he_init(&[3, 3, 4, 8], 36, 1.0, 42).unwrap();
        let b: Tensor<f32> = he_init(&[3, 3, 4, 8], 36, 1.0, 42).unwrap();
        assert_eq!(a.data(), b.data());
        let c: Tensor<f32> = he_init(&[3, 3, 4, 8], 36, 1.0, 43).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn zero_fan_in_rejected() {
        assert!(he_init::<f32>(&[4], 0, 1.0, 0).is_err());
    }
}
