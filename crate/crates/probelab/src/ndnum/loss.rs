//! Softmax cross-entropy loss with its gradient.

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Mean cross-entropy of softmax(logits) against integer labels.
///
/// Returns the scalar loss and the gradient with respect to the logits,
/// `(softmax - onehot) / batch_size`.
pub fn softmax_cross_entropy<F: Scalar>(
    logits: &Tensor<F>,
    labels: &[u32],
) -> Result<(F, Tensor<F>)> {
    let (n, c) = match *logits.shape() {
        [n, c] => (n, c),
        ref s => {
            return Err(Error::invalid(format!(
                "softmax_cross_entropy expects [n, classes] logits, got {s:?}"
            )))
        }
    };
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{n} logit rows but {} labels",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= c) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {c} classes"
        )));
    }

    let inv_n = F::from_double(1.0 / n as f64);
    let mut grad = vec![F::zero(); n * c];
    let mut loss = F::zero();
    for row in 0..n {
        let z = &logits.data()[row * c..(row + 1) * c];
        let max = z.iter().fold(F::neg_infinity(), |m, &v| m.max(v));
        let mut sum = F::zero();
        for &v in z {
            sum += (v - max).exp();
        }
        let log_sum = sum.ln() + max;
        let label = labels[row] as usize;
        loss += log_sum - z[label];
        let g = &mut grad[row * c..(row + 1) * c];
        for (j, &v) in z.iter().enumerate() {
            let p = (v - log_sum).exp();
            g[j] = p * inv_n;
        }
        g[label] -= inv_n;
    }
    Ok((loss * inv_n, Tensor::new(&[n, c], grad)?))
}

/// Fraction of rows whose argmax logit equals the label. Argmax ties break
/// to the lowest index.
pub fn top1_accuracy<F: Scalar>(logits: &Tensor<F>, labels: &[u32]) -> f64 {
    let c = logits.shape()[1];
    let mut hits = 0usize;
    for (row, &label) in labels.iter().enumerate() {
        let z = &logits.data()[row * c..(row + 1) * c];
        let mut best = 0usize;
        for (j, &v) in z.iter().enumerate().skip(1) {
            if v > z[best] {
                best = j;
            }
        }
        if best == label as usize {
            hits += 1;
        }
    }
    hits as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_c() {
        let logits = Tensor::<f64>::zeros(&[4, 10]);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 3, 7, 9]).unwrap();
        assert!((loss - 10.0f64.ln()).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn loss_vanishes_with_growing_margin() {
        let mut prev = f64::INFINITY;
        for margin in [1.0, 5.0, 20.0, 60.0] {
            let mut data = vec![0.0f64; 3];
            data[1] = margin;
            let logits = Tensor::new(&[1, 3], data).unwrap();
            let (loss, _) = softmax_cross_entropy(&logits, &[1]).unwrap();
            assert!(loss < prev);
            prev = loss;
        }
        assert!(prev < 1e-20);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // Random 3-class batch; central differences in f64.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(5);
        let n = 6;
        let c = 3;
        let data: Vec<f64> = (0..n * c).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..c as u32)).collect();
        let logits = Tensor::new(&[n, c], data.clone()).unwrap();
        let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();

        let h = 1e-6;
        for i in 0..n * c {
            let mut plus = data.clone();
            plus[i] += h;
            let mut minus = data.clone();
            minus[i] -= h;
            let (lp, _) =
                softmax_cross_entropy(&Tensor::new(&[n, c], plus).unwrap(), &labels).unwrap();
            let (lm, _) =
                softmax_cross_entropy(&Tensor::new(&[n, c], minus).unwrap(), &labels).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let g = grad.data()[i];
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-8);
            assert!(rel < 1e-4, "element {i}: analytic {g} vs fd {fd}");
        }
    }

    #[test]
    fn out_of_range_label_rejected() {
        let logits = Tensor::<f32>::zeros(&[2, 3]);
        assert!(softmax_cross_entropy(&logits, &[0, 3]).is_err());
    }

    #[test]
    fn top1_breaks_ties_to_lowest_index() {
        let logits = Tensor::new(&[1, 3], vec![1.0f32, 1.0, 0.0]).unwrap();
        assert_eq!(top1_accuracy(&logits, &[0]), 1.0);
        assert_eq!(top1_accuracy(&logits, &[1]), 0.0);
    }
}
