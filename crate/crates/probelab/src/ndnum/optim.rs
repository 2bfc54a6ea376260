//! RMSProp optimizer.

use super::net::Net;
use super::tensor::Scalar;

/// RMSProp update:
/// `v <- rho * v + (1 - rho) * g^2`, `theta <- theta - lr * g / (sqrt(v) + eps)`.
pub fn rmsprop_step<F: Scalar>(
    params: &mut [F],
    grads: &[F],
    v: &mut [F],
    lr: f64,
    rho: f64,
    eps: f64,
) {
    debug_assert_eq!(params.len(), grads.len());
    debug_assert_eq!(params.len(), v.len());
    let lr = F::from_double(lr);
    let rho = F::from_double(rho);
    let one_minus_rho = F::one() - rho;
    let eps = F::from_double(eps);
    for ((p, &g), vi) in params.iter_mut().zip(grads).zip(v.iter_mut()) {
        *vi = rho * *vi + one_minus_rho * g * g;
        *p -= lr * g / (vi.sqrt() + eps);
    }
}

/// Per-parameter RMSProp state for a whole network. The squared-gradient
/// buffers follow the network's fixed parameter visit order.
#[derive(Debug, Clone)]
pub struct RmsProp<F: Scalar> {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> RmsProp<F> {
    pub fn new(lr: f64) -> Self {
        RmsProp {
            lr,
            rho: 0.9,
            eps: 1e-8,
            v: Vec::new(),
        }
    }

    /// Apply one update to every parameter that has a gradient buffer.
    pub fn step(&mut self, net: &mut Net<F>) {
        let (lr, rho, eps) = (self.lr, self.rho, self.eps);
        let v = &mut self.v;
        let mut idx = 0;
        net.visit_params(|p| {
            if v.len() == idx {
                v.push(vec![F::zero(); p.numel()]);
            }
            if let (data, Some(grad)) = p.data_and_grad() {
                rmsprop_step(data, grad, &mut v[idx], lr, rho, eps);
            }
            idx += 1;
        });
    }
}
