//! Sequential layer stacks: construction from [`LayerSpec`]s, forward,
//! and reverse-mode backward.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::init::he_init;
use super::layers::{BatchNorm, Conv2d, Dense, Flatten, LayerSpec, MaxPool2x2, Mode, Relu};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum Layer<F: Scalar> {
    Conv2d(Conv2d<F>),
    BatchNorm(BatchNorm<F>),
    MaxPool2x2(MaxPool2x2),
    Relu(Relu<F>),
    Flatten(Flatten),
    Dense(Dense<F>),
}

/// A sequential network. Parameters are visited in layer order, weights
/// before biases, so optimizer state and reductions are reproducible.
#[derive(Debug, Clone)]
pub struct Net<F: Scalar> {
    layers: Vec<Layer<F>>,
}

impl<F: Scalar> Net<F> {
    /// Build a network with He-initialized conv/dense weights (`gain`,
    /// per-layer seeds derived from `seed`), zero biases, and identity
    /// batch-norm affine parameters.
    pub fn from_specs(specs: &[LayerSpec], gain: f64, seed: u64) -> Result<Self> {
        let mut seeder = ChaCha20Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let layer = match *spec {
                LayerSpec::Conv2d {
                    kernel_h,
                    kernel_w,
                    in_ch,
                    out_ch,
                    pad,
                } => {
                    let fan_in = kernel_h * kernel_w * in_ch;
                    let weight = he_init(&[fan_in, out_ch], fan_in, gain, seeder.next_u64())?;
                    Layer::Conv2d(Conv2d::new(
                        kernel_h,
                        kernel_w,
                        in_ch,
                        out_ch,
                        pad,
                        weight,
                        Tensor::zeros(&[out_ch]),
                    ))
                }
                LayerSpec::BatchNorm {
                    channels,
                    eps,
                    momentum,
                } => Layer::BatchNorm(BatchNorm::new(channels, eps, momentum)),
                LayerSpec::MaxPool2x2 => Layer::MaxPool2x2(MaxPool2x2::default()),
                LayerSpec::Relu => Layer::Relu(Relu::default()),
                LayerSpec::Flatten => Layer::Flatten(Flatten::default()),
                LayerSpec::Dense { in_dim, out_dim } => {
                    let weight = he_init(&[in_dim, out_dim], in_dim, gain, seeder.next_u64())?;
                    Layer::Dense(Dense::new(in_dim, out_dim, weight, Tensor::zeros(&[out_dim])))
                }
            };
            layers.push(layer);
        }
        Ok(Net { layers })
    }

    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    /// Run the stack on a batch. Shape errors report the offending layer
    /// index. Train mode retains the intermediates `backward` needs.
    pub fn forward(&mut self, batch: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            x = match layer {
                Layer::Conv2d(l) => l.forward(&x, mode),
                Layer::BatchNorm(l) => l.forward(&x, mode),
                Layer::MaxPool2x2(l) => l.forward(&x, mode),
                Layer::Relu(l) => l.forward(&x, mode),
                Layer::Flatten(l) => l.forward(&x, mode),
                Layer::Dense(l) => l.forward(&x, mode),
            }
            .map_err(|e| tag_layer(e, i))?;
        }
        Ok(x)
    }

    /// Propagate a loss gradient back through the stack, accumulating
    /// parameter gradients. Requires a preceding train-mode `forward`.
    pub fn backward(&mut self, dlogits: &Tensor<F>) -> Result<()> {
        let mut g = dlogits.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            g = match layer {
                Layer::Conv2d(l) => l.backward(&g),
                Layer::BatchNorm(l) => l.backward(&g),
                Layer::MaxPool2x2(l) => l.backward(&g),
                Layer::Relu(l) => l.backward(&g),
                Layer::Flatten(l) => l.backward(&g),
                Layer::Dense(l) => l.backward(&g),
            }
            .map_err(|e| tag_layer(e, i))?;
        }
        Ok(())
    }

    /// Visit every trainable parameter tensor in a fixed order.
    pub fn visit_params(&mut self, mut f: impl FnMut(&mut Tensor<F>)) {
        for layer in self.layers.iter_mut() {
            match layer {
                Layer::Conv2d(l) => {
                    f(&mut l.weight);
                    f(&mut l.bias);
                }
                Layer::BatchNorm(l) => {
                    f(&mut l.gamma);
                    f(&mut l.beta);
                }
                Layer::Dense(l) => {
                    f(&mut l.weight);
                    f(&mut l.bias);
                }
                Layer::MaxPool2x2(_) | Layer::Relu(_) | Layer::Flatten(_) => {}
            }
        }
    }

    pub fn zero_grads(&mut self) {
        self.visit_params(|p| p.zero_grad());
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(|p| n += p.numel());
        n
    }

    /// Convert all parameters and running statistics to another scalar type.
    /// Used to rerun an f32 model in f64 for gradient checking.
    pub fn cast<G: Scalar>(&self) -> Net<G> {
        let layers = self
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Conv2d(l) => Layer::Conv2d(Conv2d::new(
                    l.kernel_h,
                    l.kernel_w,
                    l.in_ch,
                    l.out_ch,
                    l.pad,
                    l.weight.cast(),
                    l.bias.cast(),
                )),
                Layer::BatchNorm(l) => {
                    let mut bn = BatchNorm::new(l.channels, l.eps, l.momentum);
                    bn.gamma = l.gamma.cast();
                    bn.beta = l.beta.cast();
                    bn.running_mean = l.running_mean.iter().map(|v| G::from_double(v.to_double())).collect();
                    bn.running_var = l.running_var.iter().map(|v| G::from_double(v.to_double())).collect();
                    Layer::BatchNorm(bn)
                }
                Layer::MaxPool2x2(_) => Layer::MaxPool2x2(MaxPool2x2::default()),
                Layer::Relu(_) => Layer::Relu(Relu::default()),
                Layer::Flatten(_) => Layer::Flatten(Flatten::default()),
                Layer::Dense(l) => {
                    Layer::Dense(Dense::new(l.in_dim, l.out_dim, l.weight.cast(), l.bias.cast()))
                }
            })
            .collect();
        Net { layers }
    }
}

fn tag_layer(e: Error, layer: usize) -> Error {
    match e {
        Error::Shape { msg, .. } => Error::Shape { layer, msg },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_specs() -> Vec<LayerSpec> {
        vec![
            LayerSpec::conv3x3(1, 2),
            LayerSpec::batch_norm(2),
            LayerSpec::MaxPool2x2,
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense {
                in_dim: 2 * 2 * 2,
                out_dim: 3,
            },
        ]
    }

    #[test]
    fn forward_produces_logit_shape() {
        let mut net = Net::<f32>::from_specs(&tiny_specs(), 1.0, 0).unwrap();
        let x = Tensor::zeros(&[5, 4, 4, 1]);
        let y = net.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.shape(), &[5, 3]);
    }

    #[test]
    fn shape_error_reports_layer_index() {
        let mut net = Net::<f32>::from_specs(&tiny_specs(), 1.0, 0).unwrap();
        let x = Tensor::zeros(&[5, 4, 4, 3]); // wrong channel count
        match net.forward(&x, Mode::Eval) {
            Err(Error::Shape { layer, .. }) => assert_eq!(layer, 0),
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn zero_loss_gradient_gives_zero_parameter_gradients() {
        let mut net = Net::<f32>::from_specs(&tiny_specs(), 1.0, 1).unwrap();
        let x = Tensor::full(&[2, 4, 4, 1], 0.7f32);
        let y = net.forward(&x, Mode::Train).unwrap();
        net.backward(&Tensor::zeros(y.shape())).unwrap();
        net.visit_params(|p| {
            if let Some(g) = p.grad() {
                assert!(g.iter().all(|&v| v == 0.0));
            }
        });
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let mut net = Net::<f32>::from_specs(&tiny_specs(), 1.0, 1).unwrap();
        let g = Tensor::zeros(&[2, 3]);
        assert!(matches!(net.backward(&g), Err(Error::State(_))));
    }

    #[test]
    fn same_seed_builds_identical_nets() {
        let mut a = Net::<f32>::from_specs(&tiny_specs(), 1.0, 9).unwrap();
        let mut b = Net::<f32>::from_specs(&tiny_specs(), 1.0, 9).unwrap();
        let mut va = Vec::new();
        a.visit_params(|p| va.extend_from_slice(p.data()));
        let mut vb = Vec::new();
        b.visit_params(|p| vb.extend_from_slice(p.data()));
        assert_eq!(va, vb);
    }
}
