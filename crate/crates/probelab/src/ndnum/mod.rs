//! Minimal dense-tensor numerics with reverse-mode differentiation for the
//! layer types the probe nets need, plus He initialization and RMSProp.
//!
//! Training runs in `f32`; every operation is also instantiated for `f64`,
//! which exists solely for finite-difference gradient checking. There is no
//! graph engine: networks are sequential layer stacks, reductions run in a
//! fixed order, and identical seeds give bit-identical results.

pub mod gradcheck;
mod init;
mod layers;
mod loss;
mod net;
mod optim;
mod tensor;

pub use init::he_init;
pub use layers::{BatchNorm, Conv2d, Dense, FeatureShape, Flatten, LayerSpec, MaxPool2x2, Mode, Relu};
pub use loss::{softmax_cross_entropy, top1_accuracy};
pub use net::{Layer, Net};
pub use optim::{rmsprop_step, RmsProp};
pub use tensor::{Scalar, Tensor};
