//! Verify the analytic backward pass of a small conv net against central
//! finite differences, running the network in f64.

use probelab::ndnum::gradcheck::{central_diff, max_relative_error};
use probelab::ndnum::{softmax_cross_entropy, LayerSpec, Mode, Net, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn main() -> probelab::Result<()> {
    let specs = vec![
        LayerSpec::conv3x3(1, 3),
        LayerSpec::batch_norm(3),
        LayerSpec::MaxPool2x2,
        LayerSpec::Relu,
        LayerSpec::Flatten,
        LayerSpec::Dense {
            in_dim: 4 * 4 * 3,
            out_dim: 3,
        },
    ];
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let batch: Vec<f64> = (0..2 * 8 * 8).map(|_| rng.gen_range(0.0..1.0)).collect();
    let x = Tensor::new(&[2, 8, 8, 1], batch.clone())?;
    let labels = [0u32, 2];

    // Analytic gradients.
    let mut net: Net<f64> = Net::from_specs(&specs, 1.0, 7)?;
    let logits = net.forward(&x, Mode::Train)?;
    let (loss, dlogits) = softmax_cross_entropy(&logits, &labels)?;
    net.backward(&dlogits)?;
    println!("loss = {loss:.6}");

    // Finite differences over every trainable parameter, one tensor at a
    // time. The loss closure re-runs the whole forward pass.
    let mut param_idx = 0;
    let mut worst = 0.0f64;
    let mut analytic_net = net.clone();
    analytic_net.visit_params(|p| {
        let analytic = p.grad().expect("backward filled gradients").to_vec();
        let base = p.data().to_vec();
        let target = param_idx;
        let fd = central_diff(
            &base,
            |values| {
                let mut probe_net: Net<f64> = Net::from_specs(&specs, 1.0, 7).expect("same specs");
                let mut i = 0;
                probe_net.visit_params(|q| {
                    if i == target {
                        q.data_mut().copy_from_slice(values);
                    }
                    i += 1;
                });
                let logits = probe_net
                    .forward(&Tensor::new(&[2, 8, 8, 1], batch.clone()).unwrap(), Mode::Train)
                    .expect("forward");
                softmax_cross_entropy(&logits, &labels).expect("loss").0
            },
            1e-5,
        );
        let err = max_relative_error(&analytic, &fd);
        println!(
            "param tensor {param_idx}: {} values, max relative error {err:.2e}",
            base.len()
        );
        worst = worst.max(err);
        param_idx += 1;
    });
    println!("worst relative error: {worst:.2e}");
    assert!(worst < 1e-4, "gradient check failed");
    println!("all gradients match finite differences");
    Ok(())
}
