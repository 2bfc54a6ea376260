//! Train the regular probe net on an easy and a hard dataset and watch
//! the early epochs separate them.

use probelab::dataset::{synth_generate, SynthSpec};
use probelab::probe::{build_probe, train_probe, ProbeData, ProbeKind, TrainConfig};

fn main() -> probelab::Result<()> {
    for (name, sigma) in [("easy", 0.05), ("hard", 0.6)] {
        let ds = synth_generate(&SynthSpec {
            id: name.into(),
            classes: 4,
            per_class: 250,
            side: 16,
            separation: 0.3,
            sigma,
            label_flip_rate: 0.0,
            seed: 21,
        })?;
        let data = ProbeData::from_dataset(&ds, None)?;
        let spec = build_probe(ProbeKind::Regular, data.input_shape(), ds.n_class)?;
        println!(
            "{name}: sigma={sigma}, probe={} ({} params, ~{:.2} MFLOP/inference)",
            spec.kind.name(),
            spec.param_count,
            spec.flops as f64 / 1e6
        );
        let curve = train_probe(
            &spec,
            &data,
            &TrainConfig {
                epochs: 8,
                seed: 1,
                augment: false,
                ..Default::default()
            },
        )?;
        for (epoch, (top1, loss)) in curve.top1.iter().zip(&curve.train_loss).enumerate() {
            println!("  epoch {:>2}: test top1 {:.3}  train loss {:.3}", epoch + 1, top1, loss);
        }
    }
    Ok(())
}
