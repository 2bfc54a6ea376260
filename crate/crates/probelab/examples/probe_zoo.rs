//! The ten probe-net architectures with their parameter counts and
//! analytic FLOP estimates, for CIFAR-shaped input at three class counts.

use probelab::probe::{build_probe, ProbeKind};

fn main() -> probelab::Result<()> {
    let input = (32, 32, 3);
    println!("input {}x{}x{}", input.0, input.1, input.2);
    println!("{:<14} {:>12} {:>12} {:>12}", "kind", "params C=2", "params C=10", "params C=100");
    for kind in ProbeKind::ALL {
        let p: Vec<String> = [2usize, 10, 100]
            .iter()
            .map(|&c| {
                build_probe(kind, input, c)
                    .map(|s| s.param_count.to_string())
                    .unwrap_or_else(|_| "-".into())
            })
            .collect();
        println!("{:<14} {:>12} {:>12} {:>12}", kind.name(), p[0], p[1], p[2]);
    }

    println!("\nper-inference FLOP estimates at C=10:");
    for kind in ProbeKind::ALL {
        let spec = build_probe(kind, input, 10)?;
        println!("  {:<14} {:>10.2} MFLOP", kind.name(), spec.flops as f64 / 1e6);
    }
    Ok(())
}
