//! Run all six silhouette scoring pipelines on one dataset and compare
//! scores and timings (the DSSIM-on-raw-pixels pipeline S2 is the slow
//! reference the others are measured against).

use probelab::dataset::{synth_generate, SynthSpec};
use probelab::silhouette::{silhouette_pipeline, Pipeline, SilhouetteOptions};
use probelab::transform::save_embeddings;

fn main() -> probelab::Result<()> {
    let ds = synth_generate(&SynthSpec {
        id: "sil-demo".into(),
        classes: 4,
        per_class: 75,
        side: 16,
        separation: 0.3,
        sigma: 0.2,
        label_flip_rate: 0.0,
        seed: 11,
    })?;

    // Pipeline S6 scores precomputed per-sample embeddings; fake an
    // 8-wide embedding file derived from class and noise structure.
    let emb_dir = std::path::Path::new("target/example_out");
    std::fs::create_dir_all(emb_dir).expect("create output dir");
    let emb_path = emb_dir.join("sil-demo.emb");
    let width = 8usize;
    let values: Vec<f32> = (0..ds.n_train())
        .flat_map(|i| {
            let label = ds.y_train[i] as f32;
            (0..width).map(move |j| label * 2.0 + ((i * 31 + j) % 17) as f32 * 0.01)
        })
        .collect();
    save_embeddings(&emb_path, ds.n_train(), width, &values)?;

    let opts = SilhouetteOptions {
        n_max: 1000,
        seed: 42,
        embedding_path: Some(emb_path),
        embedding_width: width,
    };

    println!("pipeline  transform  distance   score      time     vs S2");
    let mut s2_time = None;
    let mut rows = Vec::new();
    for pipeline in Pipeline::ALL {
        let r = silhouette_pipeline(&ds, pipeline, &opts)?;
        if pipeline == Pipeline::S2 {
            s2_time = Some(r.wall_seconds);
        }
        rows.push(r);
    }
    let s2_time = s2_time.expect("S2 ran");
    for r in rows {
        let transform = match r.pipeline {
            Pipeline::S1 | Pipeline::S2 => "none",
            Pipeline::S3 | Pipeline::S4 => "resize8",
            Pipeline::S5 => "pca10",
            Pipeline::S6 => "embedding",
        };
        println!(
            "{:<9} {:<10} {:<10} {:>8.4}  {:>7.3}s  {:>6.1}x",
            r.pipeline.name(),
            transform,
            r.pipeline.metric().name(),
            r.score,
            r.wall_seconds,
            s2_time / r.wall_seconds
        );
    }
    Ok(())
}
