//! Estimate how hard an image dataset is to classify, before training any
//! full-size model on it.
//!
//! Three scoring pipelines map a labeled image dataset to a single scalar
//! difficulty score:
//!
//! - **Silhouette** ([`silhouette`]): pairwise distances (MSE or DSSIM) on
//!   optionally transformed images, reduced to the classic silhouette score.
//! - **k-means** ([`kmeans`]): cluster into `C` groups from class-mean
//!   initialization, then compare clusters to labels with AECM, AMI, ARI,
//!   homogeneity, completeness, or v-measure.
//! - **Probe nets** ([`probe`]): train a deliberately small CNN for a few
//!   epochs and use its early test accuracy as the score.
//!
//! The [`harness`] module regresses scores against reference accuracies
//! (R², mean gap, speedup tables) and renders CSV/SVG reports; [`dataset`]
//! handles IDX/CIFAR/dset/PNG ingestion and synthetic dataset generation;
//! [`ndnum`] is the small tensor/autodiff engine the probe nets train on.
//!
//! Every pipeline is deterministic given its seed.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example synth_datasets      # generate difficulty-controlled data
//! cargo run --release --example silhouette_pipelines
//! cargo run --release --example kmeans_scoring
//! cargo run --release --example probe_training
//! cargo run --release --example probe_zoo           # the ten probe architectures
//! cargo run --release --example evaluate_scores     # score -> regression report
//! cargo run --release --example gradient_check
//! ```
//!
//! The same flows are scriptable through the thin `probelab` binary
//! (`score`, `eval`, `synth` subcommands); see the crate README.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod kmeans;
pub mod matrix;
pub mod probe;
pub mod silhouette;
pub mod transform;
pub mod ndnum;

pub use error::{Error, Result};
