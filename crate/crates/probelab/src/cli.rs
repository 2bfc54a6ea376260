//! Command-line front end: `score`, `eval`, and `synth` subcommands wiring
//! datasets, scoring pipelines, and the evaluation harness into
//! reproducible batch runs.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{load_dataset, save_dset, synth_generate, Dataset, Format, SynthSpec};
use crate::error::{Error, Result};
use crate::harness::{append_scores, emit_report, evaluate, read_reference, read_scores, Method, ScoreRecord};
use crate::kmeans::{kmeans_score_pipeline, ClusterMetric};
use crate::probe::{probe_score, ProbeKind, ProbeOptions, ProbeScore};
use crate::silhouette::{silhouette_pipeline, Pipeline, SilhouetteOptions};
use crate::transform::{TransformSpec, EMBEDDING_WIDTH};

#[derive(Parser)]
#[command(
    name = "probelab",
    version,
    about = "Estimate the classification difficulty of image datasets",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score datasets with a silhouette, k-means, or probe-net pipeline.
    Score(ScoreArgs),
    /// Regress recorded scores against reference accuracies and render
    /// the report.
    Eval(EvalArgs),
    /// Generate synthetic difficulty-controlled datasets.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Dset,
    Idx,
    CifarBin,
    PngDir,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Dset => Format::Dset,
            FormatArg::Idx => Format::Idx,
            FormatArg::CifarBin => Format::CifarBin,
            FormatArg::PngDir => Format::PngDir,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Silhouette,
    Kmeans,
    Probenet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TransformArg {
    None,
    Resize8,
    Pca10,
    Embedding,
}

#[derive(Args)]
struct ScoreArgs {
    /// Dataset path(s); repeat the flag to score several datasets.
    #[arg(long = "dataset", required = true, num_args = 1..)]
    datasets: Vec<PathBuf>,

    #[arg(long, value_enum, default_value_t = FormatArg::Dset)]
    format: FormatArg,

    #[arg(long, value_enum)]
    method: MethodArg,

    /// Silhouette pipeline(s) S1..S6.
    #[arg(long = "pipeline", value_delimiter = ',', default_values_t = [Pipeline::S3])]
    pipelines: Vec<Pipeline>,

    /// Pretransformation(s) for k-means scoring.
    #[arg(long = "transform", value_enum, value_delimiter = ',', default_values_t = [TransformArg::None])]
    transforms: Vec<TransformArg>,

    /// Agreement metric(s) for k-means scoring.
    #[arg(long = "metric", value_delimiter = ',', default_values_t = [ClusterMetric::Aecm])]
    metrics: Vec<ClusterMetric>,

    /// Probe-net kind(s).
    #[arg(long = "probe", value_delimiter = ',', default_values_t = [ProbeKind::Regular])]
    probes: Vec<ProbeKind>,

    /// Training epochs for probe-net scoring.
    #[arg(long, default_value_t = 5)]
    epochs: usize,

    /// Precomputed embedding file (pipeline S6 / embedding transform).
    #[arg(long)]
    embedding: Option<PathBuf>,

    /// Expected embedding row width.
    #[arg(long, default_value_t = EMBEDDING_WIDTH)]
    embedding_width: usize,

    /// Subsample cap for silhouette scoring.
    #[arg(long, default_value_t = 1000)]
    n_max: usize,

    /// Probe input side ("native" keeps the dataset resolution).
    #[arg(long, default_value = "32")]
    probe_size: String,

    /// Disable train-time crop/flip augmentation for probe nets.
    #[arg(long)]
    no_augment: bool,

    #[arg(long, env = "DIFFICULTY_SEED", default_value_t = 42)]
    seed: u64,

    /// Scores CSV to append to (header written on creation).
    #[arg(long, default_value = "scores.csv")]
    out: PathBuf,

    /// Optional per-epoch curve CSV. Only valid for a single probe-net run.
    #[arg(long)]
    curve_out: Option<PathBuf>,

    /// Fan out independent (dataset x variant) runs over this many threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,

    /// Report a fixed wall time (1.0) so output files are byte-reproducible.
    #[arg(long)]
    repro: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, default_value = "scores.csv")]
    scores: PathBuf,

    /// Reference accuracies CSV (dataset_id,top1).
    #[arg(long)]
    reference: PathBuf,

    /// Output directory for report.csv, scores.csv, and scatter SVGs.
    #[arg(long, default_value = "report")]
    out: PathBuf,

    /// Speedup baseline as "method/variant" (default: silhouette/S2 when
    /// present, else the slowest group).
    #[arg(long)]
    baseline: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    /// Named dataset family; `noise-ladder` emits six datasets of
    /// increasing pixel noise.
    #[arg(long, conflicts_with_all = ["classes", "per_class", "side", "separation", "sigma", "flip"])]
    preset: Option<String>,

    #[arg(long, default_value_t = 4)]
    classes: usize,

    #[arg(long, default_value_t = 250)]
    per_class: usize,

    #[arg(long, default_value_t = 16)]
    side: usize,

    #[arg(long, default_value_t = 0.3)]
    separation: f64,

    #[arg(long, default_value_t = 0.1)]
    sigma: f64,

    /// Fraction of train labels reassigned to other classes.
    #[arg(long, default_value_t = 0.0)]
    flip: f64,

    /// Dataset id (defaults to a parameter-derived name).
    #[arg(long)]
    id: Option<String>,

    #[arg(long, env = "DIFFICULTY_SEED", default_value_t = 42)]
    seed: u64,

    /// Output directory for .dset files and manifest.csv.
    #[arg(long)]
    out: PathBuf,
}

/// Parse arguments and run. Returns the process exit code; argument errors
/// exit with code 2 directly through clap.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score(args) => cmd_score(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// One unit of scoring work: a dataset index and a variant to run on it.
#[derive(Debug, Clone)]
enum Variant {
    Silhouette(Pipeline),
    Kmeans(TransformArg, ClusterMetric),
    Probe(ProbeKind),
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let probe_side = match args.probe_size.as_str() {
        "native" => None,
        s => Some(s.parse::<usize>().map_err(|_| {
            Error::invalid(format!("--probe-size must be a number or \"native\", got {s:?}"))
        })?),
    };
    if probe_side == Some(0) {
        return Err(Error::invalid("--probe-size must be >= 1"));
    }

    let variants: Vec<Variant> = match args.method {
        MethodArg::Silhouette => args.pipelines.iter().copied().map(Variant::Silhouette).collect(),
        MethodArg::Kmeans => args
            .transforms
            .iter()
            .flat_map(|&t| args.metrics.iter().map(move |&m| Variant::Kmeans(t, m)))
            .collect(),
        MethodArg::Probenet => args.probes.iter().copied().map(Variant::Probe).collect(),
    };

    if args.curve_out.is_some() && (variants.len() != 1 || args.datasets.len() != 1) {
        return Err(Error::invalid(
            "--curve-out needs exactly one dataset and one probe variant",
        ));
    }

    let datasets: Vec<Dataset> = args
        .datasets
        .iter()
        .map(|p| load_dataset(p, args.format.into()))
        .collect::<Result<_>>()?;

    // Fan out (dataset x variant) tasks; results keep task order so output
    // is independent of scheduling.
    struct Task<'a> {
        dataset: &'a Dataset,
        variant: Variant,
    }
    let tasks: Vec<Task> = datasets
        .iter()
        .flat_map(|d| {
            variants.iter().map(move |v| Task {
                dataset: d,
                variant: v.clone(),
            })
        })
        .collect();

    let jobs = args.jobs.max(1);
    let results: Vec<Option<Result<(ScoreRecord, Option<ProbeScore>)>>> =
        (0..tasks.len()).map(|_| None).collect();
    let results = Mutex::new(results);
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(tasks.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= tasks.len() {
                    break;
                }
                let out = run_task(&args, tasks[i].dataset, &tasks[i].variant, probe_side);
                results.lock().unwrap()[i] = Some(out);
            });
        }
    });
    let results = results.into_inner().unwrap();

    let mut records = Vec::new();
    for slot in results {
        let (mut record, probe) = slot.expect("every task ran")?;
        if args.repro {
            record.wall_time_s = 1.0;
        }
        println!(
            "{} {} {} score={} wall={:.3}s",
            record.dataset_id, record.method, record.variant, record.score, record.wall_time_s
        );
        if let (Some(curve_path), Some(probe)) = (&args.curve_out, probe.as_ref()) {
            write_curve(curve_path, probe, args.repro)?;
        }
        records.push(record);
    }
    append_scores(&args.out, &records)?;
    Ok(())
}

fn run_task(
    args: &ScoreArgs,
    dataset: &Dataset,
    variant: &Variant,
    probe_side: Option<usize>,
) -> Result<(ScoreRecord, Option<ProbeScore>)> {
    match variant {
        Variant::Silhouette(pipeline) => {
            let opts = SilhouetteOptions {
                n_max: args.n_max,
                seed: args.seed,
                embedding_path: args.embedding.clone(),
                embedding_width: args.embedding_width,
            };
            let r = silhouette_pipeline(dataset, *pipeline, &opts)?;
            if !r.samples.singletons.is_empty() {
                eprintln!(
                    "warning: {}: {} singleton-class samples scored 0",
                    dataset.id,
                    r.samples.singletons.len()
                );
            }
            Ok((
                ScoreRecord {
                    dataset_id: dataset.id.clone(),
                    method: Method::Silhouette,
                    variant: pipeline.name().to_string(),
                    score: r.score,
                    wall_time_s: r.wall_seconds,
                    seed: args.seed,
                },
                None,
            ))
        }
        Variant::Kmeans(transform, metric) => {
            let spec = transform_spec(*transform, args)?;
            let r = kmeans_score_pipeline(dataset, &spec, *metric)?;
            Ok((
                ScoreRecord {
                    dataset_id: dataset.id.clone(),
                    method: Method::Kmeans,
                    variant: format!("{}+{}", spec.name(), metric.name()),
                    score: r.score,
                    wall_time_s: r.wall_seconds,
                    seed: args.seed,
                },
                None,
            ))
        }
        Variant::Probe(kind) => {
            let opts = ProbeOptions {
                input_side: probe_side,
                augment: !args.no_augment,
                seed: args.seed,
            };
            let r = probe_score(dataset, *kind, args.epochs, &opts)?;
            if r.curve.diverged {
                return Err(Error::Data(format!(
                    "{}: probe training diverged (non-finite loss)",
                    dataset.id
                )));
            }
            Ok((
                ScoreRecord {
                    dataset_id: dataset.id.clone(),
                    method: Method::Probenet,
                    variant: format!("{}@{}", kind.name(), args.epochs),
                    score: r.score,
                    wall_time_s: r.wall_seconds,
                    seed: args.seed,
                },
                Some(r),
            ))
        }
    }
}

fn transform_spec(arg: TransformArg, args: &ScoreArgs) -> Result<TransformSpec> {
    Ok(match arg {
        TransformArg::None => TransformSpec::None,
        TransformArg::Resize8 => TransformSpec::Resize8,
        TransformArg::Pca10 => TransformSpec::pca10(args.seed),
        TransformArg::Embedding => TransformSpec::EmbeddingFile {
            path: args
                .embedding
                .clone()
                .ok_or_else(|| Error::invalid("embedding transform needs --embedding"))?,
            width: args.embedding_width,
        },
    })
}

fn write_curve(path: &Path, probe: &ProbeScore, repro: bool) -> Result<()> {
    let mut out = String::from("epoch,top1,loss,seconds\n");
    for (i, ((top1, loss), secs)) in probe
        .curve
        .top1
        .iter()
        .zip(&probe.curve.train_loss)
        .zip(&probe.curve.epoch_seconds)
        .enumerate()
    {
        let secs = if repro { 1.0 } else { *secs };
        out.push_str(&format!("{},{},{},{}\n", i + 1, top1, loss, secs));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let records = read_scores(&args.scores)?;
    let reference = read_reference(&args.reference)?;
    let baseline = args
        .baseline
        .as_deref()
        .map(|s| -> Result<(Method, String)> {
            let (m, v) = s
                .split_once('/')
                .ok_or_else(|| Error::invalid(format!("--baseline must be method/variant, got {s:?}")))?;
            Ok((Method::from_str(m)?, v.to_string()))
        })
        .transpose()?;
    let report = evaluate(&records, &reference, baseline)?;
    emit_report(&records, &report, &args.out)?;
    for g in &report.groups {
        let gap = g
            .mean_abs_gap
            .map(|v| format!(" mean_gap={v:.4}"))
            .unwrap_or_default();
        println!(
            "{}/{} R2={:.4} slope={:.4} intercept={:.4}{gap} speedup={:.2}x n={}",
            g.method,
            g.variant,
            g.fit.r2,
            g.fit.slope,
            g.fit.intercept,
            g.speedup_vs_baseline,
            g.points.len()
        );
        if g.fit.y_constant {
            eprintln!(
                "warning: {}/{}: constant reference values, R2 reported as 0",
                g.method, g.variant
            );
        }
    }
    for (m, v, why) in &report.skipped {
        eprintln!("warning: skipped {m}/{v}: {why}");
    }
    println!("report written to {}", args.out.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let specs: Vec<SynthSpec> = match args.preset.as_deref() {
        Some("noise-ladder") => SynthSpec::noise_ladder(args.seed),
        Some(other) => {
            return Err(Error::invalid(format!(
                "unknown preset {other:?} (available: noise-ladder)"
            )))
        }
        None => {
            let id = args.id.clone().unwrap_or_else(|| {
                format!(
                    "synth-c{}-s{}-sep{}-sig{}-f{}",
                    args.classes, args.side, args.separation, args.sigma, args.flip
                )
            });
            vec![SynthSpec {
                id,
                classes: args.classes,
                per_class: args.per_class,
                side: args.side,
                separation: args.separation,
                sigma: args.sigma,
                label_flip_rate: args.flip,
                seed: args.seed,
            }]
        }
    };

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut manifest = String::from("dataset_id,classes,per_class,side,separation,sigma,label_flip_rate,seed\n");
    for spec in &specs {
        let ds = synth_generate(spec)?;
        let path = args.out.join(format!("{}.dset", spec.id));
        save_dset(&ds, &path)?;
        manifest.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            spec.id,
            spec.classes,
            spec.per_class,
            spec.side,
            spec.separation,
            spec.sigma,
            spec.label_flip_rate,
            spec.seed
        ));
        println!(
            "{}: {} train / {} test images of {}x{} written to {}",
            spec.id,
            ds.n_train(),
            ds.n_test(),
            ds.h,
            ds.w,
            path.display()
        );
    }
    let manifest_path = args.out.join("manifest.csv");
    std::fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(())
}
