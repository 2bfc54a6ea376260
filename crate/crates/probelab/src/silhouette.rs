//! Pairwise distances (MSE, DSSIM) and silhouette scoring, assembled into
//! the six scoring pipelines S1..S6.

use std::path::PathBuf;
use std::time::Instant;

use crate::dataset::{subsample_indices, Dataset, FloatImages};
use crate::error::{Error, Result};
use crate::transform::{apply_transform, TransformSpec, TransformedData};

/// Mean squared difference between two equal-length vectors.
pub fn mse_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::invalid(format!(
            "mse_distance: lengths {} and {} differ",
            u.len(),
            v.len()
        )));
    }
    let mut acc = 0.0;
    for (a, b) in u.iter().zip(v) {
        let d = a - b;
        acc += d * d;
    }
    Ok(acc / u.len() as f64)
}

/// Window and stabilisation constants for [`dssim`]. The defaults are 8x8
/// uniform windows with the standard constants K1=0.01, K2=0.03 on a unit
/// dynamic range; they are recorded in pipeline output metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DssimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the pixel values (1.0 for float images).
    pub l: f64,
}

impl Default for DssimParams {
    fn default() -> Self {
        DssimParams {
            window: 8,
            k1: 0.01,
            k2: 0.03,
            l: 1.0,
        }
    }
}

impl DssimParams {
    pub fn describe(&self) -> String {
        format!(
            "dssim window={}x{} k1={} k2={} L={}",
            self.window, self.window, self.k1, self.k2, self.l
        )
    }
}

/// Structural dissimilarity `(1 - mean SSIM) / 2` in `[0, 1]`.
///
/// Mean SSIM uses uniform sliding windows (stride 1, fully inside the
/// image); images smaller than the window fall back to one global window.
/// Multi-channel images average the per-channel mean SSIM before the
/// `(1 - s)/2` mapping.
pub fn dssim(a: &FloatImages, ai: usize, b: &FloatImages, bi: usize, p: &DssimParams) -> Result<f64> {
    if (a.h, a.w, a.c) != (b.h, b.w, b.c) {
        return Err(Error::invalid(format!(
            "dssim: image shapes {}x{}x{} and {}x{}x{} differ",
            a.h, a.w, a.c, b.h, b.w, b.c
        )));
    }
    let (h, w, c) = (a.h, a.w, a.c);
    let win = if h < p.window || w < p.window {
        h.min(w) // fall back to the largest square window that fits
    } else {
        p.window
    };
    let c1 = (p.k1 * p.l) * (p.k1 * p.l);
    let c2 = (p.k2 * p.l) * (p.k2 * p.l);

    let img_a = a.image(ai);
    let img_b = b.image(bi);

    let mut ssim_sum = 0.0;
    for ch in 0..c {
        ssim_sum += channel_mean_ssim(img_a, img_b, h, w, c, ch, win, c1, c2);
    }
    let mean_ssim = ssim_sum / c as f64;
    Ok((1.0 - mean_ssim) / 2.0)
}

/// Mean local SSIM of one channel via summed-area tables, O(h*w) per pair.
#[allow(clippy::too_many_arguments)]
fn channel_mean_ssim(
    img_a: &[f32],
    img_b: &[f32],
    h: usize,
    w: usize,
    c: usize,
    ch: usize,
    win: usize,
    c1: f64,
    c2: f64,
) -> f64 {
    // Five integrals: a, b, a^2, b^2, ab. Row 0 / column 0 are zero pads.
    let stride = w + 1;
    let mut sa = vec![0.0f64; (h + 1) * stride];
    let mut sb = vec![0.0f64; (h + 1) * stride];
    let mut saa = vec![0.0f64; (h + 1) * stride];
    let mut sbb = vec![0.0f64; (h + 1) * stride];
    let mut sab = vec![0.0f64; (h + 1) * stride];
    for y in 0..h {
        let mut row_a = 0.0;
        let mut row_b = 0.0;
        let mut row_aa = 0.0;
        let mut row_bb = 0.0;
        let mut row_ab = 0.0;
        for x in 0..w {
            let va = img_a[(y * w + x) * c + ch] as f64;
            let vb = img_b[(y * w + x) * c + ch] as f64;
            row_a += va;
            row_b += vb;
            row_aa += va * va;
            row_bb += vb * vb;
            row_ab += va * vb;
            let idx = (y + 1) * stride + x + 1;
            let above = y * stride + x + 1;
            sa[idx] = sa[above] + row_a;
            sb[idx] = sb[above] + row_b;
            saa[idx] = saa[above] + row_aa;
            sbb[idx] = sbb[above] + row_bb;
            sab[idx] = sab[above] + row_ab;
        }
    }
    let window_sum = |s: &[f64], y: usize, x: usize| -> f64 {
        s[(y + win) * stride + x + win] + s[y * stride + x]
            - s[y * stride + x + win]
            - s[(y + win) * stride + x]
    };

    let n_px = (win * win) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for y in 0..=(h - win) {
        for x in 0..=(w - win) {
            let mu_a = window_sum(&sa, y, x) / n_px;
            let mu_b = window_sum(&sb, y, x) / n_px;
            let var_a = window_sum(&saa, y, x) / n_px - mu_a * mu_a;
            let var_b = window_sum(&sbb, y, x) / n_px - mu_b * mu_b;
            let cov = window_sum(&sab, y, x) / n_px - mu_a * mu_b;
            let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            windows += 1;
        }
    }
    total / windows as f64
}

/// Pairwise distance metric over transformed samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mse,
    Dssim,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Dssim => "dssim",
        }
    }
}

/// Symmetric nonnegative pairwise distances with zero diagonal.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    metric: Metric,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Build from explicit entries (validated); mostly for tests.
    pub fn from_fn(n: usize, metric: Metric, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::Data(format!("distance ({i},{j}) = {d} is invalid")));
                }
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Ok(DistanceMatrix { n, metric, data })
    }
}

/// Fill the full distance matrix for the transformed samples.
pub fn distance_matrix(data: &TransformedData, metric: Metric) -> Result<DistanceMatrix> {
    let n = data.n();
    match metric {
        Metric::Mse => {
            let features = data.as_features();
            DistanceMatrix::from_fn(n, metric, |i, j| {
                mse_distance(features.row(i), features.row(j)).expect("rows have equal width")
            })
        }
        Metric::Dssim => {
            let images = data.images().ok_or_else(|| {
                Error::invalid("dssim distances need image-shaped data (none/resize8 transforms)")
            })?;
            let params = DssimParams::default();
            let mut out = vec![0.0; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = dssim(images, i, images, j, &params)?;
                    out[i * n + j] = d;
                    out[j * n + i] = d;
                }
            }
            Ok(DistanceMatrix {
                n,
                metric,
                data: out,
            })
        }
    }
}

/// Per-sample silhouette values.
#[derive(Debug, Clone)]
pub struct SilhouetteSamples {
    pub s: Vec<f64>,
    /// Samples whose class had a single member; their silhouette is
    /// defined as 0.
    pub singletons: Vec<usize>,
}

/// Silhouette of every sample:
/// `a(i)` is the mean distance to same-class samples, `b(i)` the smallest
/// mean distance to any other class, and
/// `s(i) = 1 - a/b` if `a < b`, `0` if `a = b`, `b/a - 1` if `a > b`.
pub fn silhouette_samples(distances: &DistanceMatrix, labels: &[u32]) -> Result<SilhouetteSamples> {
    let n = distances.n();
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "silhouette: {n} samples but {} labels",
            labels.len()
        )));
    }
    let n_class = labels.iter().map(|&y| y as usize + 1).max().unwrap_or(0);
    let mut counts = vec![0usize; n_class];
    for &y in labels {
        counts[y as usize] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::invalid(
            "silhouette: need at least 2 distinct classes",
        ));
    }

    let mut s = Vec::with_capacity(n);
    let mut singletons = Vec::new();
    let mut sums = vec![0.0f64; n_class];
    for i in 0..n {
        sums.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            sums[labels[j] as usize] += distances.get(i, j);
        }
        let own = labels[i] as usize;
        if counts[own] == 1 {
            singletons.push(i);
            s.push(0.0);
            continue;
        }
        let a = sums[own] / (counts[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for (class, &count) in counts.iter().enumerate() {
            if class != own && count > 0 {
                b = b.min(sums[class] / count as f64);
            }
        }
        let si = if a < b {
            1.0 - a / b
        } else if a == b {
            0.0
        } else {
            b / a - 1.0
        };
        s.push(si);
    }
    Ok(SilhouetteSamples { s, singletons })
}

/// The six silhouette pipelines: (transform, distance) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
}

impl Pipeline {
    pub const ALL: [Pipeline; 6] = [
        Pipeline::S1,
        Pipeline::S2,
        Pipeline::S3,
        Pipeline::S4,
        Pipeline::S5,
        Pipeline::S6,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::S1 => "S1",
            Pipeline::S2 => "S2",
            Pipeline::S3 => "S3",
            Pipeline::S4 => "S4",
            Pipeline::S5 => "S5",
            Pipeline::S6 => "S6",
        }
    }

    pub fn metric(&self) -> Metric {
        match self {
            Pipeline::S2 | Pipeline::S4 => Metric::Dssim,
            _ => Metric::Mse,
        }
    }

    /// Transform for this pipeline. S5 takes a PCA seed; S6 needs the
    /// embedding file recorded in the options.
    fn transform(&self, opts: &SilhouetteOptions) -> Result<TransformSpec> {
        Ok(match self {
            Pipeline::S1 | Pipeline::S2 => TransformSpec::None,
            Pipeline::S3 | Pipeline::S4 => TransformSpec::Resize8,
            Pipeline::S5 => TransformSpec::pca10(opts.seed),
            Pipeline::S6 => {
                let path = opts.embedding_path.clone().ok_or_else(|| {
                    Error::invalid("pipeline S6 needs an embedding file (--embedding)")
                })?;
                TransformSpec::EmbeddingFile {
                    path,
                    width: opts.embedding_width,
                }
            }
        })
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Pipeline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S1" | "s1" => Ok(Pipeline::S1),
            "S2" | "s2" => Ok(Pipeline::S2),
            "S3" | "s3" => Ok(Pipeline::S3),
            "S4" | "s4" => Ok(Pipeline::S4),
            "S5" | "s5" => Ok(Pipeline::S5),
            "S6" | "s6" => Ok(Pipeline::S6),
            other => Err(Error::invalid(format!("unknown silhouette pipeline {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SilhouetteOptions {
    /// Subsample cap applied to the train split before scoring.
    pub n_max: usize,
    pub seed: u64,
    pub embedding_path: Option<PathBuf>,
    pub embedding_width: usize,
}

impl Default for SilhouetteOptions {
    fn default() -> Self {
        SilhouetteOptions {
            n_max: 1000,
            seed: 42,
            embedding_path: None,
            embedding_width: crate::transform::EMBEDDING_WIDTH,
        }
    }
}

/// Full result of one silhouette pipeline run.
#[derive(Debug, Clone)]
pub struct SilhouetteResult {
    pub pipeline: Pipeline,
    /// Overall score: mean silhouette over the scored samples.
    pub score: f64,
    pub samples: SilhouetteSamples,
    /// `(class, mean silhouette)` for every class present.
    pub per_class: Vec<(u32, f64)>,
    pub n_scored: usize,
    pub wall_seconds: f64,
    pub transform_seconds: f64,
    pub distance_seconds: f64,
    pub scoring_seconds: f64,
    /// DSSIM parameters when the pipeline used them.
    pub dssim_params: Option<DssimParams>,
}

/// Run one silhouette pipeline on the train split of a dataset:
/// subsample to `n_max`, apply the pipeline's transform, fill the pairwise
/// distance matrix, and average Eq-style silhouettes.
pub fn silhouette_pipeline(
    dataset: &Dataset,
    pipeline: Pipeline,
    opts: &SilhouetteOptions,
) -> Result<SilhouetteResult> {
    let start = Instant::now();
    let indices = subsample_indices(dataset.n_train(), opts.n_max, opts.seed)?;
    let labels: Vec<u32> = indices.iter().map(|&i| dataset.y_train[i]).collect();

    let t0 = Instant::now();
    let transform = pipeline.transform(opts)?;
    let transformed = match transform {
        // Embeddings align row-for-row with the full train split; select
        // the subsample after loading.
        TransformSpec::EmbeddingFile { .. } => {
            let full = apply_transform(&transform, &dataset.train_images())?;
            match full {
                TransformedData::Features(m) => TransformedData::Features(m.select_rows(&indices)),
                other => other,
            }
        }
        _ => {
            let images = dataset.train_images().select(&indices);
            apply_transform(&transform, &images)?
        }
    };
    let transform_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let distances = distance_matrix(&transformed, pipeline.metric())?;
    let distance_seconds = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let samples = silhouette_samples(&distances, &labels)?;
    let score = samples.s.iter().sum::<f64>() / samples.s.len() as f64;

    let n_class = dataset.n_class;
    let mut class_sum = vec![0.0f64; n_class];
    let mut class_count = vec![0usize; n_class];
    for (&y, &si) in labels.iter().zip(&samples.s) {
        class_sum[y as usize] += si;
        class_count[y as usize] += 1;
    }
    let per_class: Vec<(u32, f64)> = (0..n_class)
        .filter(|&cl| class_count[cl] > 0)
        .map(|cl| (cl as u32, class_sum[cl] / class_count[cl] as f64))
        .collect();
    let scoring_seconds = t2.elapsed().as_secs_f64();

    Ok(SilhouetteResult {
        pipeline,
        score,
        n_scored: labels.len(),
        samples,
        per_class,
        wall_seconds: start.elapsed().as_secs_f64(),
        transform_seconds,
        distance_seconds,
        scoring_seconds,
        dssim_params: (pipeline.metric() == Metric::Dssim).then(DssimParams::default),
    })
}
