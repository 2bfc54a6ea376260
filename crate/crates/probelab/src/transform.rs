//! Pretransformations mapping images to the space pairwise distances are
//! computed in: identity, 8x8 resize, PCA to 10 components, or a
//! precomputed embedding file standing in for a pretrained encoder.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::dataset::{resize_bilinear, FloatImages};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const PCA_COMPONENTS: usize = 10;
pub const EMBEDDING_WIDTH: usize = 1000;

/// Which pretransformation to apply before distance computation.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformSpec {
    /// Flattened raw pixels; output width is `d = h*w*c`.
    None,
    /// Bilinear resize to 8x8; output width is `64 * c`.
    Resize8,
    /// Project onto the top `k` principal components (default 10).
    Pca { k: usize, seed: u64 },
    /// Load per-sample feature rows from an embedding file; `width` is the
    /// expected row width (1000 unless overridden).
    EmbeddingFile { path: PathBuf, width: usize },
}

impl TransformSpec {
    pub fn pca10(seed: u64) -> Self {
        TransformSpec::Pca {
            k: PCA_COMPONENTS,
            seed,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TransformSpec::None => "none",
            TransformSpec::Resize8 => "resize8",
            TransformSpec::Pca { .. } => "pca10",
            TransformSpec::EmbeddingFile { .. } => "embedding",
        }
    }
}

/// Transformed samples: either still image-shaped (usable by DSSIM) or a
/// plain feature matrix.
#[derive(Debug, Clone)]
pub enum TransformedData {
    Images(FloatImages),
    Features(Matrix),
}

impl TransformedData {
    pub fn n(&self) -> usize {
        match self {
            TransformedData::Images(im) => im.n,
            TransformedData::Features(m) => m.rows(),
        }
    }

    /// Output dimensionality per sample.
    pub fn width(&self) -> usize {
        match self {
            TransformedData::Images(im) => im.dim(),
            TransformedData::Features(m) => m.cols(),
        }
    }

    /// Flattened view as an `n x width` f64 matrix.
    pub fn as_features(&self) -> Matrix {
        match self {
            TransformedData::Images(im) => Matrix::new(
                im.n,
                im.dim(),
                im.data.iter().map(|&v| v as f64).collect(),
            )
            .expect("image buffer is rectangular"),
            TransformedData::Features(m) => m.clone(),
        }
    }

    pub fn images(&self) -> Option<&FloatImages> {
        match self {
            TransformedData::Images(im) => Some(im),
            TransformedData::Features(_) => None,
        }
    }
}

/// Apply a pretransformation to a batch of images. Pure: identical inputs
/// give bit-identical outputs.
pub fn apply_transform(spec: &TransformSpec, images: &FloatImages) -> Result<TransformedData> {
    match spec {
        TransformSpec::None => Ok(TransformedData::Images(images.clone())),
        TransformSpec::Resize8 => Ok(TransformedData::Images(resize_bilinear(images, 8, 8)?)),
        TransformSpec::Pca { k, seed } => {
            let x = flatten(images);
            let basis = fit_pca(&x, *k, *seed)?;
            Ok(TransformedData::Features(basis.project(&x)?))
        }
        TransformSpec::EmbeddingFile { path, width } => {
            let emb = load_embeddings_with_width(path, Some(*width))?;
            if emb.rows() != images.n {
                return Err(Error::Data(format!(
                    "{}: {} embedding rows for {} samples",
                    path.display(),
                    emb.rows(),
                    images.n
                )));
            }
            Ok(TransformedData::Features(emb))
        }
    }
}

fn flatten(images: &FloatImages) -> Matrix {
    Matrix::new(
        images.n,
        images.dim(),
        images.data.iter().map(|&v| v as f64).collect(),
    )
    .expect("image buffer is rectangular")
}

// ----------------------------------------------------------------- PCA ----

/// Result of [`fit_pca`]: an orthonormal basis of principal directions with
/// explained variances, plus convergence diagnostics.
#[derive(Debug, Clone)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    /// `k x d`, orthonormal rows, ordered by decreasing variance.
    pub components: Matrix,
    /// Sample variances (divisor `n - 1`) along each component, nonincreasing.
    pub variances: Vec<f64>,
    pub converged: bool,
    /// Subspace-angle proxy reached on the last iteration.
    pub achieved_tol: f64,
    pub iterations: usize,
}

const PCA_TOL: f64 = 1e-6;
const PCA_MAX_ITER: usize = 1000;

/// Top-`k` principal directions of the centered rows of `x` by subspace
/// iteration on the covariance operator. Products are matrix-free (only
/// `X v` and `X^T u` are formed), so `d` can be large. Deterministic given
/// the seed of the initial subspace. Non-convergence is reported through
/// `converged`/`achieved_tol` with the basis still returned.
pub fn fit_pca(x: &Matrix, k: usize, seed: u64) -> Result<PcaBasis> {
    let n = x.rows();
    let d = x.cols();
    if n < 2 {
        return Err(Error::invalid("fit_pca: need at least 2 samples"));
    }
    if k < 1 || k > d || k > n - 1 {
        return Err(Error::invalid(format!(
            "fit_pca: k={k} must satisfy 1 <= k <= min(n-1, d) = {}",
            d.min(n - 1)
        )));
    }

    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    // Columns of `b` span the current subspace estimate (d x k).
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut b: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    orthonormalize(&mut b, &mut rng);

    let scale = 1.0 / (n as f64 - 1.0);
    let mut achieved = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    for iter in 0..PCA_MAX_ITER {
        iterations = iter + 1;
        let prev = b.clone();
        b = cov_apply(x, &mean, &b, scale);
        orthonormalize(&mut b, &mut rng);
        achieved = subspace_delta(&prev, &b);
        if achieved < PCA_TOL {
            converged = true;
            break;
        }
    }

    // Rayleigh-Ritz: diagonalize the covariance restricted to the subspace
    // so components align with individual principal directions.
    let w = cov_apply(x, &mean, &b, scale);
    let mut t = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let dot: f64 = b[i].iter().zip(&w[j]).map(|(a, c)| a * c).sum();
            t[i * k + j] = dot;
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let s = 0.5 * (t[i * k + j] + t[j * k + i]);
            t[i * k + j] = s;
            t[j * k + i] = s;
        }
    }
    let (eigvals, eigvecs) = jacobi_eigen(&t, k);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &c| eigvals[c].total_cmp(&eigvals[a]));

    let mut components = Matrix::zeros(k, d);
    let mut variances = Vec::with_capacity(k);
    for (row, &e) in order.iter().enumerate() {
        variances.push(eigvals[e].max(0.0));
        let out = components.row_mut(row);
        for (i, bcol) in b.iter().enumerate() {
            let coef = eigvecs[i * k + e];
            for (o, &v) in out.iter_mut().zip(bcol) {
                *o += coef * v;
            }
        }
    }

    Ok(PcaBasis {
        mean,
        components,
        variances,
        converged,
        achieved_tol: achieved,
        iterations,
    })
}

impl PcaBasis {
    pub fn k(&self) -> usize {
        self.components.rows()
    }

    /// Project rows of `x` onto the basis: `(x - mean) C^T`, an `n x k`
    /// matrix.
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        let d = self.mean.len();
        if x.cols() != d {
            return Err(Error::invalid(format!(
                "project: expected {d} columns, got {}",
                x.cols()
            )));
        }
        let k = self.k();
        let mut out = Matrix::zeros(x.rows(), k);
        let mut centered = vec![0.0; d];
        for i in 0..x.rows() {
            for ((c, &v), &m) in centered.iter_mut().zip(x.row(i)).zip(&self.mean) {
                *c = v - m;
            }
            let row = out.row_mut(i);
            for (j, val) in row.iter_mut().enumerate() {
                *val = self
                    .components
                    .row(j)
                    .iter()
                    .zip(&centered)
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
        Ok(out)
    }
}

/// `scale * Xc^T (Xc B)` for the column block `b`, without forming the
/// covariance matrix.
fn cov_apply(x: &Matrix, mean: &[f64], b: &[Vec<f64>], scale: f64) -> Vec<Vec<f64>> {
    let n = x.rows();
    let d = x.cols();
    let k = b.len();
    let mut out = vec![vec![0.0; d]; k];
    let mut centered = vec![0.0; d];
    for i in 0..n {
        for ((c, &v), &m) in centered.iter_mut().zip(x.row(i)).zip(mean) {
            *c = v - m;
        }
        for (col, out_col) in b.iter().zip(out.iter_mut()) {
            let dot: f64 = centered.iter().zip(col).map(|(a, c)| a * c).sum();
            for (o, &cv) in out_col.iter_mut().zip(&centered) {
                *o += dot * cv;
            }
        }
    }
    for col in out.iter_mut() {
        for v in col.iter_mut() {
            *v *= scale;
        }
    }
    out
}

/// Modified Gram-Schmidt on the columns; a column that collapses to zero is
/// replaced by a fresh random draw and re-orthogonalized.
fn orthonormalize(b: &mut [Vec<f64>], rng: &mut ChaCha20Rng) {
    let d = b[0].len();
    for i in 0..b.len() {
        loop {
            for j in 0..i {
                let dot: f64 = b[i].iter().zip(&b[j]).map(|(a, c)| a * c).sum();
                let (head, tail) = b.split_at_mut(i);
                for (v, &u) in tail[0].iter_mut().zip(&head[j]) {
                    *v -= dot * u;
                }
            }
            let norm: f64 = b[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for v in b[i].iter_mut() {
                    *v /= norm;
                }
                break;
            }
            for v in b[i].iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
    }
    debug_assert!(b.iter().all(|col| col.len() == d));
}

/// `sqrt(k - ||B_old^T B_new||_F^2)`: the root-sum-square of the sines of
/// the principal angles between successive subspaces.
fn subspace_delta(old: &[Vec<f64>], new: &[Vec<f64>]) -> f64 {
    let k = old.len();
    let mut fro = 0.0;
    for o in old {
        for nw in new {
            let dot: f64 = o.iter().zip(nw).map(|(a, b)| a * b).sum();
            fro += dot * dot;
        }
    }
    (k as f64 - fro).max(0.0).sqrt()
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix, returning
/// (eigenvalues, column eigenvectors).
fn jacobi_eigen(t: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = t.to_vec();
    let mut v = vec![0.0; k * k];
    for i in 0..k {
        v[i * k + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                off += a[i * k + j] * a[i * k + j];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..k {
            for q in (p + 1)..k {
                let apq = a[p * k + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * k + p];
                let aqq = a[q * k + q];
                let theta = 0.5 * (aqq - app) / apq;
                let tan = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cos = 1.0 / (tan * tan + 1.0).sqrt();
                let sin = tan * cos;
                for i in 0..k {
                    let aip = a[i * k + p];
                    let aiq = a[i * k + q];
                    a[i * k + p] = cos * aip - sin * aiq;
                    a[i * k + q] = sin * aip + cos * aiq;
                }
                for j in 0..k {
                    let apj = a[p * k + j];
                    let aqj = a[q * k + j];
                    a[p * k + j] = cos * apj - sin * aqj;
                    a[q * k + j] = sin * apj + cos * aqj;
                }
                for i in 0..k {
                    let vip = v[i * k + p];
                    let viq = v[i * k + q];
                    v[i * k + p] = cos * vip - sin * viq;
                    v[i * k + q] = sin * vip + cos * viq;
                }
            }
        }
    }
    let eigvals: Vec<f64> = (0..k).map(|i| a[i * k + i]).collect();
    (eigvals, v)
}

// ---------------------------------------------------------- embeddings ----

const EMB_MAGIC: &[u8; 4] = b"EMB1";

/// Load an embedding file: `"EMB1"`, u32 n, u32 width, then `n*width`
/// little-endian f32 values row-major. Row `i` is sample `i`'s embedding.
/// The width must be 1000 unless an override is supplied.
pub fn load_embeddings(path: &Path) -> Result<Matrix> {
    load_embeddings_with_width(path, None)
}

pub fn load_embeddings_with_width(path: &Path, expect_width: Option<usize>) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = bytes.as_slice();
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != EMB_MAGIC {
        return Err(Error::format(path, format!("bad magic {magic:?}")));
    }
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    let n = u32::from_le_bytes(buf) as usize;
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    let width = u32::from_le_bytes(buf) as usize;

    let expected = expect_width.unwrap_or(EMBEDDING_WIDTH);
    if width != expected {
        return Err(Error::format(
            path,
            format!("embedding width {width}, expected {expected}"),
        ));
    }

    let mut data = Vec::with_capacity(n * width);
    let mut chunk = [0u8; 4];
    for _ in 0..n * width {
        r.read_exact(&mut chunk).map_err(|e| Error::io(path, e))?;
        data.push(f32::from_le_bytes(chunk) as f64);
    }
    if !r.is_empty() {
        return Err(Error::format(path, format!("{} trailing bytes", r.len())));
    }
    Matrix::new(n, width, data)
}

/// Write an embedding file (row-major f32).
pub fn save_embeddings(path: &Path, rows: usize, width: usize, values: &[f32]) -> Result<()> {
    if values.len() != rows * width {
        return Err(Error::invalid(format!(
            "save_embeddings: {rows}x{width} needs {} values, got {}",
            rows * width,
            values.len()
        )));
    }
    let mut out = Vec::with_capacity(12 + values.len() * 4);
    out.extend_from_slice(EMB_MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(width as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}
