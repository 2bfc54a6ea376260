//! k-means clustering with class-mean initialization and the clustering
//! agreement scores computed from the label/cluster contingency table:
//! AECM, AMI, ARI, homogeneity, completeness, and v-measure.

use std::time::Instant;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::transform::{apply_transform, TransformSpec};

/// Upper limit on the number of contradicting positions the AECM repair
/// resolves exhaustively.
pub const AECM_SEARCH_LIMIT: usize = 7;

pub const KMEANS_TOL: f64 = 1e-4;
pub const KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone)]
pub struct KmeansResult {
    /// `k x d` centroids.
    pub centroids: Matrix,
    /// Cluster index per sample.
    pub assignments: Vec<u32>,
    /// Sum of squared distances to the assigned centroid, recorded after
    /// each assignment step; nonincreasing.
    pub inertia: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Lloyd's algorithm with L2 distance and centroids initialized to the
/// per-class mean. Stops when the largest centroid movement falls below
/// `tol` or after `max_iter` iterations; no random restarts. Assignment
/// ties break to the lowest centroid index; a cluster left empty keeps its
/// previous centroid.
pub fn kmeans(
    x: &Matrix,
    labels_for_init: &[u32],
    k: usize,
    tol: f64,
    max_iter: usize,
) -> Result<KmeansResult> {
    let n = x.rows();
    let d = x.cols();
    if labels_for_init.len() != n {
        return Err(Error::invalid(format!(
            "kmeans: {n} samples but {} init labels",
            labels_for_init.len()
        )));
    }
    if n < k {
        return Err(Error::invalid(format!(
            "kmeans: need at least k={k} samples, got {n}"
        )));
    }

    // Class-mean initialization.
    let mut centroids = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &y) in labels_for_init.iter().enumerate() {
        let y = y as usize;
        if y >= k {
            return Err(Error::invalid(format!(
                "kmeans: init label {y} out of range for k={k}"
            )));
        }
        counts[y] += 1;
        let row = centroids.row_mut(y);
        for (cv, &v) in row.iter_mut().zip(x.row(i)) {
            *cv += v;
        }
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!(
            "kmeans: class {missing} absent from the init labels"
        )));
    }
    for (c, &count) in counts.iter().enumerate() {
        for v in centroids.row_mut(c) {
            *v /= count as f64;
        }
    }

    let mut assignments = vec![0u32; n];
    let mut inertia = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..max_iter {
        iterations += 1;

        // Assignment step.
        let mut total = 0.0;
        for i in 0..n {
            let row = x.row(i);
            let mut best = (f64::INFINITY, 0usize);
            for c in 0..k {
                let mut dist = 0.0;
                for (a, b) in row.iter().zip(centroids.row(c)) {
                    let diff = a - b;
                    dist += diff * diff;
                }
                if dist < best.0 {
                    best = (dist, c);
                }
            }
            assignments[i] = best.1 as u32;
            total += best.0;
        }
        inertia.push(total);

        // Update step with fixed-order accumulation.
        let mut sums = Matrix::zeros(k, d);
        let mut sizes = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            sizes[a as usize] += 1;
            let row = sums.row_mut(a as usize);
            for (s, &v) in row.iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut movement: f64 = 0.0;
        for c in 0..k {
            if sizes[c] == 0 {
                continue; // keep the previous centroid
            }
            let mut dist = 0.0;
            let old = centroids.row(c).to_vec();
            let row = centroids.row_mut(c);
            for (j, v) in row.iter_mut().enumerate() {
                *v = sums.get(c, j) / sizes[c] as f64;
                let diff = *v - old[j];
                dist += diff * diff;
            }
            movement = movement.max(dist.sqrt());
        }
        if movement < tol {
            converged = true;
            break;
        }
    }

    Ok(KmeansResult {
        centroids,
        assignments,
        inertia,
        iterations,
        converged,
    })
}

/// Square contingency table between true labels (rows) and cluster indices
/// (columns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    k: usize,
    counts: Vec<u64>,
    n: u64,
}

impl Contingency {
    pub fn new(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(Error::invalid(format!(
                "contingency: {k}x{k} table needs {} cells, got {}",
                k * k,
                counts.len()
            )));
        }
        let n = counts.iter().sum();
        Ok(Contingency { k, counts, n })
    }

    pub fn from_labels(y_true: &[u32], y_pred: &[u32], k: usize) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::invalid("contingency: label slices differ in length"));
        }
        let mut counts = vec![0u64; k * k];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t as usize >= k || p as usize >= k {
                return Err(Error::invalid(format!(
                    "contingency: pair ({t}, {p}) out of range for k={k}"
                )));
            }
            counts[t as usize * k + p as usize] += 1;
        }
        Ok(Contingency {
            k,
            counts,
            n: y_true.len() as u64,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.k + col]
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.k)
            .map(|r| (0..self.k).map(|c| self.get(r, c)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.k)
            .map(|c| (0..self.k).map(|r| self.get(r, c)).sum())
            .collect()
    }
}

/// Accuracy on the estimated confusion matrix: the trace fraction under the
/// best label-to-cluster bijection found by a greedy argmax pass with
/// bounded exhaustive repair.
///
/// Each row is assigned its argmax column; a bijective result is returned
/// directly (it attains every row maximum, hence is optimal). Otherwise the
/// contradictions are repaired exhaustively: tables with at most
/// [`AECM_SEARCH_LIMIT`] rows are solved over all permutations, larger
/// tables pin the greedily matched rows (claimed in descending row-maximum
/// order), resolve up to seven leftover rows by exhaustive search over the
/// free columns, and assign any excess in index order first. The result is
/// exact whenever the contradictions fit the limit and a lower bound on the
/// true optimum otherwise.
pub fn aecm(contingency: &Contingency) -> Result<f64> {
    let k = contingency.k();
    let n = contingency.n();
    if n == 0 {
        return Err(Error::invalid("aecm: empty contingency"));
    }

    // Greedy pass: every row takes its argmax column (lowest column wins
    // ties).
    let argmax: Vec<usize> = (0..k)
        .map(|r| {
            (0..k)
                .max_by(|&a, &b| {
                    contingency
                        .get(r, a)
                        .cmp(&contingency.get(r, b))
                        .then(b.cmp(&a)) // prefer the lower column index
                })
                .expect("k >= 1")
        })
        .collect();
    let mut col_taken = vec![false; k];
    let mut bijective = true;
    for &c in &argmax {
        if col_taken[c] {
            bijective = false;
            break;
        }
        col_taken[c] = true;
    }
    if bijective {
        let trace: u64 = (0..k).map(|r| contingency.get(r, argmax[r])).sum();
        return Ok(trace as f64 / n as f64);
    }

    // Contradictions exist. Small tables are searched exhaustively over all
    // positions, which keeps the result exact whenever the contradiction
    // count fits the search limit.
    if k <= AECM_SEARCH_LIMIT {
        let rows: Vec<usize> = (0..k).collect();
        let cols: Vec<usize> = (0..k).collect();
        let best = best_assignment(contingency, &rows, &cols);
        return Ok(best as f64 / n as f64);
    }

    // Large table: claim columns greedily in descending row-max order, so
    // the most confident matches keep their clusters; ties prefer the lower
    // row index.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        contingency
            .get(b, argmax[b])
            .cmp(&contingency.get(a, argmax[a]))
            .then(a.cmp(&b))
    });
    let mut col_owner = vec![usize::MAX; k];
    let mut fixed = 0u64;
    let mut leftover_rows = Vec::new();
    for &r in &order {
        let c = argmax[r];
        if col_owner[c] == usize::MAX {
            col_owner[c] = r;
            fixed += contingency.get(r, c);
        } else {
            leftover_rows.push(r);
        }
    }
    leftover_rows.sort_unstable();
    let mut free_cols: Vec<usize> = (0..k).filter(|&c| col_owner[c] == usize::MAX).collect();

    // More contradictions than the limit: fix the excess in index order
    // (an arbitrary but deterministic initial permutation) and search the
    // remaining block.
    while leftover_rows.len() > AECM_SEARCH_LIMIT {
        let r = leftover_rows.remove(0);
        let c = free_cols.remove(0);
        fixed += contingency.get(r, c);
    }
    let best = fixed + best_assignment(contingency, &leftover_rows, &free_cols);
    Ok(best as f64 / n as f64)
}

/// Exhaustive assignment maximization of `sum m[row][col]` over bijections
/// from `rows` to `cols`, by in-place permutation enumeration.
fn best_assignment(contingency: &Contingency, rows: &[usize], cols: &[usize]) -> u64 {
    debug_assert_eq!(rows.len(), cols.len());
    if rows.is_empty() {
        return 0;
    }
    let mut cols = cols.to_vec();
    let mut best = 0u64;
    permute_and_score(contingency, rows, &mut cols, 0, 0, &mut best);
    best
}

fn permute_and_score(
    contingency: &Contingency,
    rows: &[usize],
    cols: &mut Vec<usize>,
    depth: usize,
    acc: u64,
    best: &mut u64,
) {
    if depth == rows.len() {
        *best = (*best).max(acc);
        return;
    }
    for i in depth..cols.len() {
        cols.swap(depth, i);
        let add = contingency.get(rows[depth], cols[depth]);
        permute_and_score(contingency, rows, cols, depth + 1, acc + add, best);
        cols.swap(depth, i);
    }
}

/// The contingency-based agreement scores other than AECM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementScores {
    pub ami: f64,
    pub ari: f64,
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
}

fn comb2(x: u64) -> f64 {
    if x < 2 {
        0.0
    } else {
        x as f64 * (x as f64 - 1.0) / 2.0
    }
}

fn entropy(counts: &[u64], n: u64) -> f64 {
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// AMI, ARI, homogeneity, completeness, and v-measure from a contingency
/// table, in their standard closed forms. Degenerate conditional entropies
/// map homogeneity/completeness to 1; single-class or single-cluster
/// partitions give AMI 0; `h + c = 0` gives v-measure 0.
pub fn agreement_metrics(contingency: &Contingency) -> Result<AgreementScores> {
    let n = contingency.n();
    if n < 2 {
        return Err(Error::invalid("agreement metrics need at least 2 samples"));
    }
    let k = contingency.k();
    let a = contingency.row_sums(); // true classes
    let b = contingency.col_sums(); // clusters
    let n_f = n as f64;

    // --- ARI over pair counts -------------------------------------------
    let sum_cells: f64 = (0..k * k)
        .map(|i| comb2(contingency.counts[i]))
        .sum();
    let sum_a: f64 = a.iter().map(|&x| comb2(x)).sum();
    let sum_b: f64 = b.iter().map(|&x| comb2(x)).sum();
    let total_pairs = comb2(n);
    let expected = sum_a * sum_b / total_pairs;
    let max_index = 0.5 * (sum_a + sum_b);
    let ari = if (max_index - expected).abs() < f64::EPSILON * max_index.max(1.0) {
        1.0
    } else {
        (sum_cells - expected) / (max_index - expected)
    };

    // --- entropies and mutual information -------------------------------
    let h_true = entropy(&a, n);
    let h_pred = entropy(&b, n);
    let mut mi = 0.0;
    for r in 0..k {
        for c in 0..k {
            let nij = contingency.get(r, c);
            if nij == 0 {
                continue;
            }
            let nij = nij as f64;
            mi += (nij / n_f) * ((nij * n_f) / (a[r] as f64 * b[c] as f64)).ln();
        }
    }

    // --- homogeneity / completeness / v-measure -------------------------
    // h = 1 - H(class|cluster)/H(class); H(class|cluster) = H(class) - MI.
    let homogeneity = if h_true == 0.0 { 1.0 } else { mi / h_true };
    let completeness = if h_pred == 0.0 { 1.0 } else { mi / h_pred };
    let v_measure = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    };

    // --- AMI with the hypergeometric expected MI -------------------------
    let ami = if h_true == 0.0 || h_pred == 0.0 {
        0.0
    } else {
        let emi = expected_mutual_information(&a, &b, n);
        let denom = 0.5 * (h_true + h_pred) - emi;
        if denom.abs() < 1e-15 {
            0.0
        } else {
            (mi - emi) / denom
        }
    };

    Ok(AgreementScores {
        ami,
        ari,
        homogeneity,
        completeness,
        v_measure,
    })
}

/// E[MI] under the permutation model: cell counts follow hypergeometric
/// distributions given the marginals.
fn expected_mutual_information(a: &[u64], b: &[u64], n: u64) -> f64 {
    let n_us = n as usize;
    // ln(k!) table up to n.
    let mut ln_fact = vec![0.0f64; n_us + 1];
    for i in 1..=n_us {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let n_f = n as f64;
    let mut emi = 0.0;
    for &ai in a.iter().filter(|&&x| x > 0) {
        for &bj in b.iter().filter(|&&x| x > 0) {
            let lo = 1.max((ai + bj).saturating_sub(n));
            let hi = ai.min(bj);
            for nij in lo..=hi {
                let nij_f = nij as f64;
                let term = (nij_f / n_f) * ((n_f * nij_f) / (ai as f64 * bj as f64)).ln();
                let ln_p = ln_fact[ai as usize] + ln_fact[bj as usize]
                    + ln_fact[(n - ai) as usize]
                    + ln_fact[(n - bj) as usize]
                    - ln_fact[n_us]
                    - ln_fact[nij as usize]
                    - ln_fact[(ai - nij) as usize]
                    - ln_fact[(bj - nij) as usize]
                    - ln_fact[((n + nij) - (ai + bj)) as usize];
                emi += term * ln_p.exp();
            }
        }
    }
    emi
}

/// Which agreement score a k-means pipeline reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterMetric {
    Aecm,
    Ami,
    Ari,
    Homogeneity,
    Completeness,
    VMeasure,
}

impl ClusterMetric {
    pub const ALL: [ClusterMetric; 6] = [
        ClusterMetric::Aecm,
        ClusterMetric::Ami,
        ClusterMetric::Ari,
        ClusterMetric::Homogeneity,
        ClusterMetric::Completeness,
        ClusterMetric::VMeasure,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ClusterMetric::Aecm => "aecm",
            ClusterMetric::Ami => "ami",
            ClusterMetric::Ari => "ari",
            ClusterMetric::Homogeneity => "homogeneity",
            ClusterMetric::Completeness => "completeness",
            ClusterMetric::VMeasure => "v",
        }
    }
}

impl std::fmt::Display for ClusterMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ClusterMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aecm" => Ok(ClusterMetric::Aecm),
            "ami" => Ok(ClusterMetric::Ami),
            "ari" => Ok(ClusterMetric::Ari),
            "homogeneity" => Ok(ClusterMetric::Homogeneity),
            "completeness" => Ok(ClusterMetric::Completeness),
            "v" | "v_measure" | "v-measure" => Ok(ClusterMetric::VMeasure),
            other => Err(Error::invalid(format!("unknown cluster metric {other:?}"))),
        }
    }
}

/// All six scores for one clustering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterScoreSet {
    pub aecm: f64,
    pub scores: AgreementScores,
}

impl ClusterScoreSet {
    pub fn get(&self, metric: ClusterMetric) -> f64 {
        match metric {
            ClusterMetric::Aecm => self.aecm,
            ClusterMetric::Ami => self.scores.ami,
            ClusterMetric::Ari => self.scores.ari,
            ClusterMetric::Homogeneity => self.scores.homogeneity,
            ClusterMetric::Completeness => self.scores.completeness,
            ClusterMetric::VMeasure => self.scores.v_measure,
        }
    }
}

pub fn cluster_score_set(contingency: &Contingency) -> Result<ClusterScoreSet> {
    Ok(ClusterScoreSet {
        aecm: aecm(contingency)?,
        scores: agreement_metrics(contingency)?,
    })
}

/// Result of one k-means scoring pipeline run.
#[derive(Debug, Clone)]
pub struct KmeansScore {
    pub transform: String,
    pub metric: ClusterMetric,
    pub score: f64,
    pub all_scores: ClusterScoreSet,
    pub kmeans_iterations: usize,
    pub wall_seconds: f64,
}

/// Transform the train split, cluster into `C` groups from class-mean
/// initialization, and score the clustering against the train labels.
pub fn kmeans_score_pipeline(
    dataset: &Dataset,
    transform: &TransformSpec,
    metric: ClusterMetric,
) -> Result<KmeansScore> {
    let start = Instant::now();
    let transformed = apply_transform(transform, &dataset.train_images())?;
    let x = transformed.as_features();
    let result = kmeans(
        &x,
        &dataset.y_train,
        dataset.n_class,
        KMEANS_TOL,
        KMEANS_MAX_ITER,
    )?;
    let contingency =
        Contingency::from_labels(&dataset.y_train, &result.assignments, dataset.n_class)?;
    let all_scores = cluster_score_set(&contingency)?;
    Ok(KmeansScore {
        transform: transform.name().to_string(),
        metric,
        score: all_scores.get(metric),
        all_scores,
        kmeans_iterations: result.iterations,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
