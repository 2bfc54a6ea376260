//! Regression of difficulty scores against reference accuracies, speedup
//! tables, and CSV/SVG report emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scoring method families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "silhouette")]
    Silhouette,
    #[serde(rename = "kmeans")]
    Kmeans,
    #[serde(rename = "probenet")]
    Probenet,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Silhouette => "silhouette",
            Method::Kmeans => "kmeans",
            Method::Probenet => "probenet",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "silhouette" => Ok(Method::Silhouette),
            "kmeans" => Ok(Method::Kmeans),
            "probenet" => Ok(Method::Probenet),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// One pipeline run: a difficulty score for one dataset with its timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub dataset_id: String,
    pub method: Method,
    pub variant: String,
    pub score: f64,
    pub wall_time_s: f64,
    pub seed: u64,
}

pub const SCORES_HEADER: [&str; 6] = [
    "dataset_id",
    "method",
    "variant",
    "score",
    "wall_time_s",
    "seed",
];
pub const REFERENCE_HEADER: [&str; 2] = ["dataset_id", "top1"];
pub const REPORT_HEADER: [&str; 8] = [
    "method",
    "variant",
    "slope",
    "intercept",
    "r2",
    "mean_abs_gap",
    "speedup_vs_baseline",
    "n_points",
];

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    for (i, &expected) in want.iter().enumerate() {
        match got.get(i) {
            Some(actual) if actual == expected => {}
            Some(actual) => {
                return Err(Error::format(
                    path,
                    format!("column {} is {actual:?}, expected {expected:?}", i + 1),
                ))
            }
            None => {
                return Err(Error::format(
                    path,
                    format!("missing column {expected:?}"),
                ))
            }
        }
    }
    if got.len() > want.len() {
        return Err(Error::format(
            path,
            format!("unexpected extra column {:?}", got.get(want.len()).unwrap_or("")),
        ));
    }
    Ok(())
}

/// Append records to a scores CSV, writing the header only when the file
/// is created.
pub fn append_scores(path: &Path, records: &[ScoreRecord]) -> Result<()> {
    let exists = path.exists() && fs::metadata(path).map(|m| m.len() > 0).unwrap_or(false);
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(!exists)
        .from_writer(file);
    for r in records {
        w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    check_header(path, rdr.headers().map_err(|e| Error::format(path, e.to_string()))?, &SCORES_HEADER)?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let record: ScoreRecord = row.map_err(|e| Error::format(path, e.to_string()))?;
        if !record.score.is_finite() {
            return Err(Error::Data(format!(
                "{}: non-finite score for {}",
                path.display(),
                record.dataset_id
            )));
        }
        out.push(record);
    }
    Ok(out)
}

/// Read `dataset_id,top1` reference accuracies.
pub fn read_reference(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    check_header(path, rdr.headers().map_err(|e| Error::format(path, e.to_string()))?, &REFERENCE_HEADER)?;
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::format(path, e.to_string()))?;
        let id = row.get(0).unwrap_or("").to_string();
        let top1: f64 = row
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::format(path, format!("bad top1 value for {id:?}")))?;
        out.insert(id, top1);
    }
    Ok(out)
}

pub fn write_reference(path: &Path, reference: &BTreeMap<String, f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    w.write_record(REFERENCE_HEADER).map_err(|e| Error::Data(e.to_string()))?;
    for (id, top1) in reference {
        w.write_record([id.as_str(), &top1.to_string()])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Ordinary least squares fit of `y` on `x` with the coefficient of
/// determination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `y` was constant; `r2` is defined as 0 in that case.
    pub y_constant: bool,
}

pub fn linregress(x: &[f64], y: &[f64]) -> Result<LinFit> {
    if x.len() != y.len() {
        return Err(Error::invalid("linregress: x and y lengths differ"));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "linregress: need at least 3 points, got {n}"
        )));
    }
    let n_f = n as f64;
    let mx = x.iter().sum::<f64>() / n_f;
    let my = y.iter().sum::<f64>() / n_f;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate("linregress: x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if syy == 0.0 {
        return Ok(LinFit {
            slope,
            intercept,
            r2: 0.0,
            y_constant: true,
        });
    }
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    Ok(LinFit {
        slope,
        intercept,
        r2: 1.0 - ss_res / syy,
        y_constant: false,
    })
}

/// One (dataset, score, reference) point of a group's regression.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub dataset_id: String,
    pub score: f64,
    pub reference: f64,
}

#[derive(Debug, Clone)]
pub struct GroupReport {
    pub method: Method,
    pub variant: String,
    pub fit: LinFit,
    /// Mean |score - reference|, only for scores with accuracy semantics
    /// (probe nets and AECM).
    pub mean_abs_gap: Option<f64>,
    pub mean_wall_s: f64,
    pub speedup_vs_baseline: f64,
    pub points: Vec<EvalPoint>,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub baseline: Option<(Method, String)>,
    pub groups: Vec<GroupReport>,
    /// Groups skipped for having fewer than 3 points or a constant score.
    pub skipped: Vec<(Method, String, String)>,
}

fn accuracy_semantics(method: Method, variant: &str) -> bool {
    match method {
        Method::Probenet => true,
        Method::Kmeans => variant.ends_with("aecm"),
        Method::Silhouette => false,
    }
}

/// Group score records by (method, variant), regress each group's scores
/// against the reference accuracies, and build the speedup table. The
/// baseline defaults to silhouette/S2 when present, otherwise the group
/// with the largest mean wall time. Input record order does not affect
/// the result.
pub fn evaluate(
    records: &[ScoreRecord],
    reference: &BTreeMap<String, f64>,
    baseline: Option<(Method, String)>,
) -> Result<EvalReport> {
    let mut missing: Vec<String> = records
        .iter()
        .filter(|r| !reference.contains_key(&r.dataset_id))
        .map(|r| r.dataset_id.clone())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::MissingReference { ids: missing });
    }

    let mut groups: BTreeMap<(Method, String), Vec<&ScoreRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.method, r.variant.clone()))
            .or_default()
            .push(r);
    }

    let mut mean_walls: BTreeMap<(Method, String), f64> = BTreeMap::new();
    for (key, rs) in &groups {
        let mean = rs.iter().map(|r| r.wall_time_s).sum::<f64>() / rs.len() as f64;
        mean_walls.insert(key.clone(), mean);
    }

    let baseline_key = baseline.or_else(|| {
        let s2 = (Method::Silhouette, "S2".to_string());
        if groups.contains_key(&s2) {
            Some(s2)
        } else {
            // Slowest group; ties break on the (method, variant) ordering.
            mean_walls
                .iter()
                .max_by(|a, b| a.1.total_cmp(b.1).then_with(|| b.0.cmp(a.0)))
                .map(|(k, _)| k.clone())
        }
    });
    if let Some(key) = &baseline_key {
        if !groups.contains_key(key) {
            return Err(Error::invalid(format!(
                "baseline {}/{} has no score records",
                key.0, key.1
            )));
        }
    }
    let baseline_wall = baseline_key.as_ref().map(|k| mean_walls[k]);

    let mut out_groups = Vec::new();
    let mut skipped = Vec::new();
    for ((method, variant), rs) in &groups {
        let mut points: Vec<EvalPoint> = rs
            .iter()
            .map(|r| EvalPoint {
                dataset_id: r.dataset_id.clone(),
                score: r.score,
                reference: reference[&r.dataset_id],
            })
            .collect();
        points.sort_by(|a, b| a.dataset_id.cmp(&b.dataset_id));
        let xs: Vec<f64> = points.iter().map(|p| p.score).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.reference).collect();
        let fit = match linregress(&xs, &ys) {
            Ok(fit) => fit,
            Err(e) => {
                skipped.push((*method, variant.clone(), e.to_string()));
                continue;
            }
        };
        let mean_abs_gap = accuracy_semantics(*method, variant).then(|| {
            points
                .iter()
                .map(|p| (p.score - p.reference).abs())
                .sum::<f64>()
                / points.len() as f64
        });
        let mean_wall = mean_walls[&(*method, variant.clone())];
        let speedup = baseline_wall.map_or(1.0, |b| b / mean_wall);
        out_groups.push(GroupReport {
            method: *method,
            variant: variant.clone(),
            fit,
            mean_abs_gap,
            mean_wall_s: mean_wall,
            speedup_vs_baseline: speedup,
            points,
        });
    }

    Ok(EvalReport {
        baseline: baseline_key,
        groups: out_groups,
        skipped,
    })
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Write `scores.csv` (normalized, sorted), `report.csv`, and one scatter
/// SVG per group into `out_dir`. Byte-stable for identical inputs.
pub fn emit_report(records: &[ScoreRecord], report: &EvalReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let scores_path = out_dir.join("scores.csv");
    let mut sorted: Vec<&ScoreRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.dataset_id, a.method, &a.variant, a.seed).cmp(&(&b.dataset_id, b.method, &b.variant, b.seed))
    });
    {
        let mut w = csv::Writer::from_path(&scores_path)
            .map_err(|e| Error::format(&scores_path, e.to_string()))?;
        for r in &sorted {
            w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(&scores_path, e))?;
    }
    written.push(scores_path);

    let report_path = out_dir.join("report.csv");
    {
        let mut w = csv::Writer::from_path(&report_path)
            .map_err(|e| Error::format(&report_path, e.to_string()))?;
        w.write_record(REPORT_HEADER).map_err(|e| Error::Data(e.to_string()))?;
        for g in &report.groups {
            w.write_record([
                g.method.name().to_string(),
                g.variant.clone(),
                g.fit.slope.to_string(),
                g.fit.intercept.to_string(),
                g.fit.r2.to_string(),
                g.mean_abs_gap.map(|v| v.to_string()).unwrap_or_default(),
                g.speedup_vs_baseline.to_string(),
                g.points.len().to_string(),
            ])
            .map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(&report_path, e))?;
    }
    written.push(report_path);

    for g in &report.groups {
        let name = format!("scatter_{}_{}.svg", g.method.name(), sanitize(&g.variant));
        let path = out_dir.join(name);
        let svg = render_scatter(g);
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Scatter plot with the fitted line and an R² annotation. Points are the
/// only `<circle>` elements and the fit is the only `<line>` element.
fn render_scatter(g: &GroupReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 60.0;

    let xs: Vec<f64> = g.points.iter().map(|p| p.score).collect();
    let ys: Vec<f64> = g.points.iter().map(|p| p.reference).collect();
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);
    let sx = |v: f64| M + (v - x_min) / (x_max - x_min) * (W - 2.0 * M);
    let sy = |v: f64| H - M - (v - y_min) / (y_max - y_min) * (H - 2.0 * M);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    // axes
    s.push_str(&format!(
        "<path d=\"M {m} {m} L {m} {ym} L {xm} {ym}\" stroke=\"black\" fill=\"none\" stroke-width=\"1\"/>\n",
        m = M,
        ym = H - M,
        xm = W - M
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\">score</text>\n",
        W / 2.0,
        H - M / 3.0
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 {:.2} {:.2})\">reference top1</text>\n",
        M / 3.0,
        H / 2.0,
        M / 3.0,
        H / 2.0
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"15\" text-anchor=\"middle\">{}/{}</text>\n",
        W / 2.0,
        M / 2.0,
        g.method.name(),
        xml_escape(&g.variant)
    ));
    // axis extent labels
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{:.3}</text>\n",
        M,
        H - M + 16.0,
        x_min
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{:.3}</text>\n",
        W - M,
        H - M + 16.0,
        x_max
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{:.3}</text>\n",
        M - 6.0,
        H - M,
        y_min
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{:.3}</text>\n",
        M - 6.0,
        M + 4.0,
        y_max
    ));

    // fitted line across the x range
    let (fx0, fx1) = (x_min, x_max);
    let (fy0, fy1) = (
        g.fit.slope * fx0 + g.fit.intercept,
        g.fit.slope * fx1 + g.fit.intercept,
    );
    s.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"firebrick\" stroke-width=\"1.5\"/>\n",
        sx(fx0),
        sy(fy0).clamp(0.0, H),
        sx(fx1),
        sy(fy1).clamp(0.0, H)
    ));
    for p in &g.points {
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"steelblue\" fill-opacity=\"0.8\"/>\n",
            sx(p.score),
            sy(p.reference)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\">R&#178; = {:.4}</text>\n",
        M + 10.0,
        M + 18.0,
        g.fit.r2
    ));
    s.push_str("</svg>\n");
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in v {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, method: Method, variant: &str, score: f64, wall: f64) -> ScoreRecord {
        ScoreRecord {
            dataset_id: id.into(),
            method,
            variant: variant.into(),
            score,
            wall_time_s: wall,
            seed: 42,
        }
    }

    #[test]
    fn exact_line_is_recovered() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let fit = linregress(&x, &y).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_y_gives_near_zero_r2() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(6);
        let x: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..1.0)).collect();
        let fit = linregress(&x, &y).unwrap();
        assert!(fit.r2.abs() < 0.05, "r2 {}", fit.r2);
    }

    #[test]
    fn five_points_match_normal_equations() {
        let x = [0.3, 1.1, 2.7, 3.4, 5.0];
        let y = [1.2, 0.8, 2.9, 3.1, 4.8];
        let fit = linregress(&x, &y).unwrap();
        // Normal equations solved by hand: slope = Sxy/Sxx, etc.
        let n = 5.0;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        assert!((fit.slope - slope).abs() < 1e-10);
        assert!((fit.intercept - intercept).abs() < 1e-10);
    }

    #[test]
    fn degenerate_inputs_are_reported() {
        assert!(linregress(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(matches!(
            linregress(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
        let fit = linregress(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(fit.r2, 0.0);
        assert!(fit.y_constant);
    }

    #[test]
    fn r2_is_invariant_under_affine_rescaling_of_x() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(12);
        let x: Vec<f64> = (0..40).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.7 * v + rng.gen_range(-0.3..0.3)).collect();
        let base = linregress(&x, &y).unwrap().r2;
        for (a, b) in [(2.0, 0.0), (-1.5, 3.0), (0.01, -7.0)] {
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let r2 = linregress(&xs, &y).unwrap().r2;
            assert!((r2 - base).abs() < 1e-12, "{r2} vs {base}");
        }
    }

    fn reference_for(ids: &[&str]) -> BTreeMap<String, f64> {
        ids.iter()
            .enumerate()
            .map(|(i, id)| (id.to_string(), 0.3 + 0.1 * i as f64))
            .collect()
    }

    #[test]
    fn perfect_probe_scores_give_unit_fit_and_zero_gap() {
        let reference = reference_for(&["a", "b", "c", "d"]);
        let records: Vec<ScoreRecord> = reference
            .iter()
            .map(|(id, &top1)| record(id, Method::Probenet, "regular@5", top1, 1.0))
            .collect();
        let report = evaluate(&records, &reference, None).unwrap();
        let g = &report.groups[0];
        assert!((g.fit.r2 - 1.0).abs() < 1e-12);
        assert_eq!(g.mean_abs_gap, Some(0.0));
        assert_eq!(g.speedup_vs_baseline, 1.0);
    }

    #[test]
    fn speedup_table_follows_wall_time_ratio() {
        let reference = reference_for(&["a", "b", "c"]);
        let mut records = Vec::new();
        for (i, id) in ["a", "b", "c"].into_iter().enumerate() {
            records.push(record(id, Method::Silhouette, "S2", 0.4 + 0.2 * i as f64, 48.4));
            records.push(record(id, Method::Silhouette, "S3", 0.5 + 0.2 * i as f64, 1.0));
        }
        let report = evaluate(&records, &reference, None).unwrap();
        assert_eq!(
            report.baseline,
            Some((Method::Silhouette, "S2".to_string()))
        );
        let s3 = report
            .groups
            .iter()
            .find(|g| g.variant == "S3")
            .expect("S3 group");
        assert!((s3.speedup_vs_baseline - 48.4).abs() < 1e-9);
        let s2 = report.groups.iter().find(|g| g.variant == "S2").unwrap();
        assert_eq!(s2.speedup_vs_baseline, 1.0);
    }

    #[test]
    fn evaluate_is_order_invariant() {
        let reference = reference_for(&["a", "b", "c", "d", "e"]);
        let mut records: Vec<ScoreRecord> = reference
            .iter()
            .enumerate()
            .map(|(i, (id, _))| {
                record(id, Method::Kmeans, "pca10+aecm", 0.2 + 0.13 * i as f64, 2.0)
            })
            .collect();
        let a = evaluate(&records, &reference, None).unwrap();
        records.reverse();
        records.rotate_left(2);
        let b = evaluate(&records, &reference, None).unwrap();
        assert_eq!(a.groups[0].fit, b.groups[0].fit);
        assert_eq!(a.groups[0].points, b.groups[0].points);
    }

    #[test]
    fn missing_reference_lists_ids() {
        let reference = reference_for(&["a"]);
        let records = vec![
            record("zeta", Method::Probenet, "regular@5", 0.5, 1.0),
            record("a", Method::Probenet, "regular@5", 0.5, 1.0),
            record("beta", Method::Probenet, "regular@5", 0.5, 1.0),
        ];
        match evaluate(&records, &reference, None) {
            Err(Error::MissingReference { ids }) => {
                assert_eq!(ids, vec!["beta".to_string(), "zeta".to_string()]);
            }
            other => panic!("expected MissingReference, got {other:?}"),
        }
    }

    #[test]
    fn emitted_files_are_byte_stable_and_structured() {
        let dir = tempfile::tempdir().unwrap();
        let reference = reference_for(&["a", "b", "c"]);
        let records = vec![
            record("a", Method::Probenet, "regular@5", 0.31, 1.0),
            record("b", Method::Probenet, "regular@5", 0.42, 1.1),
            record("c", Method::Probenet, "regular@5", 0.55, 0.9),
        ];
        let report = evaluate(&records, &reference, None).unwrap();
        let out1 = dir.path().join("r1");
        let out2 = dir.path().join("r2");
        emit_report(&records, &report, &out1).unwrap();
        // different record order, same bytes
        let mut shuffled = records.clone();
        shuffled.reverse();
        let report2 = evaluate(&shuffled, &reference, None).unwrap();
        emit_report(&shuffled, &report2, &out2).unwrap();
        for name in ["scores.csv", "report.csv", "scatter_probenet_regular_5.svg"] {
            let b1 = fs::read(out1.join(name)).unwrap();
            let b2 = fs::read(out2.join(name)).unwrap();
            assert_eq!(b1, b2, "{name} differs");
        }
        let svg = fs::read_to_string(out1.join("scatter_probenet_regular_5.svg")).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<line").count(), 1);
        assert!(svg.contains("R&#178;"));
    }

    #[test]
    fn empty_records_give_header_only_report() {
        let dir = tempfile::tempdir().unwrap();
        let report = evaluate(&[], &BTreeMap::new(), None).unwrap();
        assert!(report.groups.is_empty());
        let files = emit_report(&[], &report, dir.path()).unwrap();
        let report_csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert_eq!(
            report_csv.trim(),
            "method,variant,slope,intercept,r2,mean_abs_gap,speedup_vs_baseline,n_points"
        );
        assert_eq!(files.len(), 2); // scores.csv + report.csv, no plots
    }

    #[test]
    fn scores_csv_round_trips_and_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let r1 = vec![record("a", Method::Silhouette, "S1", 0.5, 1.5)];
        let r2 = vec![record("b", Method::Kmeans, "none+aecm", 0.25, 0.5)];
        append_scores(&path, &r1).unwrap();
        append_scores(&path, &r2).unwrap();
        let all = read_scores(&path).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0], r1[0]);
        assert_eq!(all[1], r2[0]);
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3); // one header + two rows
        assert!(text.starts_with("dataset_id,method,variant,score,wall_time_s,seed"));
    }

    #[test]
    fn bad_header_names_the_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        fs::write(&path, "dataset_id,method,variant,points,wall_time_s,seed\n").unwrap();
        match read_scores(&path) {
            Err(Error::Format { msg, .. }) => assert!(msg.contains("points"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }
}
