//! Accuracy, relative error, run-time gain, the daily-profile sweep and
//! error segmentation.

use std::hint::black_box;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;

use crate::classify::TrainedClassifier;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, nearest};
use crate::netcase::DcModel;
use crate::opf::solve_opf;
use crate::regress::TrainedRegressor;
use crate::rng::{derive_seed, rng_from_seed};

/// Anything that maps a load vector to a cost.
pub trait CostPredictor {
    fn predict_cost(&self, load: &[f64]) -> Result<f64>;
}

impl CostPredictor for TrainedRegressor {
    fn predict_cost(&self, load: &[f64]) -> Result<f64> {
        self.predict(load)
    }
}

/// The exact solver posing as a model; infeasible loads are errors.
pub struct ExactOracle<'a>(pub &'a DcModel);

impl CostPredictor for ExactOracle<'_> {
    fn predict_cost(&self, load: &[f64]) -> Result<f64> {
        solve_opf(self.0, load)?
            .cost
            .ok_or_else(|| Error::precondition("exact oracle queried at an infeasible load"))
    }
}

/// Fraction of positions where `predicted` matches `actual`.
pub fn accuracy(predicted: &[u8], actual: &[bool]) -> Result<f64> {
    if actual.is_empty() {
        return Err(Error::precondition("accuracy of an empty test set"));
    }
    if predicted.len() != actual.len() {
        return Err(Error::Dimension { expected: actual.len(), got: predicted.len() });
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| **p == u8::from(**a)).count();
    Ok(hits as f64 / actual.len() as f64)
}

pub fn classification_accuracy(model: &TrainedClassifier, test: &Dataset) -> Result<f64> {
    let predicted = test
        .samples
        .iter()
        .map(|s| model.predict(&s.load))
        .collect::<Result<Vec<u8>>>()?;
    let actual: Vec<bool> = test.samples.iter().map(|s| s.feasible).collect();
    accuracy(&predicted, &actual)
}

/// `|p − c| / c` per sample; a zero true cost is an error naming the sample.
pub fn relative_errors(predicted: &[f64], actual: &[f64]) -> Result<Vec<f64>> {
    if predicted.len() != actual.len() {
        return Err(Error::Dimension { expected: actual.len(), got: predicted.len() });
    }
    predicted
        .iter()
        .zip(actual)
        .enumerate()
        .map(|(i, (p, c))| {
            if *c == 0.0 {
                Err(Error::precondition("true cost is zero; relative error undefined").at_sample(i))
            } else {
                Ok((p - c).abs() / c.abs())
            }
        })
        .collect()
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One feasible test sample with its prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    /// Row in the test dataset.
    pub index: usize,
    pub load: Vec<f64>,
    pub true_cost: f64,
    pub predicted_cost: f64,
    pub relative_error: f64,
}

pub fn residuals<P: CostPredictor + ?Sized>(model: &P, test: &Dataset) -> Result<Vec<Residual>> {
    let mut out = Vec::new();
    for (i, s) in test.samples.iter().enumerate() {
        let Some(c) = s.cost.filter(|_| s.feasible) else { continue };
        if c == 0.0 {
            return Err(Error::precondition("true cost is zero; relative error undefined").at_sample(i));
        }
        let p = model.predict_cost(&s.load).map_err(|e| e.at_sample(i))?;
        out.push(Residual {
            index: i,
            load: s.load.clone(),
            true_cost: c,
            predicted_cost: p,
            relative_error: (p - c).abs() / c.abs(),
        });
    }
    if out.is_empty() {
        return Err(Error::precondition("test set has no feasible samples"));
    }
    Ok(out)
}

/// Mean and standard deviation of the per-sample relative error over the
/// feasible test samples.
pub fn mean_relative_error<P: CostPredictor + ?Sized>(model: &P, test: &Dataset) -> Result<(f64, f64)> {
    let errs: Vec<f64> = residuals(model, test)?.iter().map(|r| r.relative_error).collect();
    Ok(mean_std(&errs))
}

/// Timing protocol: `warmup` untimed calls, then `rounds` timed rounds of
/// `batch` calls each; the result is the median over rounds of the mean
/// time per call. The batch grows until a round lasts `min_round_seconds`,
/// so calls far below the clock resolution are still measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingConfig {
    pub warmup: usize,
    pub rounds: usize,
    pub min_calls: usize,
    pub min_round_seconds: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            warmup: 20,
            rounds: 9,
            min_calls: 100,
            min_round_seconds: 2e-3,
        }
    }
}

/// Seconds per call of `f(i)`, where `i` counts calls.
pub fn time_per_call(cfg: &TimingConfig, mut f: impl FnMut(usize)) -> f64 {
    let mut counter = 0usize;
    let mut call = |n: usize| {
        for _ in 0..n {
            f(counter);
            counter = counter.wrapping_add(1);
        }
    };
    call(cfg.warmup);
    let mut batch = cfg.min_calls.div_ceil(cfg.rounds.max(1)).max(1);
    loop {
        let t = Instant::now();
        call(batch);
        if t.elapsed().as_secs_f64() >= cfg.min_round_seconds || batch >= 1 << 24 {
            break;
        }
        batch *= 2;
    }
    let mut per_call: Vec<f64> = (0..cfg.rounds.max(1))
        .map(|_| {
            let t = Instant::now();
            call(batch);
            t.elapsed().as_secs_f64() / batch as f64
        })
        .collect();
    per_call.sort_by(f64::total_cmp);
    per_call[per_call.len() / 2]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeGain {
    pub exact_seconds: f64,
    pub predict_seconds: f64,
    pub gain: f64,
}

/// Exact OPF time over proxy time on the same loads, both timed here.
pub fn runtime_gain(
    predict: impl Fn(&[f64]) -> f64,
    model: &DcModel,
    loads: &[&[f64]],
    cfg: &TimingConfig,
) -> Result<RuntimeGain> {
    if loads.is_empty() {
        return Err(Error::precondition("no loads to time"));
    }
    for l in loads {
        solve_opf(model, l)?;
    }
    let exact_seconds = time_per_call(cfg, |i| {
        black_box(solve_opf(model, black_box(loads[i % loads.len()])).ok());
    });
    let predict_seconds = time_per_call(cfg, |i| {
        black_box(predict(black_box(loads[i % loads.len()])));
    });
    Ok(RuntimeGain {
        exact_seconds,
        predict_seconds,
        gain: exact_seconds / predict_seconds.max(f64::MIN_POSITIVE),
    })
}

/// Peak-normalized hourly load multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyProfile {
    pub multipliers: [f64; 24],
}

impl DailyProfile {
    pub fn new(multipliers: [f64; 24]) -> Result<Self> {
        if multipliers.iter().any(|m| !(*m > 0.0 && *m <= 1.0)) {
            return Err(Error::precondition("profile multipliers must lie in (0, 1]"));
        }
        if !multipliers.contains(&1.0) {
            return Err(Error::precondition("profile must peak at exactly 1"));
        }
        Ok(DailyProfile { multipliers })
    }

    pub fn constant() -> Self {
        DailyProfile { multipliers: [1.0; 24] }
    }

    /// Parse `hour,multiplier` CSV with hours 0 to 23 in order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| Error::Format(e.to_string()))?;
        if header.iter().collect::<Vec<_>>() != ["hour", "multiplier"] {
            return Err(Error::Format("profile header must be 'hour,multiplier'".into()));
        }
        let mut m = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Syntax { line, message: e.to_string() })?;
            let bad = |what: &str| Error::Syntax { line, message: format!("invalid {what}") };
            let hour: usize = rec[0].parse().map_err(|_| bad("hour"))?;
            if hour != i {
                return Err(Error::Syntax { line, message: format!("expected hour {i}, found {hour}") });
            }
            m.push(rec[1].parse::<f64>().map_err(|_| bad("multiplier"))?);
        }
        let arr: [f64; 24] = m
            .try_into()
            .map_err(|v: Vec<f64>| Error::Format(format!("profile has {} hours, expected 24", v.len())))?;
        Self::new(arr)
    }

    pub fn bundled() -> Self {
        Self::parse(crate::bundled::DAILY_PROFILE).expect("bundled profile is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub per_hour_samples: usize,
    /// Each bus load is scaled by an independent uniform factor in `1 ± jitter`.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            per_hour_samples: 100,
            jitter: 0.05,
            seed: 0,
        }
    }
}

/// Mean relative error of `predictor` for each hour of `profile` applied to
/// the `peak` loads. Hours where every sample is infeasible give `None`.
pub fn profile_sweep<P: CostPredictor + ?Sized>(
    predictor: &P,
    model: &DcModel,
    profile: &DailyProfile,
    peak: &[f64],
    cfg: &SweepConfig,
) -> Result<Vec<Option<f64>>> {
    if cfg.per_hour_samples == 0 {
        return Err(Error::precondition("per_hour_samples must be at least 1"));
    }
    if !(0.0..1.0).contains(&cfg.jitter) {
        return Err(Error::precondition("jitter must lie in [0, 1)"));
    }
    let mut out = Vec::with_capacity(24);
    for (hour, m) in profile.multipliers.iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, hour as u64));
        let mut errs = Vec::new();
        for _ in 0..cfg.per_hour_samples {
            let load: Vec<f64> = peak
                .iter()
                .map(|p| {
                    let f = if cfg.jitter > 0.0 {
                        1.0 + rng.random_range(-cfg.jitter..cfg.jitter)
                    } else {
                        1.0
                    };
                    p * m * f
                })
                .collect();
            let Some(c) = solve_opf(model, &load)?.cost else { continue };
            let p = predictor.predict_cost(&load)?;
            errs.push(relative_errors(&[p], &[c])?[0]);
        }
        out.push((!errs.is_empty()).then(|| mean_std(&errs).0));
    }
    Ok(out)
}

/// Low to high error groups from 1-D K-means on relative errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSegmentation {
    /// Ascending.
    pub centroids: Vec<f64>,
    pub labels: Vec<usize>,
    /// `[low, high]` per segment; adjacent intervals meet at centroid midpoints.
    pub intervals: Vec<(f64, f64)>,
}

pub fn kmeans_segment(residuals: &[f64], k: usize, seed: u64) -> Result<ErrorSegmentation> {
    if k < 2 {
        return Err(Error::precondition("segmentation needs k >= 2"));
    }
    let points: Vec<Vec<f64>> = residuals.iter().map(|r| vec![*r]).collect();
    let km = kmeans(&points, k, seed)?;
    let mut centroids: Vec<f64> = km.centroids.iter().map(|c| c[0]).collect();
    centroids.sort_by(f64::total_cmp);
    let as_points: Vec<Vec<f64>> = centroids.iter().map(|c| vec![*c]).collect();
    let labels = points.iter().map(|p| nearest(&as_points, p)).collect();
    let max = residuals.iter().copied().fold(0.0, f64::max);
    let mut bounds = vec![0.0];
    bounds.extend(centroids.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    bounds.push(max);
    let intervals = bounds.windows(2).map(|w| (w[0], w[1])).collect();
    Ok(ErrorSegmentation {
        centroids,
        labels,
        intervals,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub projected: Vec<Vec<f64>>,
    /// Share of total variance per kept component, non-increasing.
    pub explained_variance_ratio: Vec<f64>,
    /// Unit principal directions, one per kept component.
    pub components: Vec<Vec<f64>>,
}

/// Project mean-centred `loads` onto the top `dims` principal directions.
pub fn pca_project(loads: &[Vec<f64>], dims: usize) -> Result<Pca> {
    let n = loads.len();
    let d = loads.first().map_or(0, Vec::len);
    if dims == 0 || dims > d {
        return Err(Error::precondition(format!("dims must lie in 1..={d}")));
    }
    if n < 2 {
        return Err(Error::precondition("PCA needs at least two samples"));
    }
    let mean: Vec<f64> = (0..d).map(|j| loads.iter().map(|l| l[j]).sum::<f64>() / n as f64).collect();
    let x = DMatrix::from_fn(n, d, |i, j| loads[i][j] - mean[j]);
    let cov = x.transpose() * &x / (n as f64 - 1.0);
    let total = cov.trace();
    if !(total > 0.0) {
        return Ok(Pca {
            projected: vec![vec![0.0; dims]; n],
            explained_variance_ratio: vec![0.0; dims],
            components: (0..dims).map(|k| (0..d).map(|j| f64::from(j == k)).collect()).collect(),
        });
    }
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let components: Vec<Vec<f64>> = order[..dims]
        .iter()
        .map(|&k| {
            let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            // Sign convention: largest-magnitude entry positive.
            let pivot = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            if pivot < 0.0 {
                v.iter().map(|e| -e).collect()
            } else {
                v
            }
        })
        .collect();
    let explained_variance_ratio = order[..dims]
        .iter()
        .map(|&k| eig.eigenvalues[k].max(0.0) / total)
        .collect();
    let projected = (0..n)
        .map(|i| components.iter().map(|c| (0..d).map(|j| x[(i, j)] * c[j]).sum()).collect())
        .collect();
    Ok(Pca {
        projected,
        explained_variance_ratio,
        components,
    })
}

/// Ordered `key=value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub entries: Vec<(String, String)>,
}

impl EvalReport {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Format(format!("{}: {e}", path.display()))
}

/// `l_1..l_d,true_cost,predicted_cost,relative_error[,segment]`.
pub fn write_residuals(path: impl AsRef<Path>, rows: &[Residual], segments: Option<&[usize]>) -> Result<()> {
    let path = path.as_ref();
    let d = rows.first().map_or(0, |r| r.load.len());
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = (1..=d).map(|i| format!("l_{i}")).collect();
    header.extend(["true_cost", "predicted_cost", "relative_error"].map(String::from));
    if segments.is_some() {
        header.push("segment".into());
    }
    w.write_record(&header).map_err(csv_err(path))?;
    for (i, r) in rows.iter().enumerate() {
        let mut rec: Vec<String> = r.load.iter().map(|v| format!("{v:?}")).collect();
        rec.extend([r.true_cost, r.predicted_cost, r.relative_error].map(|v| format!("{v:?}")));
        if let Some(s) = segments {
            rec.push(s[i].to_string());
        }
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Read a file written by [`write_residuals`]; any `segment` column is dropped.
pub fn read_residuals(path: impl AsRef<Path>) -> Result<Vec<Residual>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = rdr.headers().map_err(csv_err(path))?.iter().map(String::from).collect();
    let d = header.iter().take_while(|h| h.starts_with("l_")).count();
    let tail: Vec<&str> = header[d..].iter().map(String::as_str).collect();
    if tail != ["true_cost", "predicted_cost", "relative_error"]
        && tail != ["true_cost", "predicted_cost", "relative_error", "segment"]
    {
        return Err(Error::Format(format!("{}: not a residuals file", path.display())));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Syntax { line, message: e.to_string() })?;
        let v = (0..d + 3)
            .map(|j| {
                rec.get(j).and_then(|f| f.parse::<f64>().ok()).ok_or_else(|| Error::Syntax {
                    line,
                    message: format!("column {} is not a number", header[j]),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(Residual {
            index: i,
            load: v[..d].to_vec(),
            true_cost: v[d],
            predicted_cost: v[d + 1],
            relative_error: v[d + 2],
        });
    }
    Ok(out)
}

/// `hour,mean_rel_err`, empty where the hour had no feasible sample.
pub fn write_profile(path: impl AsRef<Path>, errors: &[Option<f64>]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["hour", "mean_rel_err"]).map_err(csv_err(path))?;
    for (h, e) in errors.iter().enumerate() {
        let v = e.map(|v| format!("{v:?}")).unwrap_or_default();
        w.write_record([h.to_string(), v]).map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// `pc_1..pc_k,segment`.
pub fn write_pca(path: impl AsRef<Path>, projected: &[Vec<f64>], segments: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let k = projected.first().map_or(0, Vec::len);
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = (1..=k).map(|i| format!("pc_{i}")).collect();
    header.push("segment".into());
    w.write_record(&header).map_err(csv_err(path))?;
    for (p, s) in projected.iter().zip(segments) {
        let mut rec: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        rec.push(s.to_string());
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Write `text` to `path`.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
