//! Cost regressors `Ĉ*(l)`, trained on the feasible samples of a dataset.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classify::schedule;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hyper::{Hyperparams, RegressorKind};
use crate::kmeans::{kmeans, nearest};
use crate::linalg::{least_squares, Cholesky};
use crate::mlp::{Loss, Mlp};
use crate::rng::{rng_from_seed, stage_seed};
use crate::standardize::{target_scale, Standardizer};

/// Jitter is multiplied by ten until the kernel factors or this is exceeded.
pub const MAX_JITTER: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    pub hyper: Hyperparams,
}

impl RegressorSpec {
    pub fn new(kind: RegressorKind) -> Self {
        RegressorSpec {
            kind,
            hyper: Hyperparams::for_regressor(kind),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.hyper.seed = seed;
        self
    }
}

/// `intercept + coefficients · l` on raw loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub standardizer: Standardizer,
    /// Input features the kernel sees; the rest were constant in training.
    pub active: Vec<usize>,
    /// One per active feature, in standardized units.
    pub lengthscales: Vec<f64>,
    pub variance: f64,
    /// Diagonal jitter the final factorization needed.
    pub jitter: f64,
    pub y_mean: f64,
    pub y_std: f64,
    /// Stored training inputs, standardized and divided by the lengthscales,
    /// row-major with stride `active.len()`.
    pub inputs: Vec<f64>,
    /// Dual weights `(K + jitter·I)⁻¹ y`.
    pub alpha: Vec<f64>,
    pub log_marginal_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorParams {
    Linear(LinearFit),
    Piecewise {
        standardizer: Standardizer,
        centroids: Vec<Vec<f64>>,
        segments: Vec<LinearFit>,
    },
    Gp(GpModel),
    Mlp {
        standardizer: Standardizer,
        y_mean: f64,
        y_std: f64,
        net: Mlp,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedRegressor {
    pub kind: RegressorKind,
    pub hyper: Hyperparams,
    pub dim: usize,
    /// Feasible samples the model was fitted on, after any subsampling.
    pub fitted_points: usize,
    pub params: RegressorParams,
}

/// Matérn 3/2 correlation at scaled distance `r`.
pub fn matern32(r: f64) -> f64 {
    let s = 3f64.sqrt() * r;
    (1.0 + s) * (-s).exp()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `σ² k(‖(xᵢ − xⱼ)/ℓ‖) + jitter·δᵢⱼ` for inputs already divided by `ℓ`.
pub fn kernel_matrix(scaled: &[Vec<f64>], variance: f64, jitter: f64) -> DMatrix<f64> {
    let n = scaled.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = variance + jitter;
        for i in j + 1..n {
            let v = variance * matern32(distance(&scaled[i], &scaled[j]));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn scale_rows(xs: &[Vec<f64>], lengthscales: &[f64]) -> Vec<Vec<f64>> {
    xs.iter()
        .map(|x| x.iter().zip(lengthscales).map(|(v, l)| v / l).collect())
        .collect()
}

struct GpFit {
    factor: Cholesky,
    alpha: DVector<f64>,
    jitter: f64,
    lml: f64,
}

fn gp_fit(scaled: &[Vec<f64>], y: &[f64], variance: f64, jitter: f64) -> Result<GpFit> {
    let mut jitter = jitter;
    let base = kernel_matrix(scaled, variance, 0.0);
    loop {
        let mut k = base.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += jitter;
        }
        if let Some(factor) = Cholesky::factor(k) {
            let yv = DVector::from_column_slice(y);
            let alpha = factor.solve(&yv);
            let n = y.len() as f64;
            let lml = -0.5 * yv.dot(&alpha) - 0.5 * factor.log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
            return Ok(GpFit { factor, alpha, jitter, lml });
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
        if jitter > MAX_JITTER * (1.0 + 1e-9) {
            return Err(Error::numerical(format!(
                "kernel matrix is not positive definite with jitter up to {MAX_JITTER}"
            )));
        }
    }
}

fn median_pairwise_distance(xs: &[Vec<f64>]) -> f64 {
    let m = xs.len().min(1000);
    let mut d = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            d.push(distance(&xs[i], &xs[j]));
        }
    }
    d.sort_by(f64::total_cmp);
    let med = d.get(d.len() / 2).copied().unwrap_or(1.0);
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Log-spaced factors `10^((i − c)/4)` centred on 1.
fn grid_factors(points: usize) -> Vec<f64> {
    let c = (points as f64 - 1.0) / 2.0;
    (0..points).map(|i| 10f64.powf((i as f64 - c) / 4.0)).collect()
}

fn select_lengthscales(xs: &[Vec<f64>], y: &[f64], h: &Hyperparams, ard: bool) -> Result<Vec<f64>> {
    let k = xs[0].len();
    if let Some(l) = h.lengthscale {
        return Ok(vec![l; k]);
    }
    let lml = |ls: &[f64]| gp_fit(&scale_rows(xs, ls), y, h.signal_variance, h.jitter).map(|f| f.lml);
    let factors = grid_factors(h.grid_points);
    let center = median_pairwise_distance(xs);
    let mut best = (f64::NEG_INFINITY, vec![center; k]);
    for f in &factors {
        let ls = vec![center * f; k];
        let v = lml(&ls)?;
        if v > best.0 {
            best = (v, ls);
        }
    }
    if ard {
        for _sweep in 0..2 {
            for j in 0..k {
                let current = best.1[j];
                for f in &factors {
                    if *f == 1.0 {
                        continue;
                    }
                    let mut ls = best.1.clone();
                    ls[j] = current * f;
                    let v = lml(&ls)?;
                    if v > best.0 {
                        best = (v, ls);
                    }
                }
            }
        }
    }
    Ok(best.1)
}

fn fit_linear(rows: &[&[f64]], y: &[f64]) -> Result<LinearFit> {
    let d = rows[0].len();
    let st = Standardizer::fit(rows);
    let active = st.active();
    if rows.len() < active.len() + 1 {
        return Err(Error::precondition(format!(
            "{} samples cannot determine {} coefficients",
            rows.len(),
            active.len() + 1
        )));
    }
    let x = DMatrix::from_fn(rows.len(), active.len() + 1, |i, j| if j == 0 { 1.0 } else { rows[i][active[j - 1]] });
    let beta = least_squares(&x, &DVector::from_column_slice(y))?;
    let mut coefficients = vec![0.0; d];
    for (j, &a) in active.iter().enumerate() {
        coefficients[a] = beta[j + 1];
    }
    Ok(LinearFit {
        intercept: beta[0],
        coefficients,
    })
}

fn feasible_rows(train: &Dataset) -> Result<(Vec<&[f64]>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, s) in train.samples.iter().enumerate() {
        let Some(c) = s.cost.filter(|_| s.feasible) else { continue };
        if s.load.len() != train.dim {
            return Err(Error::Dimension { expected: train.dim, got: s.load.len() }.at_sample(i));
        }
        if s.load.iter().chain([&c]).any(|v| !v.is_finite()) {
            return Err(Error::precondition("non-finite load or cost").at_sample(i));
        }
        xs.push(s.load.as_slice());
        ys.push(c);
    }
    if xs.len() < train.dim + 1 {
        return Err(Error::precondition(format!(
            "{} feasible samples; regression on {} loads needs at least {}",
            xs.len(),
            train.dim,
            train.dim + 1
        )));
    }
    Ok((xs, ys))
}

/// Uniform subsample of `m` of `0..n`, returned in ascending order.
fn subsample(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if m < n {
        idx.shuffle(&mut rng_from_seed(seed));
        idx.truncate(m);
        idx.sort_unstable();
    }
    idx
}

pub fn train_regressor(spec: &RegressorSpec, train: &Dataset) -> Result<TrainedRegressor> {
    let h = &spec.hyper;
    h.validate()?;
    let (mut xs, mut ys) = feasible_rows(train)?;
    if spec.kind.is_gp() && xs.len() > h.gp_max_points {
        let keep = subsample(xs.len(), h.gp_max_points, stage_seed(h.seed, "gp-cap"));
        xs = keep.iter().map(|&i| xs[i]).collect();
        ys = keep.iter().map(|&i| ys[i]).collect();
    }
    let params = match spec.kind {
        RegressorKind::Linear => RegressorParams::Linear(fit_linear(&xs, &ys)?),
        RegressorKind::PiecewiseLinear => {
            let standardizer = Standardizer::fit(&xs);
            let z: Vec<Vec<f64>> = xs.iter().map(|x| standardizer.transform(x)).collect();
            let km = kmeans(&z, h.segments, stage_seed(h.seed, "segments"))?;
            let mut segments = Vec::with_capacity(h.segments);
            for c in 0..h.segments {
                let members: Vec<usize> = (0..xs.len()).filter(|&i| km.labels[i] == c).collect();
                let rows: Vec<&[f64]> = members.iter().map(|&i| xs[i]).collect();
                let targets: Vec<f64> = members.iter().map(|&i| ys[i]).collect();
                let fit = fit_linear(&rows, &targets).map_err(|e| match e {
                    Error::Precondition(m) | Error::Singular(m) => Error::Singular(format!("segment {c}: {m}")),
                    other => other,
                })?;
                segments.push(fit);
            }
            RegressorParams::Piecewise {
                standardizer,
                centroids: km.centroids,
                segments,
            }
        }
        RegressorKind::GpMatern32 | RegressorKind::GpArdMatern32 => {
            let standardizer = Standardizer::fit(&xs);
            let active = standardizer.active();
            let z: Vec<Vec<f64>> = xs.iter().map(|x| standardizer.transform_active(x, &active)).collect();
            let (y_mean, y_std) = target_scale(&ys);
            let yz: Vec<f64> = ys.iter().map(|v| (v - y_mean) / y_std).collect();
            let pick = subsample(z.len(), h.gp_fit_points, stage_seed(h.seed, "gp-grid"));
            let zs: Vec<Vec<f64>> = pick.iter().map(|&i| z[i].clone()).collect();
            let yzs: Vec<f64> = pick.iter().map(|&i| yz[i]).collect();
            let lengthscales = if active.is_empty() {
                Vec::new()
            } else {
                select_lengthscales(&zs, &yzs, h, spec.kind == RegressorKind::GpArdMatern32)?
            };
            let scaled = scale_rows(&z, &lengthscales);
            let fit = gp_fit(&scaled, &yz, h.signal_variance, h.jitter)?;
            drop(fit.factor);
            RegressorParams::Gp(GpModel {
                standardizer,
                active,
                lengthscales,
                variance: h.signal_variance,
                jitter: fit.jitter,
                y_mean,
                y_std,
                inputs: scaled.concat(),
                alpha: fit.alpha.iter().copied().collect(),
                log_marginal_likelihood: fit.lml,
            })
        }
        RegressorKind::Mlp => {
            let standardizer = Standardizer::fit(&xs);
            let z: Vec<Vec<f64>> = xs.iter().map(|x| standardizer.transform(x)).collect();
            let (y_mean, y_std) = target_scale(&ys);
            let yz: Vec<f64> = ys.iter().map(|v| (v - y_mean) / y_std).collect();
            let mut rng = rng_from_seed(stage_seed(h.seed, "mlp"));
            let mut net = Mlp::new(train.dim, h.hidden, &mut rng);
            net.train(&z, &yz, Loss::Squared, &schedule(h), &mut rng);
            RegressorParams::Mlp {
                standardizer,
                y_mean,
                y_std,
                net,
            }
        }
    };
    Ok(TrainedRegressor {
        kind: spec.kind,
        hyper: h.clone(),
        dim: train.dim,
        fitted_points: xs.len(),
        params,
    })
}

impl GpModel {
    pub fn stored_points(&self) -> usize {
        self.alpha.len()
    }

    fn predict(&self, load: &[f64]) -> f64 {
        let k = self.active.len();
        let q: Vec<f64> = self
            .active
            .iter()
            .zip(&self.lengthscales)
            .map(|(&j, l)| (load[j] - self.standardizer.mean[j]) / self.standardizer.std[j] / l)
            .collect();
        let mut s = 0.0;
        if k == 0 {
            s = self.alpha.iter().sum();
        } else {
            for (x, a) in self.inputs.chunks_exact(k).zip(&self.alpha) {
                s += a * matern32(distance(x, &q));
            }
        }
        self.y_mean + self.y_std * self.variance * s
    }
}

impl TrainedRegressor {
    pub fn predict(&self, load: &[f64]) -> Result<f64> {
        if load.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: load.len() });
        }
        Ok(match &self.params {
            RegressorParams::Linear(fit) => fit.predict(load),
            RegressorParams::Piecewise {
                standardizer,
                centroids,
                segments,
            } => segments[nearest(centroids, &standardizer.transform(load))].predict(load),
            RegressorParams::Gp(gp) => gp.predict(load),
            RegressorParams::Mlp {
                standardizer,
                y_mean,
                y_std,
                net,
            } => y_mean + y_std * net.output(&standardizer.transform(load)),
        })
    }

    /// Number of training points a prediction touches (GP only; 0 otherwise).
    pub fn stored_points(&self) -> usize {
        match &self.params {
            RegressorParams::Gp(gp) => gp.stored_points(),
            _ => 0,
        }
    }
}

/// Free-function form of [`TrainedRegressor::predict`].
pub fn predict_cost(model: &TrainedRegressor, load: &[f64]) -> Result<f64> {
    model.predict(load)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledSample;
    use rand::Rng;

    fn data(rows: Vec<(Vec<f64>, f64)>) -> Dataset {
        let dim = rows[0].0.len();
        let samples = rows
            .into_iter()
            .map(|(load, c)| LabeledSample {
                load,
                feasible: true,
                cost: Some(c),
                solve_time: 0.0,
            })
            .collect();
        Dataset::new("test", dim, samples).unwrap()
    }

    fn random_rows(n: usize, d: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        data((0..n)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0)).collect();
                let c = f(&x);
                (x, c)
            })
            .collect())
    }

    #[test]
    fn ols_recovers_exact_linear_costs() {
        let d = random_rows(50, 2, 1, |x| 3.0 * x[0] + 5.0 * x[1]);
        let m = train_regressor(&RegressorSpec::new(RegressorKind::Linear), &d).unwrap();
        let RegressorParams::Linear(fit) = &m.params else { panic!() };
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-8 && (fit.coefficients[1] - 5.0).abs() < 1e-8);
        assert!(fit.intercept.abs() < 1e-8);
        assert!((m.predict(&[1.0, 1.0]).unwrap() - 8.0).abs() < 1e-8);
    }

    #[test]
    fn ols_residuals_are_orthogonal_to_the_design() {
        let d = random_rows(200, 3, 2, |x| x[0] * x[1] + (x[2] * 3.0).sin());
        let m = train_regressor(&RegressorSpec::new(RegressorKind::Linear), &d).unwrap();
        let mut xtr = [0.0; 4];
        let mut ynorm = 0.0;
        for s in &d.samples {
            let r = s.cost.unwrap() - m.predict(&s.load).unwrap();
            xtr[0] += r;
            for j in 0..3 {
                xtr[j + 1] += s.load[j] * r;
            }
            ynorm += s.cost.unwrap().powi(2);
        }
        let ynorm = ynorm.sqrt();
        assert!(xtr.iter().all(|v| v.abs() <= 1e-8 * ynorm), "{xtr:?}");
    }

    #[test]
    fn constant_loads_are_dropped_from_ols() {
        let d = random_rows(30, 3, 3, |x| 2.0 * x[0] + 1.0);
        let pinned = d.with_samples(
            d.samples
                .iter()
                .map(|s| LabeledSample {
                    load: vec![s.load[0], 0.0, 4.0],
                    ..s.clone()
                })
                .collect(),
        );
        let m = train_regressor(&RegressorSpec::new(RegressorKind::Linear), &pinned).unwrap();
        let RegressorParams::Linear(fit) = &m.params else { panic!() };
        assert_eq!(&fit.coefficients[1..], &[0.0, 0.0]);
        assert!((m.predict(&[1.0, 0.0, 4.0]).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn too_few_feasible_samples() {
        let d = data(vec![(vec![1.0, 2.0], 1.0), (vec![2.0, 1.0], 2.0)]);
        let err = train_regressor(&RegressorSpec::new(RegressorKind::Linear), &d).unwrap_err();
        assert!(err.to_string().contains("at least 3"), "{err}");
    }

    #[test]
    fn gp_interpolates_training_points() {
        let d = random_rows(200, 2, 4, |x| (2.0 * x[0]).sin() + x[1] * x[1]);
        for kind in [RegressorKind::GpMatern32, RegressorKind::GpArdMatern32] {
            // Noiseless: the default jitter shifts the fit by jitter·α.
            let mut spec = RegressorSpec::new(kind);
            spec.hyper.jitter = 0.0;
            let m = train_regressor(&spec, &d).unwrap();
            for s in &d.samples {
                let err = (m.predict(&s.load).unwrap() - s.cost.unwrap()).abs();
                assert!(err <= 1e-6, "{kind:?} err {err}");
            }
        }
    }

    #[test]
    fn gp_kernel_is_psd() {
        let mut rng = rng_from_seed(5);
        let xs: Vec<Vec<f64>> = (0..80)
            .map(|i| {
                if i % 10 == 0 {
                    vec![0.5, 0.5, 0.5]
                } else {
                    (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()
                }
            })
            .collect();
        let k = kernel_matrix(&xs, 1.0, 1e-8);
        assert_eq!(k, k.transpose());
        let min = k.symmetric_eigenvalues().min();
        assert!(min >= -1e-10, "{min}");
    }

    #[test]
    fn gp_cap_subsamples_training_points() {
        let d = random_rows(300, 2, 6, |x| x[0] + x[1]);
        let mut spec = RegressorSpec::new(RegressorKind::GpMatern32);
        spec.hyper.gp_max_points = 120;
        let m = train_regressor(&spec, &d).unwrap();
        assert_eq!((m.fitted_points, m.stored_points()), (120, 120));
    }

    #[test]
    fn piecewise_recovers_two_slopes() {
        let mut rows = Vec::new();
        for i in 0..100 {
            let l = 0.8 * i as f64 / 99.0;
            rows.push((vec![l], l));
            let l = 1.2 + 0.8 * i as f64 / 99.0;
            rows.push((vec![l], 2.0 * l - 1.0));
        }
        let mut spec = RegressorSpec::new(RegressorKind::PiecewiseLinear);
        spec.hyper.segments = 2;
        let m = train_regressor(&spec, &data(rows)).unwrap();
        let RegressorParams::Piecewise { standardizer, centroids, segments } = &m.params else { panic!() };
        let mut slopes: Vec<f64> = segments.iter().map(|s| s.coefficients[0]).collect();
        slopes.sort_by(f64::total_cmp);
        assert!((slopes[0] - 1.0).abs() < 1e-3 && (slopes[1] - 2.0).abs() < 1e-3, "{slopes:?}");
        for (c, seg) in centroids.iter().zip(segments) {
            let q = [standardizer.mean[0] + standardizer.std[0] * c[0]];
            assert_eq!(m.predict(&q).unwrap(), seg.predict(&q));
        }
    }

    #[test]
    fn mlp_fits_a_smooth_cost() {
        let d = random_rows(400, 2, 7, |x| 10.0 + x[0] * x[0] + x[1]);
        let m = train_regressor(&RegressorSpec::new(RegressorKind::Mlp).with_seed(1), &d).unwrap();
        let mean_rel: f64 = d
            .samples
            .iter()
            .map(|s| (m.predict(&s.load).unwrap() - s.cost.unwrap()).abs() / s.cost.unwrap())
            .sum::<f64>()
            / d.n() as f64;
        assert!(mean_rel < 0.02, "{mean_rel}");
    }

    #[test]
    fn training_is_deterministic() {
        let d = random_rows(120, 2, 8, |x| 1.0 + x[0] * x[1]);
        for kind in RegressorKind::ALL {
            let mut spec = RegressorSpec::new(kind).with_seed(3);
            spec.hyper.epochs = 5;
            spec.hyper.segments = 2;
            let a = train_regressor(&spec, &d).unwrap();
            assert_eq!(a, train_regressor(&spec, &d).unwrap(), "{kind:?}");
            assert!(a.predict(&[0.3, 0.9]).unwrap().is_finite());
            assert!(a.predict(&[0.3]).is_err());
        }
    }
}
