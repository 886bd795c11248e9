//! Feasibility classifiers `δ̂(l)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hyper::{ClassifierKind, Hyperparams};
use crate::mlp::{sigmoid, Loss, Mlp, Schedule};
use crate::rng::{derive_seed, rng_from_seed, stage_seed};
use crate::standardize::Standardizer;
use crate::tree::{Splitter, Tree, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub hyper: Hyperparams,
}

impl ClassifierSpec {
    /// The kind with its default hyperparameters.
    pub fn new(kind: ClassifierKind) -> Self {
        ClassifierSpec {
            kind,
            hyper: Hyperparams::for_classifier(kind),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.hyper.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierParams {
    Constant {
        class: u8,
    },
    GaussianNb {
        log_prior: [f64; 2],
        mean: [Vec<f64>; 2],
        var: [Vec<f64>; 2],
    },
    Logistic {
        weights: Vec<f64>,
        bias: f64,
    },
    Tree(Tree),
    Forest {
        trees: Vec<Tree>,
    },
    Mlp(Mlp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub kind: ClassifierKind,
    pub hyper: Hyperparams,
    pub dim: usize,
    pub standardizer: Standardizer,
    pub params: ClassifierParams,
}

fn features(data: &Dataset) -> Result<(Vec<&[f64]>, Vec<u8>)> {
    if data.is_empty() {
        return Err(Error::precondition("training set is empty"));
    }
    let mut xs = Vec::with_capacity(data.n());
    for (i, s) in data.samples.iter().enumerate() {
        if s.load.len() != data.dim {
            return Err(Error::Dimension { expected: data.dim, got: s.load.len() }.at_sample(i));
        }
        if s.load.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("non-finite feature").at_sample(i));
        }
        xs.push(s.load.as_slice());
    }
    let ys = data.samples.iter().map(|s| u8::from(s.feasible)).collect();
    Ok((xs, ys))
}

fn forest_features(kind: ClassifierKind, hyper: &Hyperparams, d: usize) -> usize {
    match (kind, hyper.max_features) {
        (_, Some(m)) => m.min(d),
        (ClassifierKind::DecisionTree, None) => d,
        (_, None) => ((d as f64).sqrt().round() as usize).clamp(1, d),
    }
}

pub fn train_classifier(spec: &ClassifierSpec, train: &Dataset) -> Result<TrainedClassifier> {
    spec.hyper.validate()?;
    let (raw, y) = features(train)?;
    let d = train.dim;
    let standardizer = Standardizer::fit(&raw);
    let xs: Vec<Vec<f64>> = raw.iter().map(|x| standardizer.transform(x)).collect();
    let ones = y.iter().filter(|&&c| c == 1).count();
    let h = &spec.hyper;

    let params = if spec.kind == ClassifierKind::Trivial {
        ClassifierParams::Constant { class: 1 }
    } else if ones == 0 || ones == y.len() {
        ClassifierParams::Constant { class: u8::from(ones > 0) }
    } else {
        match spec.kind {
            ClassifierKind::Trivial => unreachable!(),
            ClassifierKind::GaussianNb => fit_naive_bayes(&xs, &y, h.var_floor),
            ClassifierKind::Logistic => fit_logistic(&xs, &y, h.l2, h.max_iter)?,
            ClassifierKind::DecisionTree | ClassifierKind::RandomForest | ClassifierKind::ExtraTrees => {
                let cols: Vec<Vec<f64>> = (0..d).map(|j| xs.iter().map(|x| x[j]).collect()).collect();
                let params = TreeParams {
                    max_depth: h.max_depth,
                    min_samples_split: h.min_samples_split,
                    min_samples_leaf: h.min_samples_leaf,
                    max_features: forest_features(spec.kind, h, d),
                    splitter: if spec.kind == ClassifierKind::ExtraTrees {
                        Splitter::Random
                    } else {
                        Splitter::Best
                    },
                };
                let n = xs.len();
                if spec.kind == ClassifierKind::DecisionTree {
                    let mut rng = rng_from_seed(stage_seed(h.seed, "tree"));
                    ClassifierParams::Tree(Tree::fit(&cols, &y, (0..n).collect(), &params, &mut rng))
                } else {
                    let trees = (0..h.n_trees)
                        .map(|t| {
                            let mut rng = rng_from_seed(derive_seed(h.seed, t as u64));
                            let rows = if h.bootstrap {
                                use rand::Rng;
                                (0..n).map(|_| rng.random_range(0..n)).collect()
                            } else {
                                (0..n).collect()
                            };
                            Tree::fit(&cols, &y, rows, &params, &mut rng)
                        })
                        .collect();
                    ClassifierParams::Forest { trees }
                }
            }
            ClassifierKind::Mlp => {
                let mut rng = rng_from_seed(stage_seed(h.seed, "mlp"));
                let mut net = Mlp::new(d, h.hidden, &mut rng);
                let targets: Vec<f64> = y.iter().map(|&c| c as f64).collect();
                net.train(&xs, &targets, Loss::CrossEntropy, &schedule(h), &mut rng);
                ClassifierParams::Mlp(net)
            }
        }
    };
    Ok(TrainedClassifier {
        kind: spec.kind,
        hyper: spec.hyper.clone(),
        dim: d,
        standardizer,
        params,
    })
}

pub(crate) fn schedule(h: &Hyperparams) -> Schedule {
    Schedule {
        epochs: h.epochs,
        batch_size: h.batch_size,
        learning_rate: h.learning_rate,
        lr_decay: h.lr_decay,
        decay_every: h.decay_every,
    }
}

fn fit_naive_bayes(xs: &[Vec<f64>], y: &[u8], floor: f64) -> ClassifierParams {
    let d = xs[0].len();
    let mut count = [0usize; 2];
    let mut mean = [vec![0.0; d], vec![0.0; d]];
    for (x, &c) in xs.iter().zip(y) {
        count[c as usize] += 1;
        for (m, v) in mean[c as usize].iter_mut().zip(x) {
            *m += v;
        }
    }
    for c in 0..2 {
        mean[c].iter_mut().for_each(|m| *m /= count[c] as f64);
    }
    let mut var = [vec![0.0; d], vec![0.0; d]];
    for (x, &c) in xs.iter().zip(y) {
        let c = c as usize;
        for j in 0..d {
            var[c][j] += (x[j] - mean[c][j]).powi(2);
        }
    }
    for c in 0..2 {
        var[c].iter_mut().for_each(|v| *v = (*v / count[c] as f64).max(floor));
    }
    let n = xs.len() as f64;
    ClassifierParams::GaussianNb {
        log_prior: [(count[0] as f64 / n).ln(), (count[1] as f64 / n).ln()],
        mean,
        var,
    }
}

/// Penalized mean cross-entropy and its gradient; the bias is unpenalized.
fn logistic_objective(xs: &[Vec<f64>], y: &[u8], l2: f64, w: &DVector<f64>) -> (f64, DVector<f64>, DVector<f64>) {
    let d = w.len() - 1;
    let n = xs.len() as f64;
    let mut f = 0.0;
    let mut g = DVector::zeros(d + 1);
    let mut s = DVector::zeros(xs.len());
    for (i, (x, &c)) in xs.iter().zip(y).enumerate() {
        let z = w[d] + (0..d).map(|j| w[j] * x[j]).sum::<f64>();
        let yc = c as f64;
        f += z.max(0.0) - yc * z + (-z.abs()).exp().ln_1p();
        let p = sigmoid(z);
        for j in 0..d {
            g[j] += (p - yc) * x[j];
        }
        g[d] += p - yc;
        s[i] = p * (1.0 - p);
    }
    f /= n;
    g /= n;
    for j in 0..d {
        f += 0.5 * l2 * w[j] * w[j];
        g[j] += l2 * w[j];
    }
    (f, g, s)
}

/// Newton's method with backtracking line search.
fn fit_logistic(xs: &[Vec<f64>], y: &[u8], l2: f64, max_iter: usize) -> Result<ClassifierParams> {
    let d = xs[0].len();
    let n = xs.len() as f64;
    let mut w = DVector::zeros(d + 1);
    let (mut f, mut g, mut s) = logistic_objective(xs, y, l2, &w);
    for _ in 0..max_iter {
        if g.amax() < 1e-10 {
            break;
        }
        let mut hess = DMatrix::zeros(d + 1, d + 1);
        for (x, si) in xs.iter().zip(s.iter()) {
            for a in 0..=d {
                let xa = if a < d { x[a] } else { 1.0 };
                for b in 0..=a {
                    let xb = if b < d { x[b] } else { 1.0 };
                    hess[(a, b)] += si * xa * xb;
                }
            }
        }
        hess /= n;
        for a in 0..=d {
            hess[(a, a)] += if a < d { l2 } else { 1e-12 };
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        let step = hess
            .cholesky()
            .ok_or_else(|| Error::numerical("logistic Hessian is not positive definite"))?
            .solve(&(-&g));
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let trial = &w + &step * t;
            let (ft, gt, st) = logistic_objective(xs, y, l2, &trial);
            if ft <= f + 1e-4 * t * slope {
                (w, f, g, s) = (trial, ft, gt, st);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(ClassifierParams::Logistic {
        weights: w.rows(0, d).iter().copied().collect(),
        bias: w[d],
    })
}

impl TrainedClassifier {
    /// Predicted feasibility in `{0, 1}`.
    pub fn predict(&self, load: &[f64]) -> Result<u8> {
        if load.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: load.len() });
        }
        let x = self.standardizer.transform(load);
        Ok(match &self.params {
            ClassifierParams::Constant { class } => *class,
            ClassifierParams::GaussianNb { log_prior, mean, var } => {
                let score = |c: usize| {
                    log_prior[c]
                        - 0.5
                            * x.iter()
                                .enumerate()
                                .map(|(j, v)| {
                                    (2.0 * std::f64::consts::PI * var[c][j]).ln() + (v - mean[c][j]).powi(2) / var[c][j]
                                })
                                .sum::<f64>()
                };
                u8::from(score(1) >= score(0))
            }
            ClassifierParams::Logistic { weights, bias } => {
                let z = bias + weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
                u8::from(sigmoid(z) >= 0.5)
            }
            ClassifierParams::Tree(t) => t.predict(&x),
            ClassifierParams::Forest { trees } => {
                let ones = trees.iter().filter(|t| t.predict(&x) == 1).count();
                u8::from(2 * ones >= trees.len())
            }
            ClassifierParams::Mlp(net) => u8::from(sigmoid(net.output(&x)) >= 0.5),
        })
    }
}

/// Free-function form of [`TrainedClassifier::predict`].
pub fn predict_feasible(model: &TrainedClassifier, load: &[f64]) -> Result<u8> {
    model.predict(load)
}
