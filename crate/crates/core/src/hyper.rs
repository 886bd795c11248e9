//! Model kinds and their hyperparameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Trivial,
    GaussianNb,
    Logistic,
    DecisionTree,
    RandomForest,
    ExtraTrees,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    Linear,
    PiecewiseLinear,
    GpMatern32,
    GpArdMatern32,
    Mlp,
}

/// Any of the twelve trainable model kinds, as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Classifier(ClassifierKind),
    Regressor(RegressorKind),
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 7] = [
        ClassifierKind::Trivial,
        ClassifierKind::GaussianNb,
        ClassifierKind::Logistic,
        ClassifierKind::DecisionTree,
        ClassifierKind::RandomForest,
        ClassifierKind::ExtraTrees,
        ClassifierKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Trivial => "trivial",
            ClassifierKind::GaussianNb => "gaussian_nb",
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::DecisionTree => "decision_tree",
            ClassifierKind::RandomForest => "random_forest",
            ClassifierKind::ExtraTrees => "extra_trees",
            ClassifierKind::Mlp => "mlp_classifier",
        }
    }
}

impl RegressorKind {
    pub const ALL: [RegressorKind; 5] = [
        RegressorKind::Linear,
        RegressorKind::PiecewiseLinear,
        RegressorKind::GpMatern32,
        RegressorKind::GpArdMatern32,
        RegressorKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegressorKind::Linear => "linear",
            RegressorKind::PiecewiseLinear => "piecewise_linear",
            RegressorKind::GpMatern32 => "gp_matern32",
            RegressorKind::GpArdMatern32 => "gp_ard_matern32",
            RegressorKind::Mlp => "mlp_regressor",
        }
    }

    pub fn is_gp(self) -> bool {
        matches!(self, RegressorKind::GpMatern32 | RegressorKind::GpArdMatern32)
    }
}

impl ModelKind {
    pub fn all() -> impl Iterator<Item = ModelKind> {
        ClassifierKind::ALL
            .into_iter()
            .map(ModelKind::Classifier)
            .chain(RegressorKind::ALL.into_iter().map(ModelKind::Regressor))
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Classifier(k) => k.name(),
            ModelKind::Regressor(k) => k.name(),
        }
    }

    pub fn valid_names() -> Vec<&'static str> {
        Self::all().map(Self::name).collect()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::all().find(|k| k.name() == s).ok_or_else(|| {
            Error::precondition(format!(
                "unknown model '{s}'; valid models: {}",
                Self::valid_names().join(", ")
            ))
        })
    }
}

/// Hyperparameters for every kind in one flat record; each kind reads the
/// fields it needs. Defaults depend on the kind (see [`Hyperparams::for_classifier`]
/// and [`Hyperparams::for_regressor`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub seed: u64,
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means all for a single tree and
    /// `round(√d)` for the ensembles.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
    pub l2: f64,
    pub max_iter: usize,
    pub var_floor: f64,
    pub segments: usize,
    /// Fixed GP lengthscale in standardized units; `None` fits it.
    pub lengthscale: Option<f64>,
    /// GP signal variance of the z-scored target.
    pub signal_variance: f64,
    pub jitter: f64,
    /// Training sets above this size are subsampled for GP kinds.
    pub gp_max_points: usize,
    /// Subsample size on which GP hyperparameters are selected.
    pub gp_fit_points: usize,
    pub grid_points: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            seed: 0,
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
            bootstrap: true,
            hidden: 10,
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.01,
            lr_decay: 0.5,
            decay_every: 50,
            l2: 1e-4,
            max_iter: 100,
            var_floor: 1e-9,
            segments: 4,
            lengthscale: None,
            signal_variance: 1.0,
            jitter: 1e-8,
            gp_max_points: 10_000,
            gp_fit_points: 2_000,
            grid_points: 9,
        }
    }
}

const KEYS: [&str; 23] = [
    "seed",
    "n_trees",
    "max_depth",
    "min_samples_split",
    "min_samples_leaf",
    "max_features",
    "bootstrap",
    "hidden",
    "epochs",
    "batch_size",
    "learning_rate",
    "lr_decay",
    "decay_every",
    "l2",
    "max_iter",
    "var_floor",
    "segments",
    "lengthscale",
    "signal_variance",
    "jitter",
    "gp_max_points",
    "gp_fit_points",
    "grid_points",
];

impl Hyperparams {
    pub fn for_classifier(kind: ClassifierKind) -> Self {
        Hyperparams {
            bootstrap: kind == ClassifierKind::RandomForest,
            ..Default::default()
        }
    }

    pub fn for_regressor(_kind: RegressorKind) -> Self {
        Hyperparams {
            bootstrap: false,
            ..Default::default()
        }
    }

    /// Override one field from its textual form, e.g. `("n_trees", "50")`.
    /// Optional fields accept `none`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::precondition(format!("hyperparameter {key}: invalid value '{value}'")))
        }
        fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
            if value.eq_ignore_ascii_case("none") {
                Ok(None)
            } else {
                parse(key, value).map(Some)
            }
        }
        match key {
            "seed" => self.seed = parse(key, value)?,
            "n_trees" => self.n_trees = parse(key, value)?,
            "max_depth" => self.max_depth = optional(key, value)?,
            "min_samples_split" => self.min_samples_split = parse(key, value)?,
            "min_samples_leaf" => self.min_samples_leaf = parse(key, value)?,
            "max_features" => self.max_features = optional(key, value)?,
            "bootstrap" => self.bootstrap = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "lr_decay" => self.lr_decay = parse(key, value)?,
            "decay_every" => self.decay_every = parse(key, value)?,
            "l2" => self.l2 = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "var_floor" => self.var_floor = parse(key, value)?,
            "segments" => self.segments = parse(key, value)?,
            "lengthscale" => self.lengthscale = optional(key, value)?,
            "signal_variance" => self.signal_variance = parse(key, value)?,
            "jitter" => self.jitter = parse(key, value)?,
            "gp_max_points" => self.gp_max_points = parse(key, value)?,
            "gp_fit_points" => self.gp_fit_points = parse(key, value)?,
            "grid_points" => self.grid_points = parse(key, value)?,
            _ => {
                return Err(Error::precondition(format!(
                    "unknown hyperparameter '{key}'; known: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::precondition(format!("hyperparameters: {msg}")));
        if self.n_trees == 0 {
            return fail("n_trees must be at least 1");
        }
        if self.max_depth == Some(0) {
            return fail("max_depth must be at least 1");
        }
        if self.min_samples_split < 2 || self.min_samples_leaf < 1 {
            return fail("need min_samples_split >= 2 and min_samples_leaf >= 1");
        }
        if self.max_features == Some(0) {
            return fail("max_features must be at least 1");
        }
        if self.hidden == 0 || self.batch_size == 0 || self.decay_every == 0 {
            return fail("hidden, batch_size and decay_every must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return fail("need learning_rate > 0 and 0 < lr_decay <= 1");
        }
        if !(self.l2 >= 0.0) || !(self.var_floor > 0.0) {
            return fail("need l2 >= 0 and var_floor > 0");
        }
        if self.segments == 0 {
            return fail("segments must be at least 1");
        }
        if self.lengthscale.is_some_and(|l| !(l > 0.0)) || !(self.signal_variance > 0.0) {
            return fail("lengthscale and signal_variance must be positive");
        }
        if !(self.jitter >= 0.0) {
            return fail("jitter must be nonnegative");
        }
        if self.gp_max_points == 0 || self.gp_fit_points == 0 || self.grid_points == 0 {
            return fail("GP point caps and grid size must be positive");
        }
        Ok(())
    }
}
