//! Uniform sampling of load vectors from a polytope by Hit&Run.
//!
//! From the current point the chain draws a direction uniformly on the unit
//! sphere (a normalized vector of independent standard Gaussians), intersects
//! the line through the point with the polytope, and moves to a point drawn
//! uniformly on that chord. The stationary distribution is uniform on the
//! polytope.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcase::LoadVector;
use crate::rng::{rng_from_seed, RNG_ALGORITHM};

/// Chords shorter than this signal a start point on the boundary.
pub const MIN_CHORD: f64 = 1e-12;

/// `{ l | A l ≤ b }` over a subset of the bus coordinates.
///
/// Coordinates not listed in `coords` are pinned to zero; sampled points are
/// embedded back into `full_dim`-dimensional load vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub coords: Vec<usize>,
    pub full_dim: usize,
    start: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub burn_in: usize,
    pub thinning: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            burn_in: 1_000,
            thinning: 5,
            alpha_min: 0.2,
            alpha_max: 2.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_min >= 0.0 && self.alpha_min < self.alpha_max) {
            return Err(Error::precondition(format!(
                "need 0 <= alpha_min < alpha_max, got {} and {}",
                self.alpha_min, self.alpha_max
            )));
        }
        if self.thinning == 0 {
            return Err(Error::precondition("thinning must be at least 1"));
        }
        Ok(())
    }

    pub fn rng_algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }
}

impl Polytope {
    /// General polytope over all coordinates with a caller-supplied point
    /// that must lie strictly inside.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, interior: DVector<f64>) -> Result<Self> {
        let dim = a.ncols();
        if a.nrows() != b.len() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        if interior.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: interior.len(),
            });
        }
        let slack = &b - &a * &interior;
        if slack.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::precondition("start point is not strictly interior"));
        }
        Ok(Polytope {
            a,
            b,
            coords: (0..dim).collect(),
            full_dim: dim,
            start: interior,
        })
    }

    /// Dimension of the sampled space.
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn interior_point(&self) -> &DVector<f64> {
        &self.start
    }

    /// Whether a point of the sampled space satisfies `A x ≤ b + tol`.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        (&self.a * x - &self.b).iter().all(|v| *v <= tol)
    }

    /// Whether a full load vector lies in the polytope: sampled coordinates
    /// satisfy the inequalities and pinned ones are zero.
    pub fn contains_load(&self, load: &[f64], tol: f64) -> bool {
        if load.len() != self.full_dim {
            return false;
        }
        let x = self.project(load);
        let pinned_zero = (0..self.full_dim)
            .filter(|i| !self.coords.contains(i))
            .all(|i| load[i] == 0.0);
        pinned_zero && self.contains(&x, tol)
    }

    pub fn project(&self, load: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.coords.len(), self.coords.iter().map(|&i| load[i]))
    }

    pub fn embed(&self, x: &DVector<f64>) -> LoadVector {
        let mut full = vec![0.0; self.full_dim];
        for (k, &i) in self.coords.iter().enumerate() {
            full[i] = x[k];
        }
        LoadVector(full)
    }
}

/// The box `α̲·L_i ≤ l_i ≤ ᾱ·L_i` over buses with positive nominal load.
pub fn box_polytope(nominal: &[f64], alpha_min: f64, alpha_max: f64) -> Result<Polytope> {
    if nominal.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::precondition("nominal loads must be nonnegative"));
    }
    if !(alpha_min >= 0.0 && alpha_min < alpha_max) {
        return Err(Error::precondition(format!(
            "box has empty interior: alpha_min = {alpha_min}, alpha_max = {alpha_max}"
        )));
    }
    let coords: Vec<usize> = (0..nominal.len()).filter(|&i| nominal[i] > 0.0).collect();
    if coords.is_empty() {
        return Err(Error::precondition("all nominal loads are zero: nothing to sample"));
    }
    let d = coords.len();
    let mut a = DMatrix::zeros(2 * d, d);
    let mut b = DVector::zeros(2 * d);
    let mut center = DVector::zeros(d);
    for (k, &i) in coords.iter().enumerate() {
        let (lo, hi) = (alpha_min * nominal[i], alpha_max * nominal[i]);
        a[(2 * k, k)] = 1.0;
        b[2 * k] = hi;
        a[(2 * k + 1, k)] = -1.0;
        b[2 * k + 1] = -lo;
        center[k] = 0.5 * (lo + hi);
    }
    Ok(Polytope {
        a,
        b,
        coords,
        full_dim: nominal.len(),
        start: center,
    })
}

/// Parameter interval `[t_lo, t_hi]` with `point + t·direction` inside.
pub fn chord_bounds(poly: &Polytope, point: &DVector<f64>, direction: &DVector<f64>) -> Result<(f64, f64)> {
    let slack = &poly.b - &poly.a * point;
    let rate = &poly.a * direction;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (s, r) in slack.iter().zip(rate.iter()) {
        if *r > 0.0 {
            hi = hi.min(s / r);
        } else if *r < 0.0 {
            lo = lo.max(s / r);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::precondition("polytope is unbounded along the direction"));
    }
    if !(hi - lo >= MIN_CHORD) || !(lo < 0.0 && hi > 0.0) {
        return Err(Error::numerical(format!(
            "degenerate chord [{lo:e}, {hi:e}]: point is on the boundary"
        )));
    }
    Ok((lo, hi))
}

/// Draw `n` load vectors with Hit&Run, starting from the polytope's interior
/// point. The first `burn_in` states are discarded and every
/// `thinning`-th state after that is kept.
pub fn hit_and_run(poly: &Polytope, config: &SamplerConfig, n: usize) -> Result<Vec<LoadVector>> {
    if config.thinning == 0 {
        return Err(Error::precondition("thinning must be at least 1"));
    }
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return Ok(out);
    }
    let mut rng = rng_from_seed(config.seed);
    let dim = poly.dim();
    let mut x = poly.start.clone();
    let total = config.burn_in + n * config.thinning;
    for step in 1..=total {
        let mut dir = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = dir.norm();
        if norm == 0.0 {
            continue;
        }
        dir /= norm;
        let (lo, hi) = chord_bounds(poly, &x, &dir)?;
        let t = rng.random_range(lo..hi);
        x += dir * t;
        if step > config.burn_in && (step - config.burn_in).is_multiple_of(config.thinning) {
            out.push(poly.embed(&x));
        }
    }
    Ok(out)
}
