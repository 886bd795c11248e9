//! Convex quadratic programs and a primal-dual interior-point solver.
//!
//! Problems have the form
//!
//! ```text
//! minimize    ½ xᵀ G x + aᵀ x + c
//! subject to  A x = b
//!             lower ≤ C x ≤ upper        (either side may be infinite)
//! ```
//!
//! Internally every finite side of a two-sided row becomes a one-sided row
//! `D x ≤ e` with a slack `s > 0` and multiplier `z > 0`, and the Newton
//! systems are solved in the reduced form
//!
//! ```text
//! [ G + Dᵀ (Z/S) D   Aᵀ ] [dx]
//! [ A                 0 ] [dy]
//! ```
//!
//! with Mehrotra's predictor-corrector centering.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convergence tolerance on scaled residuals and duality gap.
pub const SOLVE_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100;
/// A problem is feasible when its minimal total constraint violation is below this.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;
const REGULARIZATION: f64 = 1e-10;
const STEP_FRACTION: f64 = 0.995;

/// Newton direction `(dx, dy, ds, dz)`.
type Direction = (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub quadratic: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_lower: DVector<f64>,
    pub ineq_upper: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers `y` of `A x = b`.
    pub eq_duals: Vec<f64>,
    /// Multipliers (≥ 0) of `C x ≥ lower`, zero for infinite bounds.
    pub lower_duals: Vec<f64>,
    /// Multipliers (≥ 0) of `C x ≤ upper`, zero for infinite bounds.
    pub upper_duals: Vec<f64>,
    pub iterations: usize,
}

/// KKT residuals of a candidate solution, scaled by [`QpProblem::cost_scale`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_eq: f64,
    pub primal_ineq: f64,
    pub complementarity: f64,
    pub dual_sign: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        [
            self.stationarity,
            self.primal_eq,
            self.primal_ineq,
            self.complementarity,
            self.dual_sign,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// One finite side of a two-sided inequality row.
#[derive(Debug, Clone, Copy)]
struct Side {
    row: usize,
    upper: bool,
}

impl QpProblem {
    pub fn n_vars(&self) -> usize {
        self.linear.len()
    }

    pub fn n_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn n_ineq_rows(&self) -> usize {
        self.ineq_lower.len()
    }

    /// Number of finite one-sided inequalities.
    pub fn n_one_sided(&self) -> usize {
        self.sides().len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        0.5 * x.dot(&(&self.quadratic * &x)) + self.linear.dot(&x) + self.constant
    }

    /// Magnitude of the objective data; residuals are reported relative to it.
    pub fn cost_scale(&self) -> f64 {
        1f64.max(self.quadratic.amax()).max(self.linear.amax())
    }

    fn sides(&self) -> Vec<Side> {
        let mut out = Vec::new();
        for row in 0..self.n_ineq_rows() {
            if self.ineq_lower[row].is_finite() {
                out.push(Side { row, upper: false });
            }
            if self.ineq_upper[row].is_finite() {
                out.push(Side { row, upper: true });
            }
        }
        out
    }

    /// Check dimensions, symmetry, convexity and equality-row independence.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        let dim = |expected: usize, got: usize| -> Result<()> {
            if expected == got {
                Ok(())
            } else {
                Err(Error::Dimension { expected, got })
            }
        };
        dim(n, self.quadratic.nrows())?;
        dim(n, self.quadratic.ncols())?;
        dim(n, self.eq_matrix.ncols())?;
        dim(self.eq_matrix.nrows(), self.eq_rhs.len())?;
        dim(n, self.ineq_matrix.ncols())?;
        dim(self.ineq_matrix.nrows(), self.ineq_lower.len())?;
        dim(self.ineq_matrix.nrows(), self.ineq_upper.len())?;

        let finite = |m: &[f64]| m.iter().all(|v| v.is_finite());
        if !finite(self.quadratic.as_slice())
            || !finite(self.linear.as_slice())
            || !finite(self.eq_matrix.as_slice())
            || !finite(self.eq_rhs.as_slice())
            || !finite(self.ineq_matrix.as_slice())
        {
            return Err(Error::precondition("problem data must be finite"));
        }
        for r in 0..self.n_ineq_rows() {
            let (lo, hi) = (self.ineq_lower[r], self.ineq_upper[r]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::precondition(format!("row {r}: invalid bounds [{lo}, {hi}]")));
            }
        }
        let asym = (&self.quadratic - self.quadratic.transpose()).amax();
        if asym > 1e-12 * self.cost_scale() {
            return Err(Error::precondition(format!("quadratic term is not symmetric ({asym:e})")));
        }
        if n > 0 {
            let eig = self.quadratic.clone().symmetric_eigenvalues();
            let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
            if min < -1e-10 {
                return Err(Error::precondition(format!(
                    "quadratic term is not positive semidefinite (eigenvalue {min:e})"
                )));
            }
        }
        if self.n_eq() > 0 {
            if self.n_eq() > n {
                return Err(Error::precondition("more equality rows than variables"));
            }
            let sv = self.eq_matrix.clone().singular_values();
            let max = sv.amax();
            if sv.iter().any(|&s| s <= 1e-12 * max.max(1.0)) {
                return Err(Error::precondition("equality rows are linearly dependent"));
            }
        }
        Ok(())
    }

    /// Residuals of the KKT conditions at `sol`, computed from problem data.
    pub fn kkt_residuals(&self, sol: &QpSolution) -> KktResiduals {
        let scale = self.cost_scale();
        let x = DVector::from_column_slice(&sol.x);
        let y = DVector::from_column_slice(&sol.eq_duals);
        let zl = DVector::from_column_slice(&sol.lower_duals);
        let zu = DVector::from_column_slice(&sol.upper_duals);
        let grad = &self.quadratic * &x
            + &self.linear
            + self.eq_matrix.transpose() * &y
            + self.ineq_matrix.transpose() * (&zu - &zl);
        let cx = &self.ineq_matrix * &x;
        let primal_eq = if self.n_eq() > 0 {
            (&self.eq_matrix * &x - &self.eq_rhs).amax()
        } else {
            0.0
        };
        let mut primal_ineq = 0.0f64;
        let mut compl = 0.0f64;
        let mut dual_sign = 0.0f64;
        for r in 0..self.n_ineq_rows() {
            let (lo, hi) = (self.ineq_lower[r], self.ineq_upper[r]);
            if lo.is_finite() {
                primal_ineq = primal_ineq.max(lo - cx[r]);
                compl = compl.max((zl[r] * (cx[r] - lo)).abs());
            }
            if hi.is_finite() {
                primal_ineq = primal_ineq.max(cx[r] - hi);
                compl = compl.max((zu[r] * (hi - cx[r])).abs());
            }
            dual_sign = dual_sign.max(-zl[r]).max(-zu[r]);
        }
        KktResiduals {
            stationarity: grad.amax() / scale,
            primal_eq,
            primal_ineq: primal_ineq.max(0.0),
            complementarity: compl / scale,
            dual_sign: dual_sign.max(0.0) / scale,
        }
    }
}

/// Solve a convex QP.
///
/// Runs the phase-one feasibility program first; an empty feasible set
/// yields [`QpStatus::Infeasible`] without attempting the optimization.
pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution> {
    problem.validate()?;
    if phase_one(problem)? > FEASIBILITY_TOLERANCE {
        let n = problem.n_vars();
        return Ok(QpSolution {
            status: QpStatus::Infeasible,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
            eq_duals: vec![0.0; problem.n_eq()],
            lower_duals: vec![0.0; problem.n_ineq_rows()],
            upper_duals: vec![0.0; problem.n_ineq_rows()],
            iterations: 0,
        });
    }
    optimize(problem)
}

/// Decide whether the feasible set is nonempty.
pub fn check_feasible(problem: &QpProblem) -> Result<bool> {
    problem.validate()?;
    Ok(phase_one(problem)? <= FEASIBILITY_TOLERANCE)
}

/// Minimal total constraint violation: the optimum of
///
/// ```text
/// minimize    Σ u⁺ + Σ u⁻ + Σ w
/// subject to  A x − u⁺ + u⁻ = b,   D x − w ≤ e,   u⁺, u⁻, w ≥ 0
/// ```
pub(crate) fn phase_one(problem: &QpProblem) -> Result<f64> {
    let n = problem.n_vars();
    let me = problem.n_eq();
    let sides = problem.sides();
    let p = sides.len();
    let nv = n + 2 * me + p;

    let mut a = DVector::zeros(nv);
    a.rows_mut(n, nv - n).fill(1.0);

    let mut aeq = DMatrix::zeros(me, nv);
    aeq.view_mut((0, 0), (me, n)).copy_from(&problem.eq_matrix);
    for i in 0..me {
        aeq[(i, n + i)] = -1.0;
        aeq[(i, n + me + i)] = 1.0;
    }

    let (d0, e0) = one_sided(problem, &sides);
    let rows = p + (nv - n);
    let mut d = DMatrix::zeros(rows, nv);
    let mut e = DVector::zeros(rows);
    d.view_mut((0, 0), (p, n)).copy_from(&d0);
    e.rows_mut(0, p).copy_from(&e0);
    for j in 0..p {
        d[(j, n + 2 * me + j)] = -1.0;
    }
    for k in 0..nv - n {
        d[(p + k, n + k)] = -1.0;
    }

    let g = DMatrix::zeros(nv, nv);
    let it = interior_point(&g, &a, &aeq, &problem.eq_rhs, &d, &e)?;
    if !it.converged {
        return Err(Error::numerical(format!(
            "phase-one program did not converge in {MAX_ITERATIONS} iterations"
        )));
    }
    Ok(it.x.rows(n, nv - n).iter().map(|v| v.max(0.0)).sum())
}

fn one_sided(problem: &QpProblem, sides: &[Side]) -> (DMatrix<f64>, DVector<f64>) {
    let n = problem.n_vars();
    let mut d = DMatrix::zeros(sides.len(), n);
    let mut e = DVector::zeros(sides.len());
    for (j, side) in sides.iter().enumerate() {
        let row = problem.ineq_matrix.row(side.row);
        if side.upper {
            d.row_mut(j).copy_from(&row);
            e[j] = problem.ineq_upper[side.row];
        } else {
            d.row_mut(j).copy_from(&(-row));
            e[j] = -problem.ineq_lower[side.row];
        }
    }
    (d, e)
}

/// Run the optimizer without the phase-one check. The caller has
/// established feasibility.
pub(crate) fn optimize(problem: &QpProblem) -> Result<QpSolution> {
    let scale = problem.cost_scale();
    let g = &problem.quadratic / scale;
    let a = &problem.linear / scale;
    let sides = problem.sides();
    let (d, e) = one_sided(problem, &sides);
    let it = interior_point(&g, &a, &problem.eq_matrix, &problem.eq_rhs, &d, &e)?;

    let rows = problem.n_ineq_rows();
    let mut lower_duals = vec![0.0; rows];
    let mut upper_duals = vec![0.0; rows];
    for (j, side) in sides.iter().enumerate() {
        let z = it.z[j] * scale;
        if side.upper {
            upper_duals[side.row] = z;
        } else {
            lower_duals[side.row] = z;
        }
    }
    let x: Vec<f64> = it.x.iter().copied().collect();
    Ok(QpSolution {
        status: if it.converged { QpStatus::Optimal } else { QpStatus::MaxIter },
        objective: problem.objective(&x),
        x,
        eq_duals: it.y.iter().map(|v| v * scale).collect(),
        lower_duals,
        upper_duals,
        iterations: it.iterations,
    })
}

struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    iterations: usize,
    converged: bool,
}

/// Factored reduced KKT matrix for one interior-point iteration.
struct Newton<'a> {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    d: &'a DMatrix<f64>,
    n: usize,
}

impl Newton<'_> {
    /// Direction for complementarity target `rc` (the right side of
    /// `Z ds + S dz = rc`).
    fn direction(
        &self,
        rd: &DVector<f64>,
        re: &DVector<f64>,
        ri: &DVector<f64>,
        s: &DVector<f64>,
        z: &DVector<f64>,
        rc: &DVector<f64>,
    ) -> Result<Direction> {
        let n = self.n;
        let me = re.len();
        // t = S⁻¹ (rc + Z ri)
        let t = DVector::from_fn(s.len(), |i, _| (rc[i] + z[i] * ri[i]) / s[i]);
        let mut rhs = DVector::zeros(n + me);
        rhs.rows_mut(0, n).copy_from(&(-rd - self.d.transpose() * &t));
        rhs.rows_mut(n, me).copy_from(&(-re));
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::numerical("degenerate KKT system"))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite Newton direction"));
        }
        let dx = sol.rows(0, n).into_owned();
        let dy = sol.rows(n, me).into_owned();
        let ddx = self.d * &dx;
        let dz = DVector::from_fn(s.len(), |i, _| t[i] + z[i] * ddx[i] / s[i]);
        let ds = -ri - ddx;
        Ok((dx, dy, ds, dz))
    }
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(1.0, f64::min)
}

fn interior_point(
    g: &DMatrix<f64>,
    a: &DVector<f64>,
    aeq: &DMatrix<f64>,
    beq: &DVector<f64>,
    d: &DMatrix<f64>,
    e: &DVector<f64>,
) -> Result<Iterate> {
    let n = a.len();
    let me = beq.len();
    let p = e.len();
    let assemble = |w: &DVector<f64>| -> DMatrix<f64> {
        let mut k = DMatrix::zeros(n + me, n + me);
        let mut h = g.clone();
        if p > 0 {
            let dw = DMatrix::from_fn(p, n, |i, j| d[(i, j)] * w[i]);
            h += d.transpose() * dw;
        }
        for i in 0..n {
            h[(i, i)] += REGULARIZATION;
        }
        k.view_mut((0, 0), (n, n)).copy_from(&h);
        k.view_mut((0, n), (n, me)).copy_from(&aeq.transpose());
        k.view_mut((n, 0), (me, n)).copy_from(aeq);
        for i in 0..me {
            k[(n + i, n + i)] = -REGULARIZATION;
        }
        k
    };

    let mut x = DVector::zeros(n);
    let mut y = DVector::zeros(me);
    let mut s = DVector::from_fn(p, |i, _| e[i].abs().max(1.0));
    let mut z = DVector::from_element(p, 1.0);

    let norm_a = 1.0 + a.amax();
    let norm_b = 1.0 + if me > 0 { beq.amax() } else { 0.0 };
    let norm_e = 1.0 + if p > 0 { e.amax() } else { 0.0 };

    for iter in 0..=MAX_ITERATIONS {
        let rd = g * &x + a + aeq.transpose() * &y + d.transpose() * &z;
        let re = aeq * &x - beq;
        let ri = d * &x + &s - e;
        let gap = s.dot(&z);
        let fx = 0.5 * x.dot(&(g * &x)) + a.dot(&x);
        let converged = rd.amax() <= SOLVE_TOLERANCE * norm_a
            && (me == 0 || re.amax() <= SOLVE_TOLERANCE * norm_b)
            && (p == 0 || ri.amax() <= SOLVE_TOLERANCE * norm_e)
            && gap <= SOLVE_TOLERANCE * (1.0 + fx.abs());
        if converged || iter == MAX_ITERATIONS {
            return Ok(Iterate {
                x,
                y,
                z,
                iterations: iter,
                converged,
            });
        }

        let w = DVector::from_fn(p, |i, _| z[i] / s[i]);
        let newton = Newton {
            lu: assemble(&w).lu(),
            d,
            n,
        };
        if p == 0 {
            // Equality-constrained QP: one Newton step is exact.
            let (dx, dy, _, _) = newton.direction(&rd, &re, &ri, &s, &z, &DVector::zeros(0))?;
            x += dx;
            y += dy;
            continue;
        }

        let mu = gap / p as f64;
        let rc_aff = -s.component_mul(&z);
        let (_, _, ds_aff, dz_aff) = newton.direction(&rd, &re, &ri, &s, &z, &rc_aff)?;
        let alpha_aff = max_step(&s, &ds_aff).min(max_step(&z, &dz_aff));
        let mu_aff = (&s + &ds_aff * alpha_aff).dot(&(&z + &dz_aff * alpha_aff)) / p as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        let rc = rc_aff - ds_aff.component_mul(&dz_aff) + DVector::from_element(p, sigma * mu);
        let (dx, dy, ds, dz) = newton.direction(&rd, &re, &ri, &s, &z, &rc)?;
        let alpha = (STEP_FRACTION * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);

        x += &dx * alpha;
        y += &dy * alpha;
        s += &ds * alpha;
        z += &dz * alpha;
    }
    unreachable!()
}
