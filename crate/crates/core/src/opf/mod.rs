//! The DC optimal power flow as a convex QP: the label oracle for feasibility
//! and optimal cost.

mod qp;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use qp::{
    check_feasible, solve_qp, KktResiduals, QpProblem, QpSolution, QpStatus,
    FEASIBILITY_TOLERANCE, MAX_ITERATIONS, SOLVE_TOLERANCE,
};

use crate::error::{Error, Result};
use crate::netcase::DcModel;

/// Result of one exact OPF solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpfOutcome {
    pub feasible: bool,
    /// Optimal cost; `None` iff infeasible.
    pub cost: Option<f64>,
    /// Generator outputs (pu); empty when infeasible.
    pub dispatch: Vec<f64>,
    /// Wall-clock seconds for the whole solve, phase one included.
    pub solve_time: f64,
}

pub(crate) fn check_load(model: &DcModel, load: &[f64]) -> Result<()> {
    if load.len() != model.n_buses() {
        return Err(Error::Dimension {
            expected: model.n_buses(),
            got: load.len(),
        });
    }
    if let Some((i, v)) = load.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::precondition(format!(
            "load on bus {} must be finite and nonnegative, got {v}",
            model.bus_ids[i]
        )));
    }
    Ok(())
}

/// Assemble the DC-OPF for a load vector.
///
/// Decision variables are the generator outputs `p`. There is one equality
/// (total generation equals total load) and two blocks of two-sided rows:
/// generator boxes `p_min ≤ p ≤ p_max`, then branch limits
/// `−F ≤ S (M p − l) ≤ F` written as `S M p ∈ [S l − F, S l + F]`, where `S`
/// is the injection shift matrix and `M` the generator incidence.
pub fn assemble_dcopf(model: &DcModel, load: &[f64]) -> Result<QpProblem> {
    check_load(model, load)?;
    let n_g = model.n_generators();
    let n_br = model.n_branches();
    let l = DVector::from_column_slice(load);

    let quadratic = DMatrix::from_diagonal(&DVector::from_iterator(
        n_g,
        model.cost_quadratic.iter().map(|c| 2.0 * c),
    ));
    let linear = DVector::from_column_slice(&model.cost_linear);
    let constant = model.cost_constant.iter().sum();

    let eq_matrix = DMatrix::from_element(1, n_g, 1.0);
    let eq_rhs = DVector::from_element(1, load.iter().sum());

    let flow_of_dispatch = &model.injection_shift * &model.gen_incidence;
    let flow_of_load = &model.injection_shift * &l;
    let mut ineq_matrix = DMatrix::zeros(n_g + n_br, n_g);
    ineq_matrix.view_mut((0, 0), (n_g, n_g)).fill_with_identity();
    ineq_matrix.view_mut((n_g, 0), (n_br, n_g)).copy_from(&flow_of_dispatch);
    let mut ineq_lower = DVector::zeros(n_g + n_br);
    let mut ineq_upper = DVector::zeros(n_g + n_br);
    for g in 0..n_g {
        ineq_lower[g] = model.p_min[g];
        ineq_upper[g] = model.p_max[g];
    }
    for k in 0..n_br {
        ineq_lower[n_g + k] = flow_of_load[k] - model.flow_limit[k];
        ineq_upper[n_g + k] = flow_of_load[k] + model.flow_limit[k];
    }

    Ok(QpProblem {
        quadratic,
        linear,
        constant,
        eq_matrix,
        eq_rhs,
        ineq_matrix,
        ineq_lower,
        ineq_upper,
    })
}

/// Solve the OPF exactly: phase-one feasibility, then the QP when feasible.
pub fn solve_opf(model: &DcModel, load: &[f64]) -> Result<OpfOutcome> {
    let start = Instant::now();
    let tag = |e: Error| Error::numerical(format!("load {load:?}: {e}"));
    let problem = assemble_dcopf(model, load)?;
    let feasible = qp::phase_one(&problem).map_err(tag)? <= FEASIBILITY_TOLERANCE;
    if !feasible {
        return Ok(OpfOutcome {
            feasible: false,
            cost: None,
            dispatch: Vec::new(),
            solve_time: start.elapsed().as_secs_f64(),
        });
    }
    let sol = qp::optimize(&problem).map_err(tag)?;
    if sol.status != QpStatus::Optimal {
        return Err(tag(Error::numerical(format!(
            "interior point stopped after {} iterations",
            sol.iterations
        ))));
    }
    Ok(OpfOutcome {
        feasible: true,
        cost: Some(sol.objective),
        dispatch: sol.x,
        solve_time: start.elapsed().as_secs_f64(),
    })
}

/// Solve and also return the full QP solution (duals included).
pub fn solve_opf_detailed(model: &DcModel, load: &[f64]) -> Result<(QpProblem, QpSolution)> {
    let problem = assemble_dcopf(model, load)?;
    let sol = solve_qp(&problem)?;
    Ok((problem, sol))
}
