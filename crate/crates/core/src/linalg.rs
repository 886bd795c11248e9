//! Dense kernels not covered well enough by nalgebra for our sizes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const BLOCK: usize = 96;

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factor a symmetric positive definite matrix in place.
    ///
    /// Right-looking blocked algorithm; the trailing update goes through
    /// nalgebra's gemm, which is an order of magnitude faster than the
    /// column-at-a-time loop of `DMatrix::cholesky` for n in the thousands.
    /// Only the lower triangle of `a` is read. Returns `None` on a
    /// non-positive pivot.
    pub fn factor(mut a: DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "cholesky of a non-square matrix");
        let mut k = 0;
        while k < n {
            let kb = BLOCK.min(n - k);
            factor_diagonal_block(&mut a, k, kb)?;
            let rest = n - k - kb;
            if rest > 0 {
                solve_panel(&mut a, k, kb);
                let panel = a.view((k + kb, k), (rest, kb)).clone_owned();
                // Lower block triangle of A22 -= L21 L21ᵀ, one block column at a time.
                let mut j = 0;
                while j < rest {
                    let jb = BLOCK.min(rest - j);
                    let lhs = panel.rows(j, rest - j);
                    let rhs = panel.rows(j, jb);
                    let mut target = a.view_mut((k + kb + j, k + kb + j), (rest - j, jb));
                    target.gemm(-1.0, &lhs, &rhs.transpose(), 1.0);
                    j += jb;
                }
            }
            k += kb;
        }
        for j in 1..n {
            for i in 0..j {
                a[(i, j)] = 0.0;
            }
        }
        Some(Cholesky { l: a })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut DVector<f64>) {
        let n = self.dim();
        let l = &self.l;
        for i in 0..n {
            let mut s = x[i];
            for p in 0..i {
                s -= l[(i, p)] * x[p];
            }
            x[i] = s / l[(i, i)];
        }
        // Back substitution with Lᵀ; column i of L below the diagonal is row i of Lᵀ.
        for i in (0..n).rev() {
            let col = l.column(i);
            let mut s = x[i];
            for p in i + 1..n {
                s -= col[p] * x[p];
            }
            x[i] = s / col[i];
        }
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

fn factor_diagonal_block(a: &mut DMatrix<f64>, k: usize, kb: usize) -> Option<()> {
    for j in k..k + kb {
        let mut d = a[(j, j)];
        for p in k..j {
            d -= a[(j, p)] * a[(j, p)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[(j, j)] = d;
        for i in j + 1..k + kb {
            let mut s = a[(i, j)];
            for p in k..j {
                s -= a[(i, p)] * a[(j, p)];
            }
            a[(i, j)] = s / d;
        }
    }
    Some(())
}

/// L21 = A21 L11⁻ᵀ, column by column.
fn solve_panel(a: &mut DMatrix<f64>, k: usize, kb: usize) {
    let n = a.nrows();
    for j in k..k + kb {
        for p in k..j {
            let ljp = a[(j, p)];
            if ljp != 0.0 {
                for i in k + kb..n {
                    a[(i, j)] -= a[(i, p)] * ljp;
                }
            }
        }
        let d = a[(j, j)];
        for i in k + kb..n {
            a[(i, j)] /= d;
        }
    }
}

/// Least squares `min ‖X β − y‖` through a Householder QR.
///
/// Fails with [`Error::Singular`] when `X` is numerically rank deficient
/// instead of regularizing.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = x.shape();
    if m < n {
        return Err(Error::Singular(format!(
            "{m} equations for {n} unknowns"
        )));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = scale * (m.max(n) as f64) * f64::EPSILON * 16.0;
    if let Some(col) = (0..n).find(|&i| r[(i, i)].abs() <= tol) {
        return Err(Error::Singular(format!(
            "design matrix is rank deficient at column {col}"
        )));
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))
}

/// Infinity norm of a slice.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
