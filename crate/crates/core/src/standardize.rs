use serde::{Deserialize, Serialize};

/// Per-feature z-scoring fitted on training inputs.
///
/// Features with zero spread in the training data are marked constant; they
/// map to 0 and carry no information to any model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.as_ref()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut std = Vec::with_capacity(d);
        let mut constant = Vec::with_capacity(d);
        for (j, s) in var.iter().enumerate() {
            let sd = (s / n).sqrt();
            let is_const = !(sd > 1e-12 * mean[j].abs().max(1e-300));
            constant.push(is_const);
            std.push(if is_const { 1.0 } else { sd });
        }
        Standardizer { mean, std, constant }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Indices of non-constant features.
    pub fn active(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| !self.constant[j]).collect()
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| if self.constant[j] { 0.0 } else { (v - self.mean[j]) / self.std[j] })
            .collect()
    }

    /// Standardized values of the active features only.
    pub fn transform_active(&self, x: &[f64], active: &[usize]) -> Vec<f64> {
        active.iter().map(|&j| (x[j] - self.mean[j]) / self.std[j]).collect()
    }
}

/// Mean and standard deviation of a target, with a unit spread for constants.
pub fn target_scale(y: &[f64]) -> (f64, f64) {
    let n = y.len().max(1) as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_columns_are_inactive() {
        let rows = vec![vec![1.0, 0.0, 2.0], vec![3.0, 0.0, 2.0], vec![5.0, 0.0, 2.0]];
        let s = Standardizer::fit(&rows);
        assert_eq!(s.active(), vec![0]);
        assert_eq!(s.transform(&[3.0, 7.0, 9.0]), vec![0.0, 0.0, 0.0]);
        let z = s.transform(&[5.0, 0.0, 2.0]);
        assert!((z[0] - (1.5f64).sqrt()).abs() < 1e-12);
    }
}
