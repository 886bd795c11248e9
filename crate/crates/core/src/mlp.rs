//! One-hidden-layer perceptron shared by the classifier and regressor.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Sigmoid output with binary cross-entropy.
    CrossEntropy,
    /// Linear output with half squared error.
    Squared,
}

/// Parameters are stored flat: `W1` (hidden × inputs, row-major), `b1`,
/// `w2` (hidden), `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub decay_every: usize,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    pub fn n_params(inputs: usize, hidden: usize) -> usize {
        hidden * inputs + 2 * hidden + 1
    }

    /// Uniform initialization in `±1/√fan_in` per layer.
    pub fn new(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut params = Vec::with_capacity(Self::n_params(inputs, hidden));
        let r1 = 1.0 / (inputs.max(1) as f64).sqrt();
        for _ in 0..hidden * inputs + hidden {
            params.push(rng.random_range(-r1..r1));
        }
        let r2 = 1.0 / (hidden as f64).sqrt();
        for _ in 0..=hidden {
            params.push(rng.random_range(-r2..r2));
        }
        Mlp { inputs, hidden, params }
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], f64) {
        let (w1, rest) = self.params.split_at(self.hidden * self.inputs);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.hidden);
        (w1, b1, w2, b2[0])
    }

    /// Output before the final nonlinearity.
    pub fn output(&self, x: &[f64]) -> f64 {
        let (w1, b1, w2, b2) = self.split();
        let mut z = b2;
        for h in 0..self.hidden {
            let row = &w1[h * self.inputs..(h + 1) * self.inputs];
            let a: f64 = b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            z += w2[h] * a.tanh();
        }
        z
    }

    /// Mean loss over the selected rows and its gradient.
    pub fn loss_and_grad<X: AsRef<[f64]>>(
        &self,
        xs: &[X],
        ys: &[f64],
        rows: &[usize],
        loss: Loss,
    ) -> (f64, Vec<f64>) {
        let (w1, b1, w2, b2) = self.split();
        let (ni, nh) = (self.inputs, self.hidden);
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        let mut act = vec![0.0; nh];
        for &r in rows {
            let x = xs[r].as_ref();
            let mut z = b2;
            for h in 0..nh {
                let row = &w1[h * ni..(h + 1) * ni];
                act[h] = (b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).tanh();
                z += w2[h] * act[h];
            }
            let y = ys[r];
            let dz = match loss {
                Loss::CrossEntropy => {
                    total += z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
                    sigmoid(z) - y
                }
                Loss::Squared => {
                    total += 0.5 * (z - y) * (z - y);
                    z - y
                }
            };
            let (gw1, rest) = grad.split_at_mut(nh * ni);
            let (gb1, rest) = rest.split_at_mut(nh);
            let (gw2, gb2) = rest.split_at_mut(nh);
            gb2[0] += dz;
            for h in 0..nh {
                gw2[h] += dz * act[h];
                let da = dz * w2[h] * (1.0 - act[h] * act[h]);
                gb1[h] += da;
                for (g, v) in gw1[h * ni..(h + 1) * ni].iter_mut().zip(x) {
                    *g += da * v;
                }
            }
        }
        let m = rows.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        (total / m, grad)
    }

    /// Mini-batch gradient descent with step decay; rows are reshuffled
    /// every epoch from `rng`.
    pub fn train<X: AsRef<[f64]>>(
        &mut self,
        xs: &[X],
        ys: &[f64],
        loss: Loss,
        schedule: &Schedule,
        rng: &mut ChaCha8Rng,
    ) {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut lr = schedule.learning_rate;
        for epoch in 0..schedule.epochs {
            if epoch > 0 && epoch % schedule.decay_every == 0 {
                lr *= schedule.lr_decay;
            }
            order.shuffle(rng);
            for batch in order.chunks(schedule.batch_size) {
                let (_, g) = self.loss_and_grad(xs, ys, batch, loss);
                for (p, gi) in self.params.iter_mut().zip(&g) {
                    *p -= lr * gi;
                }
            }
        }
    }
}
