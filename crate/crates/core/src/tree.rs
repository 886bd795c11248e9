//! CART classification trees with Gini impurity.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Splitter {
    /// Best midpoint threshold per candidate feature.
    Best,
    /// One uniform random threshold per candidate feature.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Non-constant features examined per split.
    pub max_features: usize,
    pub splitter: Splitter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf(u8),
    /// `(feature, threshold, left, right)`; `x[feature] <= threshold` goes left.
    Split(usize, f64, u32, u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Weighted Gini impurity `n·(1 − p₀² − p₁²)` of a node with `ones` positives.
fn gini(n: usize, ones: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (n, c1) = (n as f64, ones as f64);
    let c0 = n - c1;
    n - (c0 * c0 + c1 * c1) / n
}

fn majority(y: &[u8], rows: &[usize]) -> u8 {
    let ones = rows.iter().filter(|&&r| y[r] == 1).count();
    u8::from(2 * ones >= rows.len())
}

impl Tree {
    /// Grow a tree on `rows` of the column-major feature matrix `cols`.
    pub fn fit(cols: &[Vec<f64>], y: &[u8], rows: Vec<usize>, params: &TreeParams, rng: &mut ChaCha8Rng) -> Tree {
        let d = cols.len();
        let mut nodes = vec![Node::Leaf(0)];
        let mut stack = vec![(0usize, rows, 0usize)];
        let mut order: Vec<usize> = (0..d).collect();
        while let Some((slot, rows, depth)) = stack.pop() {
            let ones = rows.iter().filter(|&&r| y[r] == 1).count();
            let pure = ones == 0 || ones == rows.len();
            let depth_capped = params.max_depth.is_some_and(|m| depth >= m);
            let split = if pure || depth_capped || rows.len() < params.min_samples_split {
                None
            } else {
                best_split(cols, y, &rows, params, &mut order, rng)
            };
            let Some(c) = split else {
                nodes[slot] = Node::Leaf(majority(y, &rows));
                continue;
            };
            let (left, right): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&r| cols[c.feature][r] <= c.threshold);
            let l = nodes.len() as u32;
            nodes.push(Node::Leaf(0));
            nodes.push(Node::Leaf(0));
            nodes[slot] = Node::Split(c.feature, c.threshold, l, l + 1);
            stack.push((l as usize + 1, right, depth + 1));
            stack.push((l as usize, left, depth + 1));
        }
        Tree { nodes }
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(c) => return c,
                Node::Split(f, t, l, r) => i = if x[f] <= t { l as usize } else { r as usize },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split(_, _, l, r) => 1 + go(nodes, l as usize).max(go(nodes, r as usize)),
            }
        }
        go(&self.nodes, 0)
    }
}

fn best_split(
    cols: &[Vec<f64>],
    y: &[u8],
    rows: &[usize],
    params: &TreeParams,
    order: &mut [usize],
    rng: &mut ChaCha8Rng,
) -> Option<Candidate> {
    let d = cols.len();
    let range = |f: usize| {
        rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            (lo.min(cols[f][r]), hi.max(cols[f][r]))
        })
    };
    // Candidate features: all in index order, or a random subset of the
    // non-constant ones, evaluated in index order for tie-breaking.
    let mut chosen: Vec<(usize, f64, f64)> = Vec::new();
    if params.max_features < d {
        order.shuffle(rng);
    }
    for &f in order.iter() {
        if chosen.len() == params.max_features {
            break;
        }
        let (lo, hi) = range(f);
        if hi > lo {
            chosen.push((f, lo, hi));
        }
    }
    chosen.sort_by_key(|c| c.0);

    let total_ones = rows.iter().filter(|&&r| y[r] == 1).count();
    let n = rows.len();
    let min_leaf = params.min_samples_leaf;
    let mut best: Option<Candidate> = None;
    let mut consider = |c: Candidate| {
        if best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
            best = Some(c);
        }
    };
    let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(n);
    for (f, lo, hi) in chosen {
        match params.splitter {
            Splitter::Best => {
                pairs.clear();
                pairs.extend(rows.iter().map(|&r| (cols[f][r], y[r])));
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut ones_left = 0;
                for i in 0..n - 1 {
                    ones_left += pairs[i].1 as usize;
                    let n_left = i + 1;
                    if pairs[i].0 == pairs[i + 1].0 || n_left < min_leaf || n - n_left < min_leaf {
                        continue;
                    }
                    let mut threshold = 0.5 * (pairs[i].0 + pairs[i + 1].0);
                    if threshold >= pairs[i + 1].0 {
                        threshold = pairs[i].0;
                    }
                    consider(Candidate {
                        feature: f,
                        threshold,
                        impurity: gini(n_left, ones_left) + gini(n - n_left, total_ones - ones_left),
                    });
                }
            }
            Splitter::Random => {
                let threshold = rng.random_range(lo..hi);
                let (mut n_left, mut ones_left) = (0, 0);
                for &r in rows {
                    if cols[f][r] <= threshold {
                        n_left += 1;
                        ones_left += y[r] as usize;
                    }
                }
                if n_left >= min_leaf && n - n_left >= min_leaf {
                    consider(Candidate {
                        feature: f,
                        threshold,
                        impurity: gini(n_left, ones_left) + gini(n - n_left, total_ones - ones_left),
                    });
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn params(max_features: usize) -> TreeParams {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features,
            splitter: Splitter::Best,
        }
    }

    #[test]
    fn separable_points_give_one_midpoint_split() {
        let cols = vec![vec![0.0, 1.0, 2.0, 3.0]];
        let y = [0, 0, 1, 1];
        let t = Tree::fit(&cols, &y, (0..4).collect(), &params(1), &mut rng_from_seed(0));
        assert_eq!(t.nodes[0], Node::Split(0, 1.5, 1, 2));
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn equal_gain_prefers_lowest_feature_then_threshold() {
        // Both features separate the classes identically.
        let cols = vec![vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0, 3.0]];
        let y = [0, 1, 1, 1];
        let t = Tree::fit(&cols, &y, (0..4).collect(), &params(2), &mut rng_from_seed(0));
        assert_eq!(t.nodes[0], Node::Split(0, 0.5, 1, 2));
    }

    #[test]
    fn xor_needs_a_zero_gain_first_split() {
        let cols = vec![vec![0.0, 0.0, 1.0, 1.0], vec![0.0, 1.0, 0.0, 1.0]];
        let y = [0, 1, 1, 0];
        let t = Tree::fit(&cols, &y, (0..4).collect(), &params(2), &mut rng_from_seed(0));
        for i in 0..4 {
            assert_eq!(t.predict(&[cols[0][i], cols[1][i]]), y[i]);
        }
    }

    #[test]
    fn identical_rows_with_mixed_labels_make_a_leaf() {
        let cols = vec![vec![1.0, 1.0, 1.0]];
        let y = [0, 1, 1];
        let t = Tree::fit(&cols, &y, (0..3).collect(), &params(1), &mut rng_from_seed(0));
        assert_eq!(t.nodes, vec![Node::Leaf(1)]);
    }
}
