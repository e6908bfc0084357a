//! Random-forest regressor used only to rank input dimensions.
//!
//! Trees are CART-style, grown on bootstrap resamples: each split minimizes the
//! summed squared error of the two children over every feature, visited in a
//! random order so ties between equal-gain features are broken randomly. A dimension's
//! importance is the total squared-error reduction of the splits that use it,
//! summed over the ensemble and normalized to 1.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{arg_err, Result};
use crate::sampling::RngStream;

#[derive(Debug, Clone, Serialize)]
pub enum Node {
    Split {
        dim: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        mean: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { mean } => return mean,
                Node::Split { dim, threshold, left, right } => {
                    at = if x[dim] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_trees: usize,
    /// Nonnegative, sums to 1.
    pub importance: Vec<f64>,
}

impl Forest {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Dimensions sorted by decreasing importance, lower index first on ties.
    pub fn ranked_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = (0..self.importance.len()).collect();
        dims.sort_by(|&a, &b| self.importance[b].total_cmp(&self.importance[a]).then(a.cmp(&b)));
        dims
    }
}

pub fn fit_forest(data: &Dataset, n_trees: usize, min_leaf: usize, stream: RngStream) -> Result<Forest> {
    if n_trees == 0 {
        return arg_err("forest needs at least one tree");
    }
    if min_leaf == 0 {
        return arg_err("min_leaf must be at least 1");
    }
    if data.len() < 2 * min_leaf {
        return arg_err(format!(
            "dataset of {} rows is smaller than 2 * min_leaf = {}",
            data.len(),
            2 * min_leaf
        ));
    }
    let dim = data.dim();

    let grown: Vec<(Tree, Vec<f64>)> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.child(t as u64).rng();
            let l = data.len();
            let sample: Vec<usize> = (0..l).map(|_| rng.random_range(0..l)).collect();
            let mut builder = TreeBuilder {
                data,
                min_leaf,
                nodes: Vec::new(),
                gains: vec![0.0; dim],
            };
            builder.grow(sample, &mut rng);
            (Tree { nodes: builder.nodes }, builder.gains)
        })
        .collect();

    let mut importance = vec![0.0; dim];
    let mut trees = Vec::with_capacity(n_trees);
    for (tree, gains) in grown {
        for (acc, g) in importance.iter_mut().zip(gains) {
            *acc += g;
        }
        trees.push(tree);
    }
    let total: f64 = importance.iter().sum();
    if total > 0.0 {
        importance.iter_mut().for_each(|v| *v /= total);
    } else {
        importance.fill(1.0 / dim as f64);
    }
    Ok(Forest { trees, n_trees, importance })
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    min_leaf: usize,
    nodes: Vec<Node>,
    gains: Vec<f64>,
}

struct BestSplit {
    dim: usize,
    threshold: f64,
    gain: f64,
}

impl TreeBuilder<'_> {
    /// Grows the subtree for `rows` and returns its node index.
    fn grow(&mut self, rows: Vec<usize>, rng: &mut impl Rng) -> usize {
        let ys = self.data.ys();
        let n = rows.len() as f64;
        let mean = rows.iter().map(|&r| ys[r]).sum::<f64>() / n;
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { mean });

        if rows.len() < 2 * self.min_leaf {
            return at;
        }
        let Some(best) = self.best_split(&rows, rng) else {
            return at;
        };
        let xs = self.data.xs();
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| xs[r][best.dim] <= best.threshold);
        self.gains[best.dim] += best.gain;
        let left = self.grow(left_rows, rng);
        let right = self.grow(right_rows, rng);
        self.nodes[at] = Node::Split {
            dim: best.dim,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&self, rows: &[usize], rng: &mut impl Rng) -> Option<BestSplit> {
        let xs = self.data.xs();
        let ys = self.data.ys();
        let n = rows.len();
        let total: f64 = rows.iter().map(|&r| ys[r]).sum();
        let total_sq: f64 = rows.iter().map(|&r| ys[r] * ys[r]).sum();
        let parent_sse = total_sq - total * total / n as f64;
        if parent_sse <= 1e-12 * total_sq.max(f64::MIN_POSITIVE) {
            return None;
        }

        let dim = self.data.dim();
        let features = index::sample(rng, dim, dim).into_vec();

        let mut best: Option<BestSplit> = None;
        let mut sorted = rows.to_vec();
        for d in features {
            sorted.sort_by(|&a, &b| xs[a][d].total_cmp(&xs[b][d]));
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for i in 0..n - 1 {
                let y = ys[sorted[i]];
                left_sum += y;
                left_sq += y * y;
                let n_left = i + 1;
                let n_right = n - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let (a, b) = (xs[sorted[i]][d], xs[sorted[i + 1]][d]);
                if a == b {
                    continue;
                }
                let right_sum = total - left_sum;
                let right_sq = total_sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / n_left as f64)
                    + (right_sq - right_sum * right_sum / n_right as f64);
                let gain = parent_sse - sse;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        dim: d,
                        threshold: 0.5 * (a + b),
                        gain,
                    });
                }
            }
        }
        best.filter(|b| b.gain > 0.0)
    }
}
