use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per node; `max(1, p/3)` when unset.
    pub feature_subsample: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 4, min_leaf: 20, feature_subsample: None }
    }
}

impl TreeParams {
    pub fn features_per_node(&self, p: usize) -> usize {
        self.feature_subsample.unwrap_or((p / 3).max(1)).clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Rows with `x ≤ threshold` go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Decrease in the sum of squared errors achieved by the split.
    pub improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub value: f64,
    pub depth: usize,
    pub n_samples: usize,
    pub split: Option<Split>,
}

/// Regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        while let Some(s) = &self.nodes[i].split {
            i = if row[s.feature] <= s.threshold { s.left } else { s.right };
        }
        self.nodes[i].value
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let p = x.ncols();
        let mut row = vec![0.0; p];
        (0..x.nrows())
            .map(|i| {
                for j in 0..p {
                    row[j] = x[(i, j)];
                }
                self.predict_row(&row)
            })
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    params: TreeParams,
    m: usize,
    nodes: Vec<TreeNode>,
}

fn mean(y: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64
}

impl Builder<'_> {
    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<(usize, f64, f64, usize)> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf.max(1);
        let total: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = rows.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = total_sq - total * total / n as f64;
        let mut best: Option<(usize, f64, f64, usize)> = None;
        let mut order = rows.to_vec();
        for &f in features {
            order.sort_by(|&a, &b| self.x[(a, f)].total_cmp(&self.x[(b, f)]).then(a.cmp(&b)));
            let mut s = 0.0;
            let mut sq = 0.0;
            for k in 0..n - 1 {
                let yi = self.y[order[k]];
                s += yi;
                sq += yi * yi;
                let nl = k + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let (a, b) = (self.x[(order[k], f)], self.x[(order[k + 1], f)]);
                if a == b {
                    continue;
                }
                let left = sq - s * s / nl as f64;
                let rs = total - s;
                let right = (total_sq - sq) - rs * rs / nr as f64;
                let gain = parent_sse - left - right;
                if best.is_none_or(|bst| gain > bst.2) {
                    best = Some((f, a + (b - a) / 2.0, gain, nl));
                }
            }
        }
        best.filter(|b| b.2 > 1e-12 * parent_sse.abs().max(f64::MIN_POSITIVE))
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode { value: mean(self.y, &rows), depth, n_samples: rows.len(), split: None });
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_leaf.max(1) {
            return id;
        }
        let p = self.x.ncols();
        let features: Vec<usize> = if self.m >= p {
            (0..p).collect()
        } else {
            let mut f = sample(rng, p, self.m).into_vec();
            f.sort_unstable();
            f
        };
        let Some((feature, threshold, improvement, _)) = self.best_split(&rows, &features) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[(i, feature)] <= threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id].split = Some(Split { feature, threshold, left, right, improvement });
        id
    }
}

fn check(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { expected: x.nrows(), got: y.len() });
    }
    if y.is_empty() || x.ncols() == 0 {
        return Err(Error::invalid("tree fitting needs at least one row and one feature"));
    }
    Ok(())
}

fn fit_rows(x: &Matrix, y: &[f64], rows: Vec<usize>, params: &TreeParams, rng: &mut Rng) -> Tree {
    let mut b = Builder { x, y, params: *params, m: params.features_per_node(x.ncols()), nodes: vec![] };
    b.grow(rows, 0, rng);
    Tree { nodes: b.nodes }
}

/// Greedy variance-reduction tree on all rows.
pub fn fit_tree(x: &Matrix, y: &[f64], params: &TreeParams, seed: u64) -> Result<Tree> {
    check(x, y)?;
    Ok(fit_rows(x, y, (0..y.len()).collect(), params, &mut rng::rng(seed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, tree: TreeParams::default(), bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

/// Trees on bootstrap resamples; tree `t` draws from its own stream derived
/// from `(seed, t)`, so the forest does not depend on the thread count.
pub fn fit_forest(x: &Matrix, y: &[f64], params: &ForestParams, seed: u64) -> Result<Forest> {
    check(x, y)?;
    if params.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    let n = y.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                let mut rows: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
                rows.sort_unstable();
                rows
            } else {
                (0..n).collect()
            };
            fit_rows(x, y, rows, &params.tree, &mut r)
        })
        .collect();
    Ok(Forest { trees })
}

/// Mean of the tree predictions.
pub fn forest_predict(forest: &Forest, x: &Matrix) -> Vec<f64> {
    let per_tree: Vec<Vec<f64>> = forest.trees.par_iter().map(|t| t.predict(x)).collect();
    let k = forest.trees.len() as f64;
    (0..x.nrows()).map(|i| per_tree.iter().map(|p| p[i]).sum::<f64>() / k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn column(v: &[f64]) -> Matrix {
        Matrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn constant_target_is_a_leaf() {
        let x = column(&[1.0, 2.0, 3.0, 4.0]);
        let t = fit_tree(&x, &[7.0; 4], &TreeParams { min_leaf: 1, ..Default::default() }, 0).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.nodes[0].value, 7.0);
    }

    #[test]
    fn planted_step() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = xs.iter().map(|v| if *v <= 5.0 { 1.0 } else { 3.0 }).collect();
        let params = TreeParams { max_depth: 1, min_leaf: 1, feature_subsample: None };
        let t = fit_tree(&column(&xs), &y, &params, 0).unwrap();
        let s = t.nodes[0].split.as_ref().unwrap();
        assert_eq!(s.threshold, 5.25);
        assert_eq!(t.predict(&column(&xs)), y);
    }

    #[test]
    fn memorizes_distinct_points() {
        let mut r = rng::rng(3);
        let x = Matrix::from_fn(60, 2, |_, _| r.random::<f64>());
        let y: Vec<f64> = (0..60).map(|_| r.random::<f64>()).collect();
        let params = TreeParams { max_depth: 64, min_leaf: 1, feature_subsample: Some(2) };
        let t = fit_tree(&x, &y, &params, 1).unwrap();
        assert_eq!(t.predict(&x), y);
        assert!(t.nodes.iter().all(|n| n.n_samples >= 1));
    }

    #[test]
    fn min_leaf_respected() {
        let mut r = rng::rng(4);
        let x = Matrix::from_fn(200, 3, |_, _| r.random::<f64>());
        let y: Vec<f64> = (0..200).map(|i| x[(i, 0)] * 3.0 + r.random::<f64>()).collect();
        let t = fit_tree(&x, &y, &TreeParams { max_depth: 10, min_leaf: 15, feature_subsample: None }, 0).unwrap();
        assert!(t.nodes.iter().filter(|n| n.split.is_none()).all(|n| n.n_samples >= 15));
    }

    #[test]
    fn single_tree_forest_without_bootstrap_is_a_tree() {
        let mut r = rng::rng(5);
        let x = Matrix::from_fn(100, 3, |_, _| r.random::<f64>());
        let y: Vec<f64> = (0..100).map(|i| x[(i, 1)] + x[(i, 2)].powi(2)).collect();
        let tp = TreeParams { max_depth: 5, min_leaf: 3, feature_subsample: Some(3) };
        let f = fit_forest(&x, &y, &ForestParams { n_trees: 1, tree: tp, bootstrap: false }, 9).unwrap();
        assert_eq!(f.trees[0], fit_tree(&x, &y, &tp, 123).unwrap());
    }

    #[test]
    fn forest_beats_single_deep_tree() {
        let mut r = rng::rng(6);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let gen = |r: &mut Rng, n: usize| {
            let x = Matrix::from_fn(n, 2, |_, _| r.random::<f64>() * 6.0);
            let y: Vec<f64> = (0..n).map(|i| x[(i, 0)].sin() + 0.5 * x[(i, 1)] + noise.sample(r)).collect();
            (x, y)
        };
        let (xtr, ytr) = gen(&mut r, 600);
        let (xte, yte) = gen(&mut r, 600);
        let deep = TreeParams { max_depth: 30, min_leaf: 1, feature_subsample: Some(2) };
        let tree = fit_tree(&xtr, &ytr, &deep, 1).unwrap();
        let forest = fit_forest(&xtr, &ytr, &ForestParams { n_trees: 60, tree: deep, bootstrap: true }, 1).unwrap();
        let mse = |p: &[f64]| p.iter().zip(&yte).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / yte.len() as f64;
        assert!(mse(&forest_predict(&forest, &xte)) < mse(&tree.predict(&xte)));
    }

    #[test]
    fn forest_mean_and_thread_independence() {
        let mut r = rng::rng(7);
        let x = Matrix::from_fn(150, 4, |_, _| r.random::<f64>());
        let y: Vec<f64> = (0..150).map(|i| x[(i, 0)] - x[(i, 3)]).collect();
        let params = ForestParams { n_trees: 12, tree: TreeParams { min_leaf: 5, ..Default::default() }, bootstrap: true };
        let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| fit_forest(&x, &y, &params, 3).unwrap());
        let b = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| fit_forest(&x, &y, &params, 3).unwrap());
        assert_eq!(a, b);
        let pred = forest_predict(&a, &x);
        for i in 0..5 {
            let row: Vec<f64> = (0..4).map(|j| x[(i, j)]).collect();
            let manual = a.trees.iter().map(|t| t.predict_row(&row)).sum::<f64>() / 12.0;
            assert!((pred[i] - manual).abs() < 1e-12);
        }
    }
}
