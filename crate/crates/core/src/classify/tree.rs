//! CART decision trees with Gini impurity, and bagged random forests.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

use super::{majority, LabeledMatrix};
use crate::error::{Error, Result};
use crate::rng::{stable_hash, Xoshiro256StarStar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per split; all when `None`.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 12,
            min_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub trees: usize,
    pub bootstrap: bool,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features per split; `ceil(sqrt(d))` when `None`.
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 100,
            bootstrap: true,
            max_depth: 12,
            min_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        class: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    n_features: usize,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    rng: Xoshiro256StarStar,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.ncols();
        match self.params.max_features {
            Some(m) if m < d => {
                let mut f = self.rng.sample_indices(d, m);
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    /// Highest Gini gain over midpoints of consecutive distinct values;
    /// ties keep the lowest feature, then the lowest threshold.
    fn best_split(&mut self, rows: &[usize], parent: f64) -> Option<BestSplit> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf;
        let mut best: Option<BestSplit> = None;
        let mut sorted: Vec<usize> = rows.to_vec();
        for f in self.candidate_features() {
            sorted.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]).then(a.cmp(&b)));
            let mut left = vec![0usize; self.n_classes];
            let mut right = vec![0usize; self.n_classes];
            for &r in &sorted {
                right[self.y[r]] += 1;
            }
            for i in 0..n - 1 {
                let c = self.y[sorted[i]];
                left[c] += 1;
                right[c] -= 1;
                let (lo, hi) = (self.x[[sorted[i], f]], self.x[[sorted[i + 1], f]]);
                if lo == hi {
                    continue;
                }
                let (nl, nr) = (i + 1, n - i - 1);
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let child = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                let gain = parent - child;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold: 0.5 * (lo + hi),
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let class = majority(rows.iter().map(|&r| self.y[r]));
        self.nodes.push(Node::Leaf { class });
        let mut counts = vec![0usize; self.n_classes];
        for &r in &rows {
            counts[self.y[r]] += 1;
        }
        let impurity = gini(&counts, rows.len());
        if impurity == 0.0 || depth >= self.params.max_depth || rows.len() < 2 * self.params.min_leaf {
            return id;
        }
        // zero-gain splits are kept on impure nodes (XOR needs one at the root)
        let Some(split) = self.best_split(&rows, impurity) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x[[i, split.feature]] <= split.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

fn grow(x: ArrayView2<f64>, y: &[usize], rows: Vec<usize>, params: TreeParams, seed: u64) -> TreeModel {
    let n_classes = y.iter().copied().max().map_or(1, |m| m + 1);
    let mut b = Builder {
        x,
        y,
        n_classes,
        params,
        rng: Xoshiro256StarStar::seed_from_u64(seed),
        nodes: Vec::new(),
    };
    b.build(rows, 0);
    TreeModel {
        nodes: b.nodes,
        n_features: x.ncols(),
    }
}

pub fn fit_tree(data: &LabeledMatrix, params: &TreeParams, seed: u64) -> TreeModel {
    grow(data.x(), data.y(), (0..data.len()).collect(), *params, seed)
}

impl TreeModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict_one(&self, x: ArrayView1<f64>) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<usize> {
        x.rows().into_iter().map(|r| self.predict_one(r)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
}

/// Tree `t` is grown from seed `hash(seed, "tree", t)`, so the ensemble does
/// not depend on how the trees are scheduled.
pub fn fit_forest(data: &LabeledMatrix, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    if params.trees == 0 {
        return Err(Error::Config("forest needs at least one tree".into()));
    }
    let d = data.n_features();
    let max_features = params
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d.max(1));
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        max_features: Some(max_features),
    };
    let n = data.len();
    let trees = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = stable_hash(seed, &["tree", &t.to_string()]);
            let mut rng = Xoshiro256StarStar::seed_from_u64(tree_seed);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            grow(data.x(), data.y(), rows, tree_params, rng.next_u64())
        })
        .collect();
    Ok(ForestModel { trees })
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }

    /// Majority vote, ties to the smallest class id.
    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<usize> {
        x.rows()
            .into_iter()
            .map(|r| majority(self.trees.iter().map(|t| t.predict_one(r))))
            .collect()
    }
}
