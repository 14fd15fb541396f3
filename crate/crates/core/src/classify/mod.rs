//! Downstream classifiers over embedding matrices, plus hyperparameter
//! selection on a validation split or by k-fold cross-validation.

pub mod gnb;
pub mod knn;
pub mod logreg;
pub mod mlp;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{shape_mismatch, Error, Result};
use crate::rng::{stable_hash, Xoshiro256StarStar};

/// Feature rows with one label id each. Finite, nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    x: Array2<f64>,
    y: Vec<usize>,
}

impl LabeledMatrix {
    pub fn new(x: Array2<f64>, y: Vec<usize>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Data("labelled matrix has no rows".into()));
        }
        if y.len() != x.nrows() {
            return Err(shape_mismatch("label count", x.nrows(), y.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("features contain NaN/Inf".into()));
        }
        Ok(LabeledMatrix { x, y })
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Distinct labels, ascending.
    pub fn classes(&self) -> Vec<usize> {
        let mut c = self.y.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn select(&self, rows: &[usize]) -> LabeledMatrix {
        LabeledMatrix {
            x: self.x.select(Axis(0), rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Knn,
    Gnb,
    Logreg,
    Tree,
    Forest,
    Mlp,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::Knn,
        ClassifierKind::Gnb,
        ClassifierKind::Logreg,
        ClassifierKind::Tree,
        ClassifierKind::Forest,
        ClassifierKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Gnb => "gnb",
            ClassifierKind::Logreg => "logreg",
            ClassifierKind::Tree => "tree",
            ClassifierKind::Forest => "forest",
            ClassifierKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown classifier '{s}'")))
    }
}

/// Optional overrides; unset fields take each classifier's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_leaf: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trees: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_features: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
}

impl ClassifierParams {
    pub fn knn(&self) -> knn::KnnParams {
        knn::KnnParams {
            k: self.k.unwrap_or(knn::DEFAULT_K),
        }
    }

    pub fn logreg(&self) -> logreg::LogregParams {
        let d = logreg::LogregParams::default();
        logreg::LogregParams {
            lambda: self.lambda.unwrap_or(d.lambda),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            ..d
        }
    }

    pub fn tree(&self) -> tree::TreeParams {
        let d = tree::TreeParams::default();
        tree::TreeParams {
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            min_leaf: self.min_leaf.unwrap_or(d.min_leaf),
            max_features: self.max_features,
        }
    }

    pub fn forest(&self) -> tree::ForestParams {
        let d = tree::ForestParams::default();
        tree::ForestParams {
            trees: self.trees.unwrap_or(d.trees),
            bootstrap: self.bootstrap.unwrap_or(d.bootstrap),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            min_leaf: self.min_leaf.unwrap_or(d.min_leaf),
            max_features: self.max_features,
        }
    }

    pub fn mlp(&self) -> mlp::MlpParams {
        let d = mlp::MlpParams::default();
        mlp::MlpParams {
            hidden: self.hidden.unwrap_or(d.hidden),
            epochs: self.epochs.unwrap_or(d.epochs),
            ..d
        }
    }

    fn validate(&self, kind: ClassifierKind) -> Result<()> {
        use ClassifierKind::*;
        let present = [
            ("k", self.k.is_some(), &[Knn][..]),
            ("lambda", self.lambda.is_some(), &[Logreg][..]),
            ("max_iter", self.max_iter.is_some(), &[Logreg][..]),
            ("max_depth", self.max_depth.is_some(), &[Tree, Forest][..]),
            ("min_leaf", self.min_leaf.is_some(), &[Tree, Forest][..]),
            ("trees", self.trees.is_some(), &[Forest][..]),
            ("max_features", self.max_features.is_some(), &[Tree, Forest][..]),
            ("bootstrap", self.bootstrap.is_some(), &[Forest][..]),
            ("hidden", self.hidden.is_some(), &[Mlp][..]),
            ("epochs", self.epochs.is_some(), &[Mlp][..]),
        ];
        if let Some((name, ..)) = present.iter().find(|(_, set, kinds)| *set && !kinds.contains(&kind)) {
            return Err(Error::Config(format!("parameter '{name}' does not apply to {kind}")));
        }
        let zero = [self.k, self.max_depth, self.min_leaf, self.trees, self.max_features, self.hidden]
            .contains(&Some(0));
        if zero {
            return Err(Error::Config(format!("{kind}: size parameters must be positive")));
        }
        if self.lambda.is_some_and(|l| !(l >= 0.0)) {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        Ok(())
    }
}

/// A configured classifier: fixed parameters, or a candidate grid chosen by
/// validation accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    #[serde(default)]
    pub params: ClassifierParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<ClassifierParams>,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind) -> Self {
        ClassifierSpec {
            kind,
            params: ClassifierParams::default(),
            grid: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate(self.kind)?;
        self.grid.iter().try_for_each(|p| p.validate(self.kind))
    }

    /// Grid entries override `params` field by field.
    pub fn candidates(&self) -> Vec<ClassifierParams> {
        if self.grid.is_empty() {
            return vec![self.params.clone()];
        }
        self.grid
            .iter()
            .map(|g| {
                let b = &self.params;
                ClassifierParams {
                    k: g.k.or(b.k),
                    lambda: g.lambda.or(b.lambda),
                    max_iter: g.max_iter.or(b.max_iter),
                    max_depth: g.max_depth.or(b.max_depth),
                    min_leaf: g.min_leaf.or(b.min_leaf),
                    trees: g.trees.or(b.trees),
                    max_features: g.max_features.or(b.max_features),
                    bootstrap: g.bootstrap.or(b.bootstrap),
                    hidden: g.hidden.or(b.hidden),
                    epochs: g.epochs.or(b.epochs),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum ClassifierModel {
    Knn(knn::KnnModel),
    Gnb(gnb::GnbModel),
    Logreg(logreg::LogregModel),
    Tree(tree::TreeModel),
    Forest(tree::ForestModel),
    Mlp(mlp::MlpModel),
}

pub fn fit(
    kind: ClassifierKind,
    data: &LabeledMatrix,
    params: &ClassifierParams,
    seed: u64,
) -> Result<ClassifierModel> {
    params.validate(kind)?;
    Ok(match kind {
        ClassifierKind::Knn => ClassifierModel::Knn(knn::fit(data, params.knn())),
        ClassifierKind::Gnb => ClassifierModel::Gnb(gnb::fit(data)),
        ClassifierKind::Logreg => ClassifierModel::Logreg(logreg::fit(data, &params.logreg())?),
        ClassifierKind::Tree => ClassifierModel::Tree(tree::fit_tree(data, &params.tree(), seed)),
        ClassifierKind::Forest => ClassifierModel::Forest(tree::fit_forest(data, &params.forest(), seed)?),
        ClassifierKind::Mlp => ClassifierModel::Mlp(mlp::fit(data, &params.mlp(), seed)?),
    })
}

impl ClassifierModel {
    pub fn n_features(&self) -> usize {
        match self {
            ClassifierModel::Knn(m) => m.n_features(),
            ClassifierModel::Gnb(m) => m.n_features(),
            ClassifierModel::Logreg(m) => m.n_features(),
            ClassifierModel::Tree(m) => m.n_features(),
            ClassifierModel::Forest(m) => m.n_features(),
            ClassifierModel::Mlp(m) => m.n_features(),
        }
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        if x.ncols() != self.n_features() {
            return Err(shape_mismatch("classifier feature dimension", self.n_features(), x.ncols()));
        }
        Ok(match self {
            ClassifierModel::Knn(m) => m.predict(x),
            ClassifierModel::Gnb(m) => m.predict(x),
            ClassifierModel::Logreg(m) => m.predict(x),
            ClassifierModel::Tree(m) => m.predict(x),
            ClassifierModel::Forest(m) => m.predict(x),
            ClassifierModel::Mlp(m) => m.predict(x)?,
        })
    }
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(shape_mismatch("prediction count", truth.len(), pred.len()));
    }
    if truth.is_empty() {
        return Err(Error::Data("accuracy of an empty prediction set".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Smallest class id among those with the highest count.
pub(crate) fn majority(labels: impl IntoIterator<Item = usize>) -> usize {
    let mut counts: Vec<usize> = Vec::new();
    for l in labels {
        if l >= counts.len() {
            counts.resize(l + 1, 0);
        }
        counts[l] += 1;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

/// Index of the largest entry, first on ties.
pub(crate) fn argmax(v: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in v.into_iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best.0
}

/// Column means and population standard deviations (1 where constant).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Standardizer {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl Standardizer {
    pub(crate) fn fit(x: ArrayView2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("nonempty matrix");
        let scale = x.var_axis(Axis(0), 0.0).mapv(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
        Standardizer { mean, scale }
    }

    pub(crate) fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
    }

    pub(crate) fn dim(&self) -> usize {
        self.mean.len()
    }
}

pub const CV_FOLDS: usize = 5;

/// Picks the candidate with the best validation accuracy (first on ties).
/// With no validation rows, scores by k-fold cross-validation on `train`
/// using a seeded fold assignment.
pub fn select_params(
    kind: ClassifierKind,
    candidates: &[ClassifierParams],
    train: &LabeledMatrix,
    val: Option<&LabeledMatrix>,
    seed: u64,
) -> Result<ClassifierParams> {
    let first = candidates
        .first()
        .ok_or_else(|| Error::Config("empty hyperparameter grid".into()))?;
    if candidates.len() == 1 {
        return Ok(first.clone());
    }
    let score = |p: &ClassifierParams| -> Result<f64> {
        match val {
            Some(v) if !v.is_empty() => {
                let m = fit(kind, train, p, seed)?;
                accuracy(&m.predict(v.x())?, v.y())
            }
            _ => cross_val_accuracy(kind, p, train, CV_FOLDS, seed),
        }
    };
    let mut best = (first.clone(), f64::NEG_INFINITY);
    for p in candidates {
        let s = score(p)?;
        if s > best.1 {
            best = (p.clone(), s);
        }
    }
    Ok(best.0)
}

/// Mean held-out accuracy over `folds` folds; folds with an empty side are
/// skipped.
pub fn cross_val_accuracy(
    kind: ClassifierKind,
    params: &ClassifierParams,
    data: &LabeledMatrix,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let n = data.len();
    let folds = folds.clamp(2, n.max(2));
    let mut order: Vec<usize> = (0..n).collect();
    Xoshiro256StarStar::seed_from_u64(stable_hash(seed, &["folds"])).shuffle(&mut order);
    let mut total = 0.0;
    let mut used = 0;
    for f in 0..folds {
        let held: Vec<usize> = order.iter().copied().skip(f).step_by(folds).collect();
        let kept: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(i, _)| i % folds != f)
            .map(|(_, &j)| j)
            .collect();
        if held.is_empty() || kept.is_empty() {
            continue;
        }
        let fit_part = data.select(&kept);
        let test_part = data.select(&held);
        let m = match fit(kind, &fit_part, params, seed) {
            Ok(m) => m,
            // a fold can lose a class entirely; score it as a miss
            Err(Error::Config(_)) => {
                used += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        total += accuracy(&m.predict(test_part.x())?, test_part.y())?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Data("cross-validation needs at least two rows".into()));
    }
    Ok(total / used as f64)
}
