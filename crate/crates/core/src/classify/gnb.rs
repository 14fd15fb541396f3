//! Gaussian naive Bayes.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{argmax, LabeledMatrix};

pub const VAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct GnbModel {
    pub classes: Vec<usize>,
    /// classes x features
    pub means: Array2<f64>,
    pub vars: Array2<f64>,
    pub priors: Array1<f64>,
}

/// Per-class feature means, population variances floored at `1e-9`, and
/// empirical priors.
pub fn fit(data: &LabeledMatrix) -> GnbModel {
    let classes = data.classes();
    let d = data.n_features();
    let mut means = Array2::zeros((classes.len(), d));
    let mut vars = Array2::zeros((classes.len(), d));
    let mut priors = Array1::zeros(classes.len());
    for (ci, &c) in classes.iter().enumerate() {
        let rows: Vec<usize> = (0..data.len()).filter(|&i| data.y()[i] == c).collect();
        let sub = data.x().select(Axis(0), &rows);
        means.row_mut(ci).assign(&sub.mean_axis(Axis(0)).expect("class has rows"));
        vars.row_mut(ci)
            .assign(&sub.var_axis(Axis(0), 0.0).mapv(|v| v.max(VAR_FLOOR)));
        priors[ci] = rows.len() as f64 / data.len() as f64;
    }
    GnbModel {
        classes,
        means,
        vars,
        priors,
    }
}

impl GnbModel {
    pub fn n_features(&self) -> usize {
        self.means.ncols()
    }

    fn log_joint(&self, x: ArrayView1<f64>) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| {
                let ll: f64 = x
                    .iter()
                    .zip(self.means.row(c))
                    .zip(self.vars.row(c))
                    .map(|((&v, &m), &s2)| {
                        -0.5 * ((2.0 * std::f64::consts::PI * s2).ln() + (v - m).powi(2) / s2)
                    })
                    .sum();
                self.priors[c].ln() + ll
            })
            .collect()
    }

    /// Posterior class probabilities, columns in `classes` order.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.classes.len()));
        for (i, row) in x.rows().into_iter().enumerate() {
            let lj = self.log_joint(row);
            let m = lj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = lj.iter().map(|v| (v - m).exp()).sum();
            for (c, v) in lj.iter().enumerate() {
                out[[i, c]] = (v - m).exp() / z;
            }
        }
        out
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<usize> {
        x.rows()
            .into_iter()
            .map(|r| self.classes[argmax(self.log_joint(r))])
            .collect()
    }
}
