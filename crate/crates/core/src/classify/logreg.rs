//! Multinomial logistic regression trained by full-batch gradient descent.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{argmax, LabeledMatrix, Standardizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogregParams {
    /// L2 penalty on the weights (not the intercepts).
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once the gradient's max-norm falls below this.
    pub tol: f64,
}

impl Default for LogregParams {
    fn default() -> Self {
        LogregParams {
            lambda: 1e-4,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogregModel {
    pub classes: Vec<usize>,
    standardizer: Standardizer,
    /// features x classes
    pub weights: Array2<f64>,
    pub intercepts: Array1<f64>,
    pub iterations: usize,
}

fn softmax_in_place(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

/// Largest eigenvalue of `A^T A / n` for `A = [X 1]`, by power iteration.
fn gram_spectral_norm(x: ArrayView2<f64>) -> f64 {
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mut v = Array1::from_elem(d + 1, 1.0 / ((d + 1) as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..200 {
        let av = x.dot(&v.slice(ndarray::s![..d])) + v[d];
        let mut w = Array1::zeros(d + 1);
        w.slice_mut(ndarray::s![..d]).assign(&x.t().dot(&av));
        w[d] = av.sum();
        w /= n;
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= 1e-10 * next.abs() {
            return next.max(norm);
        }
        lambda = next;
    }
    lambda
}

/// Softmax cross-entropy plus `lambda/2 |W|^2` on standardised features.
/// The step size is `1/L` with `L` the gradient's Lipschitz bound.
pub fn fit(data: &LabeledMatrix, params: &LogregParams) -> Result<LogregModel> {
    let classes = data.classes();
    if classes.len() < 2 {
        return Err(Error::Config("logistic regression needs at least two classes".into()));
    }
    let standardizer = Standardizer::fit(data.x());
    let x = standardizer.apply(data.x());
    let (n, d, k) = (x.nrows(), x.ncols(), classes.len());
    let mut onehot = Array2::zeros((n, k));
    for (i, y) in data.y().iter().enumerate() {
        let c = classes.binary_search(y).expect("label among classes");
        onehot[[i, c]] = 1.0;
    }
    let lipschitz = 0.5 * gram_spectral_norm(x.view()) + params.lambda;
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };

    let mut w = Array2::<f64>::zeros((d, k));
    let mut b = Array1::<f64>::zeros(k);
    let mut iterations = 0;
    for _ in 0..params.max_iter {
        let mut p = x.dot(&w) + &b;
        softmax_in_place(&mut p);
        let resid = (p - &onehot) / n as f64;
        let gw = x.t().dot(&resid) + &(&w * params.lambda);
        let gb = resid.sum_axis(Axis(0));
        let gmax = gw.iter().chain(gb.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax < params.tol {
            break;
        }
        w -= &(gw * step);
        b -= &(gb * step);
        iterations += 1;
    }
    Ok(LogregModel {
        classes,
        standardizer,
        weights: w,
        intercepts: b,
        iterations,
    })
}

impl LogregModel {
    pub fn n_features(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = self.standardizer.apply(x).dot(&self.weights) + &self.intercepts;
        softmax_in_place(&mut z);
        z
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<usize> {
        self.predict_proba(x)
            .rows()
            .into_iter()
            .map(|r| self.classes[argmax(r.iter().copied())])
            .collect()
    }
}
