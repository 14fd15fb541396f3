//! PCA and locally linear embedding, both fitted on vectorised training
//! windows and applied out of sample.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::embed::EmbeddingVector;
use crate::error::{shape_mismatch, Error, Result};
use crate::numcore::{linear_solve, symmetric_eig};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `D x d`, orthonormal columns.
    pub components: Array2<f64>,
    pub explained_variances: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn dim(&self) -> usize {
        self.components.ncols()
    }
}

/// Top-`d` eigenvectors of the sample covariance `Xc^T Xc / (n - 1)`.
pub fn pca_fit(x: ArrayView2<f64>, d: usize) -> Result<PcaModel> {
    let (n, dim) = x.dim();
    if n < 2 {
        return Err(Error::Config(format!("PCA needs at least 2 samples, got {n}")));
    }
    let max_d = (n - 1).min(dim);
    if d == 0 || d > max_d {
        return Err(Error::Config(format!("PCA target dimension {d} outside 1..={max_d}")));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    let eig = symmetric_eig(cov.view())?;
    let components = eig.vectors.slice(ndarray::s![.., ..d]).to_owned();
    let explained_variances = eig.values[..d].iter().map(|&v| v.max(0.0)).collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variances,
    })
}

/// `W^T (x - mean)`.
pub fn pca_transform(m: &PcaModel, x: ArrayView1<f64>) -> Result<EmbeddingVector> {
    if x.len() != m.input_dim() {
        return Err(shape_mismatch("PCA input dimension", m.input_dim(), x.len()));
    }
    let centered = &x - &m.mean;
    Ok(m.components.t().dot(&centered).to_vec())
}

pub fn pca_transform_batch(m: &PcaModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != m.input_dim() {
        return Err(shape_mismatch("PCA input dimension", m.input_dim(), x.ncols()));
    }
    Ok((&x - &m.mean).dot(&m.components))
}

pub const DEFAULT_LLE_REG: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LleModel {
    pub train_points: Array2<f64>,
    pub k: usize,
    pub reg: f64,
    /// Per training point: `(neighbour index, weight)`, weights summing to one.
    pub weights: Vec<Vec<(usize, f64)>>,
    /// `n x d`, scaled by `sqrt(n)`.
    pub embedding: Array2<f64>,
    /// Eigenvalues of `(I - W)^T (I - W)` for the kept columns, ascending.
    pub eigenvalues: Vec<f64>,
}

impl LleModel {
    pub fn dim(&self) -> usize {
        self.embedding.ncols()
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Indices of the `k` nearest rows of `points` to `query` (Euclidean, ties by
/// lower index), skipping `exclude`. Returned with squared distances.
fn nearest(
    points: ArrayView2<f64>,
    query: ArrayView1<f64>,
    k: usize,
    exclude: Option<usize>,
) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = points
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, row)| (i, sq_dist(row, query)))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Affine reconstruction weights of `query` from the given neighbour rows:
/// solve `(G + r I) w = 1` with `G` the local Gram matrix of neighbour
/// differences and `r = reg * trace(G)` (or `reg` when the trace vanishes),
/// then rescale so the weights sum to one.
pub fn reconstruction_weights(
    points: ArrayView2<f64>,
    neighbours: &[usize],
    query: ArrayView1<f64>,
    reg: f64,
) -> Result<Vec<f64>> {
    let k = neighbours.len();
    let diffs: Vec<Array1<f64>> = neighbours.iter().map(|&j| &points.row(j) - &query).collect();
    let mut gram = Array2::zeros((k, k));
    for a in 0..k {
        for b in a..k {
            let g = diffs[a].dot(&diffs[b]);
            gram[[a, b]] = g;
            gram[[b, a]] = g;
        }
    }
    let trace: f64 = gram.diag().sum();
    let ridge = if trace > 0.0 { reg * trace } else { reg };
    for a in 0..k {
        gram[[a, a]] += ridge;
    }
    let w = linear_solve(gram.view(), &vec![1.0; k])?;
    let total: f64 = w.iter().sum();
    if total.abs() < f64::MIN_POSITIVE || !total.is_finite() {
        return Err(Error::Numeric("degenerate local Gram system in LLE".into()));
    }
    Ok(w.iter().map(|v| v / total).collect())
}

pub fn lle_fit(x: ArrayView2<f64>, k: usize, d: usize, reg: f64) -> Result<LleModel> {
    let n = x.nrows();
    if k == 0 || k >= n {
        return Err(Error::Config(format!("LLE neighbour count {k} must be in 1..{n}")));
    }
    if n < k + 2 {
        return Err(Error::Config(format!("LLE needs at least {} points, got {n}", k + 2)));
    }
    if d == 0 || d > k {
        return Err(Error::Config(format!("LLE target dimension {d} must be in 1..={k}")));
    }
    if !(reg >= 0.0) {
        return Err(Error::Config("LLE regulariser must be non-negative".into()));
    }

    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let nbrs: Vec<usize> = nearest(x, x.row(i), k, Some(i)).into_iter().map(|(j, _)| j).collect();
        let w = reconstruction_weights(x, &nbrs, x.row(i), reg)?;
        weights.push(nbrs.into_iter().zip(w).collect::<Vec<_>>());
    }

    // M = (I - W)^T (I - W) = I - W - W^T + W^T W, assembled from the sparse rows.
    let mut m = Array2::<f64>::eye(n);
    for (i, row) in weights.iter().enumerate() {
        for &(a, wa) in row {
            m[[i, a]] -= wa;
            m[[a, i]] -= wa;
            for &(b, wb) in row {
                m[[a, b]] += wa * wb;
            }
        }
    }
    let eig = symmetric_eig(m.view())?;
    // Descending order: the smallest eigenpair is last; keep the d just above it.
    let scale = (n as f64).sqrt();
    let mut embedding = Array2::zeros((n, d));
    let mut eigenvalues = Vec::with_capacity(d);
    for col in 0..d {
        let src = n - 2 - col;
        eigenvalues.push(eig.values[src]);
        for i in 0..n {
            embedding[[i, col]] = eig.vectors[[i, src]] * scale;
        }
    }
    Ok(LleModel {
        train_points: x.to_owned(),
        k,
        reg,
        weights,
        embedding,
        eigenvalues,
    })
}

/// Out-of-sample rule: reconstruct `x` from its `k` nearest training points and
/// apply the same weights to their embeddings. An exact duplicate of a
/// training point returns that point's embedding.
pub fn lle_transform(m: &LleModel, x: ArrayView1<f64>) -> Result<EmbeddingVector> {
    let dim = m.train_points.ncols();
    if x.len() != dim {
        return Err(shape_mismatch("LLE input dimension", dim, x.len()));
    }
    let nbrs = nearest(m.train_points.view(), x, m.k, None);
    if let Some(&(j, dist)) = nbrs.first() {
        if dist == 0.0 {
            return Ok(m.embedding.row(j).to_vec());
        }
    }
    let idx: Vec<usize> = nbrs.iter().map(|&(j, _)| j).collect();
    let w = reconstruction_weights(m.train_points.view(), &idx, x, m.reg)?;
    let mut out = vec![0.0; m.dim()];
    for (&j, wj) in idx.iter().zip(&w) {
        for (o, e) in out.iter_mut().zip(m.embedding.row(j)) {
            *o += wj * e;
        }
    }
    Ok(out)
}
