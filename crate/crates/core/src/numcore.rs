//! Dense numerical kernels: symmetric eigendecomposition, pivoted linear
//! solve and the discrete Fourier transform.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Eigenpairs sorted by descending eigenvalue. Column `k` of `vectors` pairs
/// with `values[k]`; each column's largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

const SYMMETRY_TOL: f64 = 1e-10;

pub fn symmetric_eig(a: ArrayView2<f64>) -> Result<EigenResult> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Contract(format!("eigendecomposition needs a square matrix, got {:?}", a.dim())));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (x, y) = (a[[i, j]], a[[j, i]]);
            if (x - y).abs() > SYMMETRY_TOL * (1.0 + x.abs().max(y.abs())) {
                return Err(Error::Contract(format!(
                    "matrix is not symmetric at ({i}, {j}): {x} vs {y}"
                )));
            }
        }
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    if n == 0 {
        return Ok(EigenResult {
            values: Vec::new(),
            vectors: Array2::zeros((0, 0)),
        });
    }

    // Symmetrise exactly before handing off so tiny asymmetries cannot leak in.
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = nalgebra::SymmetricEigen::new(m);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut values = Vec::with_capacity(n);
    let mut vectors = Array2::zeros((n, n));
    for (k, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[[i, k]] = sign * col[i];
        }
    }
    Ok(EigenResult { values, vectors })
}

/// Largest-to-smallest pivot ratio below which a system counts as singular.
const MIN_PIVOT_RATIO: f64 = 1e-12;

/// Gaussian elimination with partial pivoting.
pub fn linear_solve(a: ArrayView2<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Shape(format!(
            "linear_solve needs square A matching b, got A {:?} and b {}",
            a.dim(),
            b.len()
        )));
    }
    let mut m = a.to_owned();
    let mut rhs = Array1::from(b.to_vec());
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Numeric("singular matrix: pivot 0 is zero".into()));
    }
    for k in 0..n {
        let mut p = k;
        for i in (k + 1)..n {
            if m[[i, k]].abs() > m[[p, k]].abs() {
                p = i;
            }
        }
        let pivot = m[[p, k]];
        if pivot.abs() <= MIN_PIVOT_RATIO * scale {
            return Err(Error::Numeric(format!(
                "singular or ill-conditioned matrix: pivot {k} is {pivot:e} (max entry {scale:e})"
            )));
        }
        if p != k {
            for j in 0..n {
                m.swap([k, j], [p, j]);
            }
            rhs.swap(k, p);
        }
        for i in (k + 1)..n {
            let f = m[[i, k]] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[[i, j]] -= f * m[[k, j]];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in (k + 1)..n {
            s -= m[[k, j]] * x[j];
        }
        x[k] = s / m[[k, k]];
    }
    Ok(x)
}

/// `X_k = sum_n x_n exp(-2 pi i k n / N)`.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

pub fn dft_real(x: &[f64]) -> Vec<Complex64> {
    let buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    dft(&buf)
}

/// `x_n = (1/N) sum_k X_k exp(2 pi i k n / N)`.
pub fn idft(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    if buf.is_empty() {
        return buf;
    }
    let n = buf.len() as f64;
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    buf.iter_mut().for_each(|v| *v /= n);
    buf
}

/// Direct O(N^2) evaluation of the transform definition.
pub fn dft_naive(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| {
                    // Reduce k*j mod N first so the angle stays small and exact.
                    let phase = -std::f64::consts::TAU * ((k * j) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect()
}
